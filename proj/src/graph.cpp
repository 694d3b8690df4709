#include "hypercurv/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include <json.hpp>
#include <spdlog/spdlog.h>

namespace hypercurv {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file", path);
  return in;
}

std::size_t parse_index(const std::string& token, const std::string& path, std::size_t line) {
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(token, &pos);
  } catch (const std::exception&) {
    throw DataError("expected a node id, got '" + token + "'", path, line);
  }
  if (pos != token.size() || v < 0) {
    throw DataError("expected a non-negative node id, got '" + token + "'", path, line);
  }
  return static_cast<std::size_t>(v);
}

double parse_real(const std::string& token, const std::string& path, std::size_t line) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(token, &pos);
  } catch (const std::exception&) {
    throw DataError("expected a number, got '" + token + "'", path, line);
  }
  if (trim(token.substr(pos)).size() != 0 || !std::isfinite(v)) {
    throw DataError("expected a finite number, got '" + token + "'", path, line);
  }
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(trim(tok));
  return out;
}

std::uint64_t pair_key(std::size_t u, std::size_t v, std::size_t n) {
  if (u > v) std::swap(u, v);
  return static_cast<std::uint64_t>(u) * n + v;
}

std::size_t count_from_frac(double frac, std::size_t total) {
  return static_cast<std::size_t>(std::floor(frac * static_cast<double>(total) + 1e-9));
}

}  // namespace

DataError::DataError(const std::string& what, std::string file, std::size_t line)
    : std::runtime_error(file.empty()  ? what
                         : line == 0   ? file + ": " + what
                                       : file + ":" + std::to_string(line) + ": " + what),
      file_(std::move(file)),
      line_(line) {}

// -------------------------------------------------------------------- Graph

Graph::Graph(std::size_t n_nodes, std::span<const Edge> edges, Tensor features,
             std::vector<int> labels)
    : adjacency_(n_nodes) {
  for (const Edge& e : edges) {
    if (e.u >= n_nodes || e.v >= n_nodes) {
      throw DataError("edge (" + std::to_string(e.u) + ", " + std::to_string(e.v) +
                      ") references a node outside [0, " + std::to_string(n_nodes) + ")");
    }
    if (e.u == e.v) continue;
    adjacency_[e.u].push_back(e.v);
    adjacency_[e.v].push_back(e.u);
  }
  for (auto& nbrs : adjacency_) {
    std::sort(nbrs.begin(), nbrs.end());
    nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
    num_edges_ += nbrs.size();
  }
  num_edges_ /= 2;

  if (features.rank() == 0 || features.empty()) {
    features_ = Tensor::matrix(n_nodes, features.rank() == 2 ? features.cols() : 0);
    if (features.rank() == 2 && features.rows() != n_nodes && features.rows() != 0) {
      throw DataError("feature rows do not match node count");
    }
  } else {
    if (features.rows() != n_nodes) {
      throw DataError("feature matrix has " + std::to_string(features.rows()) +
                      " rows for " + std::to_string(n_nodes) + " nodes");
    }
    if (!features.all_finite()) throw DataError("feature matrix has non-finite entries");
    features_ = std::move(features);
  }

  if (!labels.empty()) {
    if (labels.size() != n_nodes) throw DataError("label vector does not match node count");
    int max_label = -1;
    for (int l : labels) {
      if (l < kUnlabeled) throw DataError("negative class id " + std::to_string(l));
      max_label = std::max(max_label, l);
    }
    labels_ = std::move(labels);
    num_classes_ = static_cast<std::size_t>(max_label + 1);
  }
}

bool Graph::has_edge(std::size_t u, std::size_t v) const {
  if (u >= num_nodes() || v >= num_nodes()) return false;
  const auto& nbrs = adjacency_[u];
  return std::binary_search(nbrs.begin(), nbrs.end(), v);
}

std::vector<Edge> Graph::edges() const {
  std::vector<Edge> out;
  out.reserve(num_edges_);
  for (std::size_t u = 0; u < adjacency_.size(); ++u) {
    for (std::size_t v : adjacency_[u]) {
      if (u < v) out.push_back({u, v});
    }
  }
  return out;
}

Graph Graph::with_edges(std::span<const Edge> edges) const {
  return Graph(num_nodes(), edges, features_, labels_);
}

// ---------------------------------------------------------------- ingestion

std::vector<Edge> read_edge_list(const std::string& path) {
  std::ifstream in = open_or_throw(path);
  std::vector<Edge> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    std::vector<std::string> tokens;
    for (std::string tok; ss >> tok;) tokens.push_back(tok);
    if (tokens.empty()) continue;
    if (tokens.size() != 2) {
      throw DataError("expected two node ids per line, got " + std::to_string(tokens.size()),
                      path, lineno);
    }
    edges.push_back({parse_index(tokens[0], path, lineno), parse_index(tokens[1], path, lineno)});
  }
  return edges;
}

Tensor read_features(const std::string& path) {
  std::ifstream in = open_or_throw(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  const auto first = text.find_first_not_of(" \t\r\n");

  if (first != std::string::npos && text[first] == '{') {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(std::string("invalid JSON feature manifest: ") + e.what(), path);
    }
    if (!doc.contains("n") || !doc.contains("f") || !doc.contains("rows")) {
      throw DataError("feature manifest needs keys n, f and rows", path);
    }
    const auto n = doc["n"].get<std::size_t>();
    const auto f = doc["f"].get<std::size_t>();
    const auto& rows = doc["rows"];
    if (!rows.is_array() || rows.size() != n) {
      throw DataError("manifest declares n=" + std::to_string(n) + " but has " +
                          std::to_string(rows.size()) + " rows",
                      path);
    }
    Tensor out = Tensor::matrix(n, f);
    for (std::size_t i = 0; i < n; ++i) {
      if (!rows[i].is_array() || rows[i].size() != f) {
        throw DataError("manifest row " + std::to_string(i) + " does not have f=" +
                            std::to_string(f) + " entries",
                        path);
      }
      for (std::size_t j = 0; j < f; ++j) {
        if (!rows[i][j].is_number()) {
          throw DataError("manifest row " + std::to_string(i) + " has a non-numeric entry", path);
        }
        out(i, j) = rows[i][j].get<double>();
        if (!std::isfinite(out(i, j))) throw DataError("non-finite feature", path);
      }
    }
    return out;
  }

  std::istringstream lines(text);
  std::vector<double> values;
  std::size_t cols = 0, rows = 0, lineno = 0;
  std::string line;
  while (std::getline(lines, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto tokens = split_csv(line);
    if (rows == 0) cols = tokens.size();
    if (tokens.size() != cols) {
      throw DataError("expected " + std::to_string(cols) + " columns, got " +
                          std::to_string(tokens.size()),
                      path, lineno);
    }
    for (const auto& tok : tokens) values.push_back(parse_real(tok, path, lineno));
    ++rows;
  }
  return Tensor({rows, cols}, std::move(values));
}

std::vector<int> read_labels(const std::string& path, std::size_t n_nodes) {
  std::ifstream in = open_or_throw(path);
  std::vector<int> labels(n_nodes, kUnlabeled);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    const auto tokens = split_csv(line);
    if (tokens.size() != 2) throw DataError("expected 'node_id,class_id'", path, lineno);
    const std::size_t node = parse_index(tokens[0], path, lineno);
    const std::size_t cls = parse_index(tokens[1], path, lineno);
    if (node >= n_nodes) {
      throw DataError("node id " + std::to_string(node) + " out of range", path, lineno);
    }
    const int label = static_cast<int>(cls);
    if (labels[node] != kUnlabeled && labels[node] != label) {
      throw DataError("conflicting labels for node " + std::to_string(node), path, lineno);
    }
    labels[node] = label;
  }
  return labels;
}

Graph load_graph(const std::string& edge_path, const std::optional<std::string>& feature_path,
                 const std::optional<std::string>& label_path) {
  const std::vector<Edge> edges = read_edge_list(edge_path);
  Tensor features = Tensor::matrix(0, 0);
  std::size_t n = 0;
  if (feature_path) {
    features = read_features(*feature_path);
    n = features.rows();
  } else {
    for (const Edge& e : edges) n = std::max({n, e.u + 1, e.v + 1});
    features = Tensor::matrix(n, 0);
  }
  // Re-scan to report the offending line for out-of-range ids.
  if (feature_path) {
    std::ifstream in(edge_path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
      std::istringstream ss(line);
      for (std::string tok; ss >> tok;) {
        if (parse_index(tok, edge_path, lineno) >= n) {
          throw DataError("node id " + tok + " out of range for " + std::to_string(n) +
                              " feature rows",
                          edge_path, lineno);
        }
      }
    }
  }
  std::vector<int> labels;
  if (label_path) labels = read_labels(*label_path, n);
  return Graph(n, edges, std::move(features), std::move(labels));
}

// ------------------------------------------------------------------- splits

std::vector<Edge> sample_non_edges(const Graph& g, std::size_t count, Rng& rng,
                                   std::span<const Edge> exclude) {
  const std::size_t n = g.num_nodes();
  const std::uint64_t pairs = static_cast<std::uint64_t>(n) * (n - (n > 0)) / 2;
  std::unordered_set<std::uint64_t> taken;
  for (const Edge& e : exclude) taken.insert(pair_key(e.u, e.v, n));
  if (n < 2 || count + g.num_edges() + taken.size() > pairs) {
    // Conservative capacity check; exact availability may be slightly larger.
    std::uint64_t available = pairs - g.num_edges();
    for (std::uint64_t key : taken) {
      const std::size_t u = key / n, v = key % n;
      if (u != v && !g.has_edge(u, v)) --available;
    }
    if (n < 2 || count > available) {
      throw DataError("graph has too few non-edges to sample " + std::to_string(count));
    }
  }
  std::vector<Edge> out;
  out.reserve(count);
  while (out.size() < count) {
    std::size_t u = uniform_index(rng, n);
    std::size_t v = uniform_index(rng, n);
    if (u == v || g.has_edge(u, v)) continue;
    if (u > v) std::swap(u, v);
    if (!taken.insert(pair_key(u, v, n)).second) continue;
    out.push_back({u, v});
  }
  return out;
}

EdgeSplit make_lp_split(const Graph& g, double val_frac, double test_frac, std::uint64_t seed) {
  if (!(val_frac > 0 && val_frac < 1 && test_frac > 0 && test_frac < 1) ||
      val_frac + test_frac >= 1) {
    throw std::invalid_argument("split fractions must lie in (0, 1) and sum to less than 1");
  }
  std::vector<Edge> edges = g.edges();
  const std::size_t n_val = count_from_frac(val_frac, edges.size());
  const std::size_t n_test = count_from_frac(test_frac, edges.size());
  if (n_val == 0 || n_test == 0 || n_val + n_test >= edges.size()) {
    throw DataError("graph with " + std::to_string(edges.size()) +
                    " edges is too small for the requested split fractions");
  }
  Rng rng(seed);
  std::shuffle(edges.begin(), edges.end(), rng);

  EdgeSplit split;
  split.seed = seed;
  split.val_pos.assign(edges.begin(), edges.begin() + n_val);
  split.test_pos.assign(edges.begin() + n_val, edges.begin() + n_val + n_test);
  split.train_pos.assign(edges.begin() + n_val + n_test, edges.end());
  std::vector<Edge> neg = sample_non_edges(g, n_val + n_test, rng);
  split.val_neg.assign(neg.begin(), neg.begin() + n_val);
  split.test_neg.assign(neg.begin() + n_val, neg.end());
  for (auto* v : {&split.train_pos, &split.val_pos, &split.test_pos, &split.val_neg, &split.test_neg}) {
    std::sort(v->begin(), v->end());
  }
  return split;
}

NodeSplit make_nc_split(const Graph& g, double train_frac, double val_frac, std::uint64_t seed) {
  if (!g.has_labels()) throw DataError("node classification needs labels");
  if (!(train_frac > 0 && val_frac > 0 && train_frac + val_frac < 1)) {
    throw std::invalid_argument("node split fractions must be positive and sum to less than 1");
  }
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    if (g.labels()[i] != kUnlabeled) by_class[g.labels()[i]].push_back(i);
  }
  Rng rng(seed);
  NodeSplit split;
  for (auto& [cls, nodes] : by_class) {
    std::shuffle(nodes.begin(), nodes.end(), rng);
    const std::size_t n_train = count_from_frac(train_frac, nodes.size());
    const std::size_t n_val = count_from_frac(val_frac, nodes.size());
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      if (k < n_train) split.train.push_back(nodes[k]);
      else if (k < n_train + n_val) split.val.push_back(nodes[k]);
      else split.test.push_back(nodes[k]);
    }
  }
  for (auto* v : {&split.train, &split.val, &split.test}) std::sort(v->begin(), v->end());
  if (split.train.empty() || split.val.empty() || split.test.empty()) {
    throw DataError("too few labeled nodes for the node split");
  }
  return split;
}

// ------------------------------------------------------------ shortest paths

std::vector<std::uint32_t> hop_distances(const Graph& g, std::size_t source) {
  if (source >= g.num_nodes()) throw std::out_of_range("source node out of range");
  std::vector<std::uint32_t> dist(g.num_nodes(), kUnreachable);
  std::deque<std::size_t> queue{source};
  dist[source] = 0;
  while (!queue.empty()) {
    const std::size_t u = queue.front();
    queue.pop_front();
    for (std::size_t v : g.neighbors(u)) {
      if (dist[v] == kUnreachable) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
    }
  }
  return dist;
}

ShortestPathTree shortest_path_tree(const Graph& g, std::size_t source) {
  ShortestPathTree tree;
  tree.hops = hop_distances(g, source);
  const std::size_t n = g.num_nodes();
  tree.parent.assign(n, n);
  for (std::size_t v = 0; v < n; ++v) {
    if (tree.hops[v] == kUnreachable) continue;
    tree.order.push_back(v);
    if (v == source) {
      tree.parent[v] = v;
      continue;
    }
    // Neighbor lists are sorted, so the first hit is the smallest id.
    for (std::size_t u : g.neighbors(v)) {
      if (tree.hops[u] + 1 == tree.hops[v]) {
        tree.parent[v] = u;
        break;
      }
    }
  }
  std::stable_sort(tree.order.begin(), tree.order.end(),
                   [&](std::size_t a, std::size_t b) { return tree.hops[a] < tree.hops[b]; });
  return tree;
}

std::vector<double> hyperbolic_graph_distances_from(const Graph& g, const Tensor& embeddings,
                                                    Curvature k, std::size_t source) {
  if (embeddings.rows() != g.num_nodes()) {
    throw std::invalid_argument("embedding rows do not match node count");
  }
  const ShortestPathTree tree = shortest_path_tree(g, source);
  std::vector<double> out(g.num_nodes(), std::numeric_limits<double>::infinity());
  for (std::size_t v : tree.order) {
    if (v == source) {
      out[v] = 0.0;
      continue;
    }
    const std::size_t p = tree.parent[v];
    out[v] = out[p] + manifold::distance_unchecked(embeddings.row(p), embeddings.row(v), k);
  }
  return out;
}

std::optional<double> hyperbolic_graph_distance(const Graph& g, const Tensor& embeddings,
                                                Curvature k, std::size_t i, std::size_t j) {
  if (i >= g.num_nodes() || j >= g.num_nodes()) throw std::out_of_range("node out of range");
  const double d = hyperbolic_graph_distances_from(g, embeddings, k, i)[j];
  if (!std::isfinite(d)) return std::nullopt;
  return d;
}

std::vector<std::size_t> largest_component(const Graph& g) {
  const std::size_t n = g.num_nodes();
  std::vector<std::size_t> comp(n, n);
  std::vector<std::size_t> best;
  for (std::size_t s = 0; s < n; ++s) {
    if (comp[s] != n) continue;
    std::vector<std::size_t> members{s};
    comp[s] = s;
    for (std::size_t head = 0; head < members.size(); ++head) {
      for (std::size_t v : g.neighbors(members[head])) {
        if (comp[v] == n) {
          comp[v] = s;
          members.push_back(v);
        }
      }
    }
    if (members.size() > best.size()) best = std::move(members);
  }
  std::sort(best.begin(), best.end());
  return best;
}

Graph induced_subgraph(const Graph& g, std::span<const std::size_t> nodes) {
  std::vector<std::size_t> index(g.num_nodes(), g.num_nodes());
  for (std::size_t k = 0; k < nodes.size(); ++k) index[nodes[k]] = k;
  std::vector<Edge> edges;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    for (std::size_t v : g.neighbors(nodes[k])) {
      if (index[v] != g.num_nodes() && k < index[v]) edges.push_back({k, index[v]});
    }
  }
  Tensor features = Tensor::matrix(nodes.size(), g.feature_dim());
  std::vector<int> labels;
  if (g.has_labels()) labels.resize(nodes.size());
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    std::copy(g.features().row(nodes[k]).begin(), g.features().row(nodes[k]).end(),
              features.row(k).begin());
    if (g.has_labels()) labels[k] = g.labels()[nodes[k]];
  }
  return Graph(nodes.size(), edges, std::move(features), std::move(labels));
}

// ----------------------------------------------------------- hyperbolicity

namespace {

// Twice the four-point delta of one quadruple: largest pair sum minus the
// second largest.
inline std::uint64_t twice_delta(std::uint64_t s1, std::uint64_t s2, std::uint64_t s3) {
  if (s1 < s2) std::swap(s1, s2);
  if (s2 < s3) std::swap(s2, s3);
  if (s1 < s2) std::swap(s1, s2);
  return s1 - s2;
}

}  // namespace

DeltaResult gromov_delta(const Graph& g, DeltaMode mode, std::size_t n_samples, std::uint64_t seed) {
  std::vector<std::size_t> comp = largest_component(g);
  if (comp.size() < 4) {
    throw std::invalid_argument("gromov delta needs a connected component with at least 4 nodes");
  }
  if (comp.size() != g.num_nodes()) {
    spdlog::info("graph is disconnected; using the largest component ({} of {} nodes)",
                 comp.size(), g.num_nodes());
  }
  const Graph sub = induced_subgraph(g, comp);
  const std::size_t n = sub.num_nodes();

  DeltaResult result;
  result.component_size = n;
  std::uint64_t best = 0;

  constexpr std::size_t kMatrixLimit = 4000;
  if (mode == DeltaMode::kExact || n <= kMatrixLimit) {
    std::vector<std::uint32_t> dist(n * n);
    for (std::size_t s = 0; s < n; ++s) {
      const auto h = hop_distances(sub, s);
      std::copy(h.begin(), h.end(), dist.begin() + s * n);
    }
    auto d = [&](std::size_t a, std::size_t b) -> std::uint64_t { return dist[a * n + b]; };
    if (mode == DeltaMode::kExact) {
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b) {
          const std::uint64_t dab = d(a, b);
          for (std::size_t c = b + 1; c < n; ++c) {
            const std::uint64_t dac = d(a, c), dbc = d(b, c);
            for (std::size_t e = c + 1; e < n; ++e) {
              best = std::max(best, twice_delta(dab + d(c, e), dac + d(b, e), d(a, e) + dbc));
            }
          }
        }
      result.quadruples = static_cast<std::uint64_t>(n) * (n - 1) * (n - 2) * (n - 3) / 24;
    } else {
      Rng rng(seed);
      for (std::size_t s = 0; s < n_samples; ++s) {
        std::size_t q[4];
        for (int k = 0; k < 4; ++k) {
          bool fresh;
          do {
            q[k] = uniform_index(rng, n);
            fresh = std::find(q, q + k, q[k]) == q + k;
          } while (!fresh);
        }
        best = std::max(best, twice_delta(d(q[0], q[1]) + d(q[2], q[3]),
                                          d(q[0], q[2]) + d(q[1], q[3]),
                                          d(q[0], q[3]) + d(q[1], q[2])));
      }
      result.quadruples = n_samples;
      result.lower_bound = true;
    }
  } else {
    // Large graphs: three BFS runs per sampled quadruple cover its six pairs.
    Rng rng(seed);
    for (std::size_t s = 0; s < n_samples; ++s) {
      std::size_t q[4];
      for (int k = 0; k < 4; ++k) {
        bool fresh;
        do {
          q[k] = uniform_index(rng, n);
          fresh = std::find(q, q + k, q[k]) == q + k;
        } while (!fresh);
      }
      const auto h0 = hop_distances(sub, q[0]);
      const auto h1 = hop_distances(sub, q[1]);
      const auto h2 = hop_distances(sub, q[2]);
      best = std::max(best, twice_delta(std::uint64_t{h0[q[1]]} + h2[q[3]],
                                        std::uint64_t{h0[q[2]]} + h1[q[3]],
                                        std::uint64_t{h0[q[3]]} + h1[q[2]]));
    }
    result.quadruples = n_samples;
    result.lower_bound = true;
  }
  result.delta = static_cast<double>(best) / 2.0;
  return result;
}

// ---------------------------------------------------------------------- rng

std::string serialize_rng(const Rng& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

Rng deserialize_rng(const std::string& state) {
  Rng rng;
  std::istringstream in(state);
  in >> rng;
  if (!in) throw DataError("corrupt random generator state");
  return rng;
}

}  // namespace hypercurv
