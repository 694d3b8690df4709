#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <stdexcept>
#include <string>

#include "hypercurv/graph.hpp"
#include "hypercurv/synthetic.hpp"
#include "oracles.hpp"

using namespace hypercurv;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("hc_graph_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string write(const std::string& name, const std::string& text) const {
    const fs::path p = path / name;
    std::ofstream(p) << text;
    return p.string();
  }
};

Graph path_graph(std::size_t n) {
  std::vector<Edge> e;
  for (std::size_t i = 0; i + 1 < n; ++i) e.push_back({i, i + 1});
  return Graph(n, e);
}

std::set<std::pair<std::size_t, std::size_t>> as_set(const std::vector<Edge>& edges) {
  std::set<std::pair<std::size_t, std::size_t>> s;
  for (const Edge& e : edges) s.insert({std::min(e.u, e.v), std::max(e.u, e.v)});
  return s;
}

}  // namespace

TEST_CASE("graph construction normalizes edges") {
  const std::vector<Edge> e{{0, 1}, {1, 0}, {2, 2}, {1, 2}, {2, 1}};
  const Graph g(4, e);
  CHECK(g.num_nodes() == 4);
  CHECK(g.num_edges() == 2);
  CHECK(g.degree(3) == 0);
  CHECK(g.has_edge(1, 0));
  CHECK_FALSE(g.has_edge(2, 2));
  const auto n1 = g.neighbors(1);
  CHECK(std::is_sorted(n1.begin(), n1.end()));
  CHECK_THROWS_AS(Graph(2, std::vector<Edge>{{0, 5}}), DataError);
}

TEST_CASE("ingestion") {
  TempDir dir;
  SUBCASE("tab separated edges with comments and dedup") {
    const auto ep = dir.write("e.tsv", "# header\n0\t1\n1\t0\n\n2\t1  # trailing\n");
    const auto fp = dir.write("f.csv", "1,0\n0,1\n1,1\n0,0\n");
    const Graph g = load_graph(ep, fp);
    CHECK(g.num_nodes() == 4);
    CHECK(g.num_edges() == 2);
    CHECK(g.feature_dim() == 2);
    CHECK(g.degree(3) == 0);
  }
  SUBCASE("empty edge file with features gives isolated nodes") {
    const auto ep = dir.write("e.tsv", "");
    const auto fp = dir.write("f.csv", "1,2,3\n4,5,6\n7,8,9\n");
    const Graph g = load_graph(ep, fp);
    CHECK(g.num_nodes() == 3);
    CHECK(g.num_edges() == 0);
  }
  SUBCASE("JSON feature manifest") {
    const auto fp = dir.write("f.json", R"({"n": 2, "f": 3, "rows": [[1,2,3],[4,5,6]]})");
    const Tensor f = read_features(fp);
    CHECK(f.rows() == 2);
    CHECK(f.cols() == 3);
    CHECK(f(1, 2) == 6.0);
    const auto bad = dir.write("g.json", R"({"n": 3, "f": 3, "rows": [[1,2,3],[4,5,6]]})");
    CHECK_THROWS_AS(read_features(bad), DataError);
  }
  SUBCASE("labels") {
    const auto ep = dir.write("e.tsv", "0\t1\n1\t2\n");
    const auto lp = dir.write("l.csv", "0,1\n2,0\n0,1\n");
    const Graph g = load_graph(ep, std::nullopt, lp);
    CHECK(g.labels() == std::vector<int>{1, kUnlabeled, 0});
    CHECK(g.num_classes() == 2);
  }
  SUBCASE("parse errors carry the line number") {
    const auto ep = dir.write("e.tsv", "0\t1\n1\tx\n");
    try {
      read_edge_list(ep);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(e.line() == 2);
      CHECK(std::string(e.what()).find(":2:") != std::string::npos);
    }
    const auto three = dir.write("t.tsv", "0 1 2\n");
    CHECK_THROWS_AS(read_edge_list(three), DataError);
  }
  SUBCASE("out-of-range edge id reports its line") {
    const auto ep = dir.write("e.tsv", "0\t1\n# c\n1\t9\n");
    const auto fp = dir.write("f.csv", "1\n2\n3\n");
    try {
      load_graph(ep, fp);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(e.line() == 3);
    }
  }
  SUBCASE("conflicting labels report their line") {
    const auto ep = dir.write("e.tsv", "0\t1\n");
    const auto lp = dir.write("l.csv", "0,1\n1,0\n0,2\n");
    try {
      load_graph(ep, std::nullopt, lp);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(e.line() == 3);
    }
  }
  SUBCASE("ragged and non-finite features") {
    CHECK_THROWS_AS(read_features(dir.write("r.csv", "1,2\n3\n")), DataError);
    CHECK_THROWS_AS(read_features(dir.write("n.csv", "1,nan\n")), DataError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(read_edge_list((dir.path / "nope").string()), DataError); }
}

TEST_CASE("link prediction split") {
  const Graph g = oracle::random_graph(120, 0.14, 3);
  REQUIRE(g.num_edges() > 900);
  const EdgeSplit a = make_lp_split(g, 0.05, 0.10, 42);
  const EdgeSplit b = make_lp_split(g, 0.05, 0.10, 42);

  CHECK(a.val_pos == b.val_pos);
  CHECK(a.test_neg == b.test_neg);
  CHECK(a.train_pos == b.train_pos);

  const std::size_t E = g.num_edges();
  CHECK(a.val_pos.size() == static_cast<std::size_t>(0.05 * E + 1e-9));
  CHECK(a.test_pos.size() == static_cast<std::size_t>(0.10 * E + 1e-9));
  CHECK(a.val_pos.size() + a.test_pos.size() + a.train_pos.size() == E);
  CHECK(a.val_neg.size() == a.val_pos.size());
  CHECK(a.test_neg.size() == a.test_pos.size());

  const auto tr = as_set(a.train_pos), va = as_set(a.val_pos), te = as_set(a.test_pos);
  for (const auto& e : va) CHECK((tr.count(e) == 0 && te.count(e) == 0));
  for (const auto& e : te) CHECK(tr.count(e) == 0);

  std::set<std::pair<std::size_t, std::size_t>> negs;
  for (const auto* v : {&a.val_neg, &a.test_neg})
    for (const Edge& e : *v) {
      CHECK(e.u != e.v);
      CHECK_FALSE(g.has_edge(e.u, e.v));
      negs.insert({std::min(e.u, e.v), std::max(e.u, e.v)});
    }
  CHECK(negs.size() == a.val_neg.size() + a.test_neg.size());

  const EdgeSplit c = make_lp_split(g, 0.05, 0.10, 43);
  CHECK(c.val_pos != a.val_pos);

  CHECK_THROWS(make_lp_split(path_graph(5), 0.05, 0.10, 1));
  CHECK_THROWS(make_lp_split(g, 0.6, 0.5, 1));
}

TEST_CASE("1000-edge split sizes") {
  std::vector<Edge> e;
  for (std::size_t i = 0; i < 1000; ++i) e.push_back({i, i + 1});
  const Graph g(1001, e);
  const EdgeSplit s = make_lp_split(g, 0.05, 0.10, 0);
  CHECK(s.val_pos.size() == 50);
  CHECK(s.test_pos.size() == 100);
}

TEST_CASE("node split is stratified and disjoint") {
  std::vector<int> labels(200);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % 5 == 0 ? kUnlabeled : static_cast<int>(i % 3);
  const Graph g(200, std::vector<Edge>{{0, 1}}, Tensor{}, labels);
  const NodeSplit s = make_nc_split(g, 0.7, 0.15, 9);
  std::set<std::size_t> seen;
  for (const auto* part : {&s.train, &s.val, &s.test})
    for (std::size_t n : *part) {
      CHECK(seen.insert(n).second);
      CHECK(labels[n] != kUnlabeled);
    }
  CHECK(seen.size() == 160);
  for (int cls = 0; cls < 3; ++cls) {
    const auto in_train = std::count_if(s.train.begin(), s.train.end(), [&](std::size_t n) { return labels[n] == cls; });
    const auto total = std::count(labels.begin(), labels.end(), cls);
    CHECK(in_train == static_cast<long>(0.7 * total + 1e-9));
  }
  const NodeSplit t = make_nc_split(g, 0.7, 0.15, 9);
  CHECK(s.val == t.val);
}

TEST_CASE("hop distances") {
  const Graph p = path_graph(3);
  const auto d = hop_distances(p, 0);
  CHECK(d[0] == 0);
  CHECK(d[2] == 2);

  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const std::size_t n = 40 + 30 * seed;
    const Graph g = oracle::random_graph(n, 2.0 / n, seed);
    const auto fw = oracle::floyd_warshall(g);
    for (std::size_t s = 0; s < n; ++s) {
      const auto bfs = hop_distances(g, s);
      for (std::size_t t = 0; t < n; ++t) {
        if (fw[s][t] >= oracle::kInf) CHECK(bfs[t] == kUnreachable);
        else CHECK(bfs[t] == static_cast<std::uint32_t>(fw[s][t]));
      }
    }
  }
}

TEST_CASE("hyperbolic graph distance") {
  const Curvature k(1.0);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto random_emb = [&](std::size_t n) {
    Tensor e = Tensor::matrix(n, 2);
    for (double& v : e.values()) v = u(rng);
    return manifold::to_hyperboloid_rows(e, k);
  };

  SUBCASE("adjacent pair and two hops") {
    const Graph p = path_graph(3);
    const Tensor emb = random_emb(3);
    CHECK(*hyperbolic_graph_distance(p, emb, k, 0, 1) ==
          doctest::Approx(manifold::distance(emb.row(0), emb.row(1), k)));
    CHECK(*hyperbolic_graph_distance(p, emb, k, 0, 2) ==
          doctest::Approx(manifold::distance(emb.row(0), emb.row(1), k) +
                          manifold::distance(emb.row(1), emb.row(2), k)));
  }
  SUBCASE("tree paths match enumeration of all paths") {
    const Graph tree(6, std::vector<Edge>{{0, 1}, {0, 2}, {1, 3}, {1, 4}, {2, 5}});
    const Tensor emb = random_emb(6);
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 6; ++j) {
        if (i == j) continue;
        const auto paths = oracle::all_simple_path_lengths(tree, emb, 1.0, i, j);
        REQUIRE(paths.size() == 1);
        CHECK(*hyperbolic_graph_distance(tree, emb, k, i, j) == doctest::Approx(paths[0]).epsilon(1e-12));
      }
  }
  SUBCASE("smallest-id predecessor tie break") {
    const Graph sq(4, std::vector<Edge>{{0, 1}, {0, 2}, {1, 3}, {2, 3}});
    const Tensor emb = random_emb(4);
    const auto hops = oracle::floyd_warshall(sq);
    CHECK(*hyperbolic_graph_distance(sq, emb, k, 0, 3) ==
          doctest::Approx(oracle::path_sum(hops, sq, emb, 1.0, 0, 3)).epsilon(1e-12));
  }
  SUBCASE("disconnected pair") {
    const Graph g(4, std::vector<Edge>{{0, 1}, {2, 3}});
    CHECK_FALSE(hyperbolic_graph_distance(g, random_emb(4), k, 0, 3).has_value());
  }
}

TEST_CASE("Gromov delta") {
  SUBCASE("trees are 0-hyperbolic") {
    for (std::size_t depth : {2, 3, 5}) {
      const Graph t = synthetic::balanced_binary_tree(depth);
      CHECK(gromov_delta(t, DeltaMode::kExact).delta == 0.0);
    }
    const Graph star(7, std::vector<Edge>{{0, 1}, {0, 2}, {0, 3}, {0, 4}, {0, 5}, {0, 6}});
    CHECK(gromov_delta(star, DeltaMode::kExact).delta == 0.0);
  }
  SUBCASE("4-cycle") { CHECK(gromov_delta(synthetic::cycle(4), DeltaMode::kExact).delta == 1.0); }
  SUBCASE("exact matches brute force") {
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
      const std::size_t n = 8 + 4 * seed;
      const Graph g = oracle::random_graph(n, 3.0 / n + 0.05, 100 + seed);
      const auto comp = largest_component(g);
      if (comp.size() < 4) continue;
      const Graph sub = induced_subgraph(g, comp);
      CAPTURE(n);
      CHECK(gromov_delta(g, DeltaMode::kExact).delta == oracle::gromov_delta_brute(sub));
    }
  }
  SUBCASE("sampled is a lower bound") {
    const Graph g = oracle::random_graph(60, 0.08, 7);
    const DeltaResult exact = gromov_delta(g, DeltaMode::kExact);
    const DeltaResult sampled = gromov_delta(g, DeltaMode::kSampled, 500, 3);
    CHECK(sampled.lower_bound);
    CHECK(sampled.quadruples == 500);
    CHECK(sampled.delta <= exact.delta);
  }
  SUBCASE("fewer than four nodes") { CHECK_THROWS_AS(gromov_delta(path_graph(3), DeltaMode::kExact), std::invalid_argument); }
}

TEST_CASE("rng state round trip") {
  Rng a(17);
  a.discard(5);
  Rng b = deserialize_rng(serialize_rng(a));
  CHECK(a() == b());
  CHECK_THROWS_AS(deserialize_rng("garbage"), DataError);
}
