#include "hypercurv/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>

#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include "hypercurv/curvature.hpp"
#include "hypercurv/metrics.hpp"

namespace hypercurv::runner {

using nlohmann::json;

namespace {

// Stream ids for derive_seed.
enum : std::uint64_t { kSplitStream = 0, kInitStream, kDropoutStream, kNegativeStream, kPolicyStream, kKappaStream };

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("invalid configuration: " + what);
}

json tensor_to_json(const Tensor& t) { return json{{"shape", t.shape()}, {"data", t.values()}}; }

Tensor tensor_from_json(const json& j) {
  return Tensor(j.at("shape").get<std::vector<std::size_t>>(), j.at("data").get<std::vector<double>>());
}

std::string task_name(hgnn::Task t) { return t == hgnn::Task::kLinkPrediction ? "lp" : "nc"; }

hgnn::Task task_from_name(const std::string& s) {
  if (s == "lp") return hgnn::Task::kLinkPrediction;
  if (s == "nc") return hgnn::Task::kNodeClassification;
  throw std::invalid_argument("unknown task '" + s + "' (expected lp or nc)");
}

bool all_finite(const hgnn::ModelParams& p) {
  for (const Tensor* t : p.tensors())
    if (!t->all_finite()) return false;
  return true;
}

hgnn::ForwardResult forward_eval(ad::Tape& tape, const Dataset& data, const hgnn::MessageGraph& mg,
                                 const hgnn::ModelParams& params, std::span<const double> zetas,
                                 const hgnn::ModelConfig& model) {
  const hgnn::BoundParams bp = hgnn::bind(tape, params);
  return hgnn::model_forward(tape, mg, data.train_graph.features(), bp, zetas, model, nullptr);
}

double lp_auc(const Tensor& emb, std::span<const Edge> pos, std::span<const Edge> neg, double zeta,
              const hgnn::ModelConfig& model) {
  std::vector<double> scores = hgnn::edge_probabilities(emb, pos, zeta, model.fd_r, model.fd_t);
  const std::vector<double> neg_scores = hgnn::edge_probabilities(emb, neg, zeta, model.fd_r, model.fd_t);
  scores.insert(scores.end(), neg_scores.begin(), neg_scores.end());
  std::vector<int> labels(pos.size(), 1);
  labels.resize(pos.size() + neg.size(), 0);
  return metrics::roc_auc(scores, labels);
}

double nc_f1(const Tensor& logits, std::span<const std::size_t> nodes, std::span<const int> labels) {
  std::vector<int> pred, truth;
  for (std::size_t i : nodes) {
    const auto row = logits.row(i);
    pred.push_back(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
    truth.push_back(labels[i]);
  }
  return metrics::micro_f1(pred, truth);
}

// Metric of eval-mode outputs on one split.
double split_metric(const Dataset& data, const hgnn::ModelParams& params, std::span<const double> zetas,
                    const hgnn::ModelConfig& model, std::span<const Edge> pos, std::span<const Edge> neg,
                    std::span<const std::size_t> nodes) {
  const hgnn::MessageGraph mg = hgnn::message_graph(data.train_graph);
  ad::Tape tape(false);
  const hgnn::BoundParams bp = hgnn::bind(tape, params);
  const hgnn::ForwardResult fwd =
      hgnn::model_forward(tape, mg, data.train_graph.features(), bp, zetas, model, nullptr);
  if (data.task == hgnn::Task::kLinkPrediction) {
    return lp_auc(fwd.embeddings.value(), pos, neg, zetas.back(), model);
  }
  const ad::Var logits = hgnn::nc_logits(fwd.embeddings, zetas.back(), bp.cls_w, bp.cls_b);
  return nc_f1(logits.value(), nodes, data.full.labels());
}

std::string fmt_action(const std::optional<marl::ActionPair>& a, bool hgnn) {
  if (!a) return "NONE";
  return hgnn ? marl::to_string(a->hgnn) : marl::to_string(a->ace);
}

}  // namespace

// ------------------------------------------------------------------ config

void RunConfig::validate() const {
  require(model.n_layers >= 1, "layers must be >= 1");
  require(model.dim >= 1, "dim must be >= 1");
  require(model.dropout >= 0.0 && model.dropout < 1.0, "dropout must lie in [0, 1)");
  require(model.fd_t > 0.0, "Fermi-Dirac t must be positive");
  require(adam.lr > 0.0 && std::isfinite(adam.lr), "lr must be positive");
  require(adam.weight_decay >= 0.0, "weight decay must be nonnegative");
  require(epochs >= 1, "epochs must be >= 1");
  require(val_frac > 0.0 && test_frac > 0.0 && val_frac + test_frac < 1.0,
          "val/test fractions must be positive and sum to less than 1");
  require(nc_train_frac > 0.0 && nc_val_frac > 0.0 && nc_train_frac + nc_val_frac < 1.0,
          "node split fractions must be positive and sum to less than 1");
  require(bounds.min > 0.0 && bounds.min < bounds.max, "curvature bounds must satisfy 0 < min < max");
  require(zeta0 >= bounds.min && zeta0 <= bounds.max, "zeta0 must lie within the curvature bounds");
  require(gamma >= 0.0 && gamma <= 1.0, "gamma must lie in [0, 1]");
  require(alpha > 0.0 && alpha <= 1.0, "alpha must lie in (0, 1]");
  require(beta >= 0.0 && beta < 1.0, "beta must lie in [0, 1)");
  require(epsilon.start >= 0.0 && epsilon.start <= 1.0, "epsilon start must lie in [0, 1]");
  require(epsilon.floor >= 0.0 && epsilon.floor <= 1.0, "epsilon floor must lie in [0, 1]");
  require(epsilon.decay > 0.0 && epsilon.decay <= 1.0, "epsilon decay must lie in (0, 1]");
  require(bin_width > 0.0, "bin width must be positive");
  require(rl_patience >= 1, "rl patience must be >= 1");
  require(kappa_samples >= 1, "kappa samples must be >= 1");
}

json to_json(const RunConfig& c) {
  return json{{"task", task_name(c.model.task)},
              {"layers", c.model.n_layers},
              {"dim", c.model.dim},
              {"dropout", c.model.dropout},
              {"fd_r", c.model.fd_r},
              {"fd_t", c.model.fd_t},
              {"lr", c.adam.lr},
              {"weight_decay", c.adam.weight_decay},
              {"epochs", c.epochs},
              {"early_stop_patience", c.early_stop_patience},
              {"seed", c.seed},
              {"val_frac", c.val_frac},
              {"test_frac", c.test_frac},
              {"nc_train_frac", c.nc_train_frac},
              {"nc_val_frac", c.nc_val_frac},
              {"rl", c.rl_enabled},
              {"zeta0", c.zeta0},
              {"zeta_min", c.bounds.min},
              {"zeta_max", c.bounds.max},
              {"gamma", c.gamma},
              {"alpha", c.alpha},
              {"beta", c.beta},
              {"eps_start", c.epsilon.start},
              {"eps_decay", c.epsilon.decay},
              {"eps_min", c.epsilon.floor},
              {"bin_width", c.bin_width},
              {"rl_patience", c.rl_patience},
              {"kappa_samples", c.kappa_samples},
              {"distortion_every", c.distortion_every},
              {"record_wall_time", c.record_wall_time}};
}

RunConfig run_config_from_json(const json& j, RunConfig c) {
  for (const auto& [key, value] : j.items()) {
    if (key == "task") c.model.task = task_from_name(value.get<std::string>());
    else if (key == "layers") c.model.n_layers = value.get<std::size_t>();
    else if (key == "dim") c.model.dim = value.get<std::size_t>();
    else if (key == "dropout") c.model.dropout = value.get<double>();
    else if (key == "fd_r") c.model.fd_r = value.get<double>();
    else if (key == "fd_t") c.model.fd_t = value.get<double>();
    else if (key == "lr") c.adam.lr = value.get<double>();
    else if (key == "weight_decay") c.adam.weight_decay = value.get<double>();
    else if (key == "epochs") c.epochs = value.get<std::size_t>();
    else if (key == "early_stop_patience") c.early_stop_patience = value.get<std::size_t>();
    else if (key == "seed") c.seed = value.get<std::uint64_t>();
    else if (key == "val_frac") c.val_frac = value.get<double>();
    else if (key == "test_frac") c.test_frac = value.get<double>();
    else if (key == "nc_train_frac") c.nc_train_frac = value.get<double>();
    else if (key == "nc_val_frac") c.nc_val_frac = value.get<double>();
    else if (key == "rl") c.rl_enabled = value.get<bool>();
    else if (key == "zeta0") c.zeta0 = value.get<double>();
    else if (key == "zeta_min") c.bounds.min = value.get<double>();
    else if (key == "zeta_max") c.bounds.max = value.get<double>();
    else if (key == "gamma") c.gamma = value.get<double>();
    else if (key == "alpha") c.alpha = value.get<double>();
    else if (key == "beta") c.beta = value.get<double>();
    else if (key == "eps_start") c.epsilon.start = value.get<double>();
    else if (key == "eps_decay") c.epsilon.decay = value.get<double>();
    else if (key == "eps_min") c.epsilon.floor = value.get<double>();
    else if (key == "bin_width") c.bin_width = value.get<double>();
    else if (key == "rl_patience") c.rl_patience = value.get<std::size_t>();
    else if (key == "kappa_samples") c.kappa_samples = value.get<std::size_t>();
    else if (key == "distortion_every") c.distortion_every = value.get<std::size_t>();
    else if (key == "record_wall_time") c.record_wall_time = value.get<bool>();
    else throw std::invalid_argument("unknown configuration key '" + key + "'");
  }
  return c;
}

json to_json(const EpochRecord& r) {
  json j{{"epoch", r.epoch},
         {"train_loss", r.train_loss},
         {"val_metric", r.val_metric},
         {"test_metric", nullptr},
         {"zetas", r.zetas},
         {"zetas_ace", r.zetas_ace},
         {"action_hgnn", r.action ? json(marl::to_string(r.action->hgnn)) : json(nullptr)},
         {"action_ace", r.action ? json(marl::to_string(r.action->ace)) : json(nullptr)},
         {"r_hgnn", r.r_hgnn},
         {"r_ace", r.r_ace},
         {"rl_active", r.rl_active},
         {"distortion", r.distortion ? json(*r.distortion) : json(nullptr)}};
  if (r.wall_ms) j["wall_ms"] = *r.wall_ms;
  return j;
}

// -------------------------------------------------------------- checkpoint

json to_json(const Checkpoint& c) {
  const TrainState& s = c.state;
  json layers = json::array();
  for (const auto& l : s.params.layers) {
    layers.push_back({{"W", tensor_to_json(l.W)},
                      {"b", tensor_to_json(l.b)},
                      {"att_w1", tensor_to_json(l.att_w1)},
                      {"att_b1", tensor_to_json(l.att_b1)},
                      {"att_w2", tensor_to_json(l.att_w2)}});
  }
  json params{{"layers", layers}};
  if (!s.params.cls_w.empty()) {
    params["cls_w"] = tensor_to_json(s.params.cls_w);
    params["cls_b"] = tensor_to_json(s.params.cls_b);
  }
  json m = json::array(), v = json::array();
  for (const Tensor& t : s.adam.m) m.push_back(tensor_to_json(t));
  for (const Tensor& t : s.adam.v) v.push_back(tensor_to_json(t));
  json q = json::array();
  for (const auto& [state, values] : s.q.entries()) q.push_back({{"state", state.bins}, {"values", values}});
  json history = json::array();
  for (const auto& h : s.history) {
    history.push_back({{"state", h.state.bins},
                       {"hgnn", static_cast<int>(h.greedy.hgnn)},
                       {"ace", static_cast<int>(h.greedy.ace)}});
  }
  return json{{"format", "hypercurv-checkpoint"},
              {"version", Checkpoint::kVersion},
              {"config", to_json(c.config)},
              {"best_val_metric", c.best_val_metric},
              {"best_epoch", c.best_epoch},
              {"state",
               {{"params", params},
                {"adam", {{"m", m}, {"v", v}, {"step", s.adam.step}}},
                {"zetas", s.zetas},
                {"zetas_ace", s.zetas_ace},
                {"q", q},
                {"history", history},
                {"rl_active", s.rl_active},
                {"prev_metric", s.prev_metric},
                {"epoch", s.epoch},
                {"rng",
                 {{"dropout", serialize_rng(s.rng_dropout)},
                  {"negatives", serialize_rng(s.rng_negatives)},
                  {"policy", serialize_rng(s.rng_policy)}}}}}};
}

Checkpoint checkpoint_from_json(const json& j) {
  if (j.value("format", "") != "hypercurv-checkpoint") throw DataError("not a hypercurv checkpoint");
  if (j.at("version").get<int>() != Checkpoint::kVersion) {
    throw DataError("unsupported checkpoint version " + j.at("version").dump());
  }
  Checkpoint c;
  c.config = run_config_from_json(j.at("config"));
  c.best_val_metric = j.at("best_val_metric").get<double>();
  c.best_epoch = j.at("best_epoch").get<std::size_t>();
  const json& s = j.at("state");
  TrainState& st = c.state;
  for (const json& l : s.at("params").at("layers")) {
    st.params.layers.push_back({tensor_from_json(l.at("W")), tensor_from_json(l.at("b")),
                                tensor_from_json(l.at("att_w1")), tensor_from_json(l.at("att_b1")),
                                tensor_from_json(l.at("att_w2"))});
  }
  if (s.at("params").contains("cls_w")) {
    st.params.cls_w = tensor_from_json(s.at("params").at("cls_w"));
    st.params.cls_b = tensor_from_json(s.at("params").at("cls_b"));
  }
  for (const json& t : s.at("adam").at("m")) st.adam.m.push_back(tensor_from_json(t));
  for (const json& t : s.at("adam").at("v")) st.adam.v.push_back(tensor_from_json(t));
  st.adam.step = s.at("adam").at("step").get<std::uint64_t>();
  st.zetas = s.at("zetas").get<std::vector<double>>();
  st.zetas_ace = s.at("zetas_ace").get<std::vector<double>>();
  std::map<marl::QState, std::array<double, 8>> table;
  for (const json& e : s.at("q")) {
    table[marl::QState{e.at("state").get<std::vector<int>>()}] = e.at("values").get<std::array<double, 8>>();
  }
  st.q.restore(std::move(table));
  for (const json& h : s.at("history")) {
    st.history.push_back({marl::QState{h.at("state").get<std::vector<int>>()},
                          {static_cast<marl::HgnnAction>(h.at("hgnn").get<int>()),
                           static_cast<marl::AceAction>(h.at("ace").get<int>())}});
  }
  st.rl_active = s.at("rl_active").get<bool>();
  st.prev_metric = s.at("prev_metric").get<double>();
  st.epoch = s.at("epoch").get<std::size_t>();
  st.rng_dropout = deserialize_rng(s.at("rng").at("dropout").get<std::string>());
  st.rng_negatives = deserialize_rng(s.at("rng").at("negatives").get<std::string>());
  st.rng_policy = deserialize_rng(s.at("rng").at("policy").get<std::string>());
  return c;
}

void save_checkpoint(const Checkpoint& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint", path);
  out << to_json(c).dump() << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint", path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError(std::string("invalid checkpoint JSON: ") + e.what(), path);
  }
  try {
    return checkpoint_from_json(j);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what(), path);
  }
}

// ------------------------------------------------------------------ dataset

Dataset prepare_dataset(const Graph& g, const RunConfig& cfg) {
  Dataset d;
  d.task = cfg.model.task;
  Graph base = g;
  if (g.feature_dim() == 0) {
    // Featureless graphs get one-hot node ids.
    Tensor eye = Tensor::matrix(g.num_nodes(), g.num_nodes());
    for (std::size_t i = 0; i < g.num_nodes(); ++i) eye(i, i) = 1.0;
    const auto edges = g.edges();
    base = Graph(g.num_nodes(), edges, std::move(eye), g.labels());
  }
  const std::uint64_t split_seed = derive_seed(cfg.seed, kSplitStream);
  if (d.task == hgnn::Task::kLinkPrediction) {
    d.edges = make_lp_split(base, cfg.val_frac, cfg.test_frac, split_seed);
    d.train_graph = base.with_edges(d.edges.train_pos);
  } else {
    d.nodes = make_nc_split(base, cfg.nc_train_frac, cfg.nc_val_frac, split_seed);
    d.train_graph = base;
  }
  d.full = std::move(base);
  return d;
}

// ----------------------------------------------------------------- metrics

double validation_metric(const Dataset& data, const hgnn::ModelParams& params, std::span<const double> zetas,
                         const hgnn::ModelConfig& model) {
  return split_metric(data, params, zetas, model, data.edges.val_pos, data.edges.val_neg, data.nodes.val);
}

double evaluate_test(const Dataset& data, const Checkpoint& c) {
  return split_metric(data, c.state.params, c.state.zetas, c.config.model, data.edges.test_pos,
                      data.edges.test_neg, data.nodes.test);
}

Tensor embed(const Dataset& data, const Checkpoint& c) {
  ad::Tape tape(false);
  const hgnn::MessageGraph mg = hgnn::message_graph(data.train_graph);
  return forward_eval(tape, data, mg, c.state.params, c.state.zetas, c.config.model).embeddings.value();
}

double train_graph_distortion(const Dataset& data, const Checkpoint& c) {
  return curvature::embedding_distortion(data.train_graph, embed(data, c), Curvature(c.state.zetas.back()))
      .mean_distortion;
}

// -------------------------------------------------------------------- train

TrainResult train(const Dataset& data, const RunConfig& cfg, const TrainOutputs& out) {
  cfg.validate();
  const bool lp = data.task == hgnn::Task::kLinkPrediction;
  if (data.task != cfg.model.task) throw std::invalid_argument("dataset task differs from the configured task");
  const Graph& g = data.train_graph;
  const hgnn::MessageGraph mg = hgnn::message_graph(g);
  const std::size_t L = cfg.model.n_layers;

  std::optional<std::ofstream> metrics_out, trace_out;
  if (out.metrics_path) {
    metrics_out.emplace(*out.metrics_path);
    if (!*metrics_out) throw DataError("cannot write metrics", *out.metrics_path);
  }
  if (out.trace_path) {
    trace_out.emplace(*out.trace_path);
    if (!*trace_out) throw DataError("cannot write trace", *out.trace_path);
    *trace_out << "epoch,layer,zeta,action_hgnn,action_ace,r_hgnn,r_ace\n";
  }

  TrainState st;
  {
    Rng init(derive_seed(cfg.seed, kInitStream));
    st.params = hgnn::init_params(cfg.model, g.feature_dim(), g.num_classes(), init);
  }
  st.zetas.assign(L, cfg.zeta0);
  st.zetas_ace = st.zetas;
  st.rl_active = cfg.rl_enabled;
  st.rng_dropout = Rng(derive_seed(cfg.seed, kDropoutStream));
  st.rng_negatives = Rng(derive_seed(cfg.seed, kNegativeStream));
  st.rng_policy = Rng(derive_seed(cfg.seed, kPolicyStream));
  st.prev_metric = validation_metric(data, st.params, st.zetas, cfg.model);

  TrainResult result;
  result.best = Checkpoint{cfg, st, st.prev_metric, 0};
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const TrainState last_good = st;
    EpochRecord rec;
    rec.epoch = epoch;
    rec.zetas = st.zetas;

    marl::QState s;
    if (st.rl_active) {
      s = marl::discretize_state(st.zetas_ace, cfg.bounds, cfg.bin_width);
      rec.action = marl::epsilon_greedy_joint(st.q, s, cfg.epsilon.at(epoch - 1), st.rng_policy);
    }

    // Supervised step at the current curvatures.
    {
      ad::Tape tape;
      const hgnn::BoundParams bp = hgnn::bind(tape, st.params);
      const hgnn::ForwardResult fwd =
          hgnn::model_forward(tape, mg, g.features(), bp, st.zetas, cfg.model, &st.rng_dropout);
      ad::Var loss;
      if (lp) {
        const auto neg = sample_non_edges(g, data.edges.train_pos.size(), st.rng_negatives);
        loss = hgnn::lp_loss(fwd.embeddings, data.edges.train_pos, neg, st.zetas.back(), cfg.model.fd_r,
                             cfg.model.fd_t);
      } else {
        const ad::Var logits = hgnn::nc_logits(fwd.embeddings, st.zetas.back(), bp.cls_w, bp.cls_b);
        loss = hgnn::nc_loss(logits, data.nodes.train, g.labels());
      }
      rec.train_loss = loss.value().item();
      if (!std::isfinite(rec.train_loss)) {
        if (out.divergence_dump_path) save_checkpoint(Checkpoint{cfg, last_good, 0.0, epoch - 1}, *out.divergence_dump_path);
        throw DivergenceError("training loss became non-finite at epoch " + std::to_string(epoch));
      }
      const ad::Gradients grads = tape.backward(loss);
      std::vector<ad::Var> vars;
      for (const auto& l : bp.layers) vars.insert(vars.end(), {l.W, l.b, l.att_w1, l.att_b1, l.att_w2});
      if (!st.params.cls_w.empty()) vars.insert(vars.end(), {bp.cls_w, bp.cls_b});
      std::vector<Tensor> gs;
      for (ad::Var v : vars) gs.push_back(grads[v]);
      const std::vector<Tensor*> ps = st.params.tensors();
      hgnn::adam_step(ps, gs, st.adam, cfg.adam);
      if (!all_finite(st.params)) {
        if (out.divergence_dump_path) save_checkpoint(Checkpoint{cfg, last_good, 0.0, epoch - 1}, *out.divergence_dump_path);
        throw DivergenceError("parameters became non-finite at epoch " + std::to_string(epoch));
      }
    }

    const double metric_curr = validation_metric(data, st.params, st.zetas, cfg.model);
    rec.r_hgnn = metric_curr - st.prev_metric;
    double metric_next = metric_curr;

    if (st.rl_active) {
      if (rec.action->ace == marl::AceAction::kExplore) {
        ad::Tape tape(false);
        const hgnn::ForwardResult fwd = forward_eval(tape, data, mg, st.params, st.zetas, cfg.model);
        const std::uint64_t kseed = derive_seed(derive_seed(cfg.seed, kKappaStream), epoch);
        for (std::size_t l = 0; l < L; ++l) {
          const curvature::CurvatureEstimate est = curvature::estimate_kappa(
              g, fwd.aggregated[l].value(), Curvature(st.zetas[l]), cfg.kappa_samples, derive_seed(kseed, l));
          if (est.n_samples == 0) continue;
          st.zetas_ace[l] = curvature::update_zeta(st.zetas_ace[l], est.kappa, cfg.gamma, cfg.bounds);
        }
      }
      const double metric_ace =
          st.zetas_ace == st.zetas ? metric_curr : validation_metric(data, st.params, st.zetas_ace, cfg.model);
      rec.r_ace = metric_ace - st.prev_metric;

      const marl::QState s_next = marl::discretize_state(st.zetas_ace, cfg.bounds, cfg.bin_width);
      marl::q_update(st.q, s, *rec.action, {rec.r_hgnn, rec.r_ace}, s_next, cfg.alpha, cfg.beta);
      if (rec.action->hgnn == marl::HgnnAction::kAdopt) {
        st.zetas = st.zetas_ace;
        metric_next = metric_ace;
      }
      const marl::Equilibrium eq = marl::nash_equilibrium_2x2(st.q.stage_game(s));
      const marl::ActionPair greedy{eq.pure && eq.pi_hgnn[1] == 1.0 ? marl::HgnnAction::kKeep : marl::HgnnAction::kAdopt,
                                    eq.pure && eq.pi_ace[1] == 1.0 ? marl::AceAction::kHold : marl::AceAction::kExplore};
      st.history.push_back({s, greedy});
      if (marl::equilibrium_reached(st.history, cfg.rl_patience)) {
        st.rl_active = false;
        result.frozen_epoch = epoch + 1;
        spdlog::info("agents reached equilibrium at epoch {}; curvatures frozen at {}", epoch,
                     fmt::join(st.zetas, ", "));
      }
    }
    st.prev_metric = metric_next;
    st.epoch = epoch;

    rec.val_metric = metric_next;
    rec.zetas_ace = st.zetas_ace;
    rec.rl_active = st.rl_active;

    const bool improved = metric_next > result.best.best_val_metric;
    since_best = improved ? 0 : since_best + 1;
    const bool stopping = !improved && cfg.early_stop_patience > 0 && since_best >= cfg.early_stop_patience;
    if (cfg.distortion_every > 0 &&
        (epoch % cfg.distortion_every == 0 || epoch == cfg.epochs || stopping)) {
      rec.distortion = curvature::embedding_distortion(g, embed(data, Checkpoint{cfg, st, 0.0, 0}),
                                                       Curvature(st.zetas.back()))
                           .mean_distortion;
    }
    if (cfg.record_wall_time) {
      rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    }

    if (metrics_out) *metrics_out << to_json(rec).dump() << '\n';
    if (trace_out) {
      for (std::size_t l = 0; l < L; ++l) {
        *trace_out << fmt::format("{},{},{},{},{},{},{}\n", epoch, l, rec.zetas[l], fmt_action(rec.action, true),
                                  fmt_action(rec.action, false), rec.r_hgnn, rec.r_ace);
      }
    }
    result.records.push_back(std::move(rec));

    if (improved) {
      result.best = Checkpoint{cfg, st, metric_next, epoch};
    } else if (stopping) {
      result.early_stopped = true;
      spdlog::info("early stop at epoch {} (best val {} at epoch {})", epoch, result.best.best_val_metric,
                   result.best.best_epoch);
      break;
    }
  }
  result.last = Checkpoint{cfg, st, result.best.best_val_metric, result.best.best_epoch};
  return result;
}

}  // namespace hypercurv::runner
