#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "hypercurv/metrics.hpp"
#include "hypercurv/runner.hpp"
#include "hypercurv/synthetic.hpp"

using namespace hypercurv;
using namespace hypercurv::runner;
namespace fs = std::filesystem;

namespace {

double auc_brute(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0;
  int pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[i] != 1 || y[j] != 0) continue;
      ++pairs;
      wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
    }
  return wins / pairs;
}

Graph tree_with_features(std::size_t depth, std::uint64_t seed) {
  const Graph t = synthetic::balanced_binary_tree(depth);
  return Graph(t.num_nodes(), t.edges(), synthetic::hierarchical_features(t, 8, 0.3, 2.0, seed));
}

RunConfig small_config() {
  RunConfig c;
  c.epochs = 6;
  c.model.dim = 4;
  c.seed = 3;
  c.val_frac = 0.1;
  c.test_frac = 0.1;
  c.distortion_every = 3;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("roc_auc") {
  CHECK(metrics::roc_auc(std::vector<double>{0.9, 0.8, 0.1, 0.2}, std::vector<int>{1, 1, 0, 0}) == 1.0);
  CHECK(metrics::roc_auc(std::vector<double>{0.5, 0.5, 0.5}, std::vector<int>{1, 0, 1}) == 0.5);
  const std::vector<double> s{0.3, 0.7, 0.3, 0.9, 0.1};
  const std::vector<int> y{1, 0, 0, 1, 1};
  CHECK(metrics::roc_auc(s, y) == doctest::Approx(auc_brute(s, y)).epsilon(1e-15));

  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> level(0, 6);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> sc(30);
    std::vector<int> lab(30);
    for (int i = 0; i < 30; ++i) {
      sc[i] = level(rng) / 6.0;
      lab[i] = i % 3 == 0;
    }
    CHECK(metrics::roc_auc(sc, lab) == doctest::Approx(auc_brute(sc, lab)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(metrics::roc_auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), std::invalid_argument);
}

TEST_CASE("micro_f1") {
  CHECK(metrics::micro_f1(std::vector<int>{1, 2, 3}, std::vector<int>{1, 2, 3}) == 1.0);
  CHECK(metrics::micro_f1(std::vector<int>{0, 0, 0}, std::vector<int>{1, 2, 3}) == 0.0);
  const std::vector<int> pred{0, 1, 2, 2, 1, 0, 0, 1, 2, 0}, truth{0, 1, 1, 2, 1, 2, 0, 0, 2, 1};
  CHECK(metrics::micro_f1(pred, truth) == doctest::Approx(0.6));
}

TEST_CASE("config JSON") {
  RunConfig c = small_config();
  c.gamma = 0.35;
  c.model.task = hgnn::Task::kNodeClassification;
  const RunConfig back = run_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK_THROWS_AS(run_config_from_json(nlohmann::json{{"gammma", 0.2}}), std::invalid_argument);

  RunConfig bad;
  bad.zeta0 = 20.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("link prediction training") {
  const Graph g = tree_with_features(4, 1);
  RunConfig cfg = small_config();
  const Dataset data = prepare_dataset(g, cfg);
  CHECK(data.train_graph.num_edges() == data.edges.train_pos.size());

  SUBCASE("one epoch gives one record") {
    RunConfig one = cfg;
    one.epochs = 1;
    const TrainResult r = train(data, one);
    REQUIRE(r.records.size() == 1);
    CHECK(r.records[0].epoch == 1);
    CHECK(r.records[0].distortion.has_value());
  }
  SUBCASE("runs are deterministic and files are written") {
    const fs::path dir = fs::temp_directory_path() / "hc_runner_det";
    fs::create_directories(dir);
    TrainOutputs o1{(dir / "m1.jsonl").string(), (dir / "t1.csv").string(), {}};
    TrainOutputs o2{(dir / "m2.jsonl").string(), (dir / "t2.csv").string(), {}};
    const TrainResult a = train(data, cfg, o1);
    const TrainResult b = train(data, cfg, o2);
    CHECK(slurp(dir / "m1.jsonl") == slurp(dir / "m2.jsonl"));
    CHECK(slurp(dir / "t1.csv") == slurp(dir / "t2.csv"));
    CHECK(slurp(dir / "t1.csv").rfind("epoch,layer,zeta,action_hgnn,action_ace,r_hgnn,r_ace\n", 0) == 0);
    CHECK(a.records.size() == 6);
    for (const auto& r : a.records) {
      const auto j = to_json(r);
      CHECK(j["test_metric"].is_null());
      CHECK(j.contains("zetas"));
      CHECK_FALSE(j.contains("wall_ms"));
    }
    CHECK(evaluate_test(data, a.best) == evaluate_test(data, b.best));
    fs::remove_all(dir);
  }
  SUBCASE("curvatures stay within bounds and freeze after equilibrium") {
    RunConfig c = cfg;
    c.epochs = 60;
    c.rl_patience = 3;
    const TrainResult r = train(data, c);
    for (const auto& rec : r.records)
      for (double z : rec.zetas) CHECK((z >= c.bounds.min && z <= c.bounds.max));
    if (r.frozen_epoch > 0 && r.frozen_epoch <= r.records.size()) {
      const auto& frozen = r.records[r.frozen_epoch - 1].zetas;
      for (std::size_t e = r.frozen_epoch - 1; e < r.records.size(); ++e) {
        CHECK(r.records[e].zetas == frozen);
        CHECK_FALSE(r.records[e].rl_active);
      }
    }
  }
  SUBCASE("early stop records distortion on its last epoch") {
    RunConfig c = cfg;
    c.epochs = 200;
    c.early_stop_patience = 2;
    c.distortion_every = 50;
    const TrainResult r = train(data, c);
    REQUIRE(r.early_stopped);
    CHECK(r.records.back().distortion.has_value());
    CHECK(r.records.size() < 200);
  }
  SUBCASE("RL disabled keeps the initial curvature") {
    RunConfig c = cfg;
    c.rl_enabled = false;
    c.zeta0 = 1.0;
    const TrainResult r = train(data, c);
    for (const auto& rec : r.records)
      for (double z : rec.zetas) CHECK(z == 1.0);
  }
}

TEST_CASE("checkpoint round trip") {
  const Graph g = tree_with_features(3, 2);
  RunConfig cfg = small_config();
  cfg.epochs = 3;
  const Dataset data = prepare_dataset(g, cfg);
  const TrainResult r = train(data, cfg);

  const fs::path p = fs::temp_directory_path() / "hc_ckpt.json";
  save_checkpoint(r.last, p.string());
  const Checkpoint back = load_checkpoint(p.string());
  CHECK(to_json(back) == to_json(r.last));
  const Tensor e1 = embed(data, r.last), e2 = embed(data, back);
  CHECK(e1.values() == e2.values());
  fs::remove(p);

  nlohmann::json j = to_json(r.last);
  j["version"] = 99;
  CHECK_THROWS(checkpoint_from_json(j));
}

TEST_CASE("node classification training") {
  const Graph t = synthetic::balanced_binary_tree(4);
  std::vector<int> labels(t.num_nodes());
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i == 0 ? 0 : static_cast<int>((i - 1) % 2);
  const Graph g(t.num_nodes(), t.edges(), synthetic::hierarchical_features(t, 6, 0.3, 2.0, 4), labels);
  RunConfig cfg = small_config();
  cfg.model.task = hgnn::Task::kNodeClassification;
  const Dataset data = prepare_dataset(g, cfg);
  CHECK(data.nodes.train.size() > data.nodes.val.size());
  const TrainResult r = train(data, cfg);
  CHECK(r.records.size() == 6);
  const double f1 = evaluate_test(data, r.best);
  CHECK((f1 >= 0.0 && f1 <= 1.0));
}
