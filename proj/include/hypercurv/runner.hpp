#pragma once

// Training orchestration: the joint HGNN / curvature-agent loop, evaluation,
// metrics and trace emission, checkpoints.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hypercurv/graph.hpp"
#include "hypercurv/hgnn.hpp"
#include "hypercurv/marl.hpp"

namespace hypercurv::runner {

/// Loss or parameters became non-finite.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  hgnn::ModelConfig model;
  hgnn::AdamConfig adam;

  std::size_t epochs = 500;
  std::size_t early_stop_patience = 100;
  std::uint64_t seed = 0;
  double val_frac = 0.05;
  double test_frac = 0.10;
  // Node classification shares of the labeled nodes; the rest is test.
  double nc_train_frac = 0.7;
  double nc_val_frac = 0.15;

  bool rl_enabled = true;
  double zeta0 = 1.0;
  CurvatureBounds bounds;
  double gamma = 0.2;
  double alpha = 0.5;
  double beta = 0.9;
  marl::EpsilonSchedule epsilon;
  double bin_width = 0.1;
  std::size_t rl_patience = 20;
  std::size_t kappa_samples = 2;
  std::size_t distortion_every = 10;

  bool record_wall_time = false;

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

nlohmann::json to_json(const RunConfig& cfg);
/// Missing keys keep their defaults; unknown keys throw.
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_metric = 0.0;
  std::vector<double> zetas;      // curvatures used by the model this epoch
  std::vector<double> zetas_ace;  // curvature agent's proposal after this epoch
  std::optional<marl::ActionPair> action;  // empty once the agents have stopped
  double r_hgnn = 0.0;
  double r_ace = 0.0;
  bool rl_active = true;
  std::optional<double> distortion;
  std::optional<double> wall_ms;
};

nlohmann::json to_json(const EpochRecord& r);

/// Everything needed to resume or evaluate a run.
struct TrainState {
  hgnn::ModelParams params;
  hgnn::AdamState adam;
  std::vector<double> zetas;
  std::vector<double> zetas_ace;
  marl::QTables q;
  std::vector<marl::HistoryEntry> history;
  bool rl_active = true;
  double prev_metric = 0.0;
  std::size_t epoch = 0;  // completed epochs
  Rng rng_dropout;
  Rng rng_negatives;
  Rng rng_policy;
};

struct Checkpoint {
  static constexpr int kVersion = 1;
  RunConfig config;
  TrainState state;
  double best_val_metric = 0.0;
  std::size_t best_epoch = 0;
};

nlohmann::json to_json(const Checkpoint& c);
Checkpoint checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// A task's data after splitting. The LP train graph keeps only training
/// positives; test pairs and test nodes are stored but only read by
/// evaluate_test().
struct Dataset {
  Graph full;
  Graph train_graph;
  hgnn::Task task = hgnn::Task::kLinkPrediction;
  EdgeSplit edges;
  NodeSplit nodes;
};

Dataset prepare_dataset(const Graph& g, const RunConfig& cfg);

struct TrainResult {
  Checkpoint best;                // parameters and curvatures at the best val metric
  Checkpoint last;
  std::vector<EpochRecord> records;
  std::size_t frozen_epoch = 0;   // first epoch with curvatures frozen; 0 if never
  bool early_stopped = false;
};

struct TrainOutputs {
  std::optional<std::string> metrics_path;  // JSON Lines of EpochRecord
  std::optional<std::string> trace_path;    // curvature trace CSV
  /// Written with the last finite state when training diverges.
  std::optional<std::string> divergence_dump_path;
};

/// Runs the training loop. Never touches test pairs or test nodes.
TrainResult train(const Dataset& data, const RunConfig& cfg, const TrainOutputs& out = {});

/// Final-layer embeddings of a checkpointed model (eval mode), at the last
/// layer's curvature.
Tensor embed(const Dataset& data, const Checkpoint& c);

/// Validation metric (AUC for LP, micro-F1 for NC) of parameters at the
/// given curvatures.
double validation_metric(const Dataset& data, const hgnn::ModelParams& params,
                         std::span<const double> zetas, const hgnn::ModelConfig& model);

/// Test metric of a checkpoint. The only reader of the test split.
double evaluate_test(const Dataset& data, const Checkpoint& c);

/// Distortion of the final embeddings on the training graph.
double train_graph_distortion(const Dataset& data, const Checkpoint& c);

}  // namespace hypercurv::runner
