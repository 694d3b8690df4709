#include "cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include "hypercurv/curvature.hpp"
#include "hypercurv/graph.hpp"
#include "hypercurv/runner.hpp"
#include "hypercurv/synthetic.hpp"

namespace hypercurv::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct DataArgs {
  std::string edges;
  std::string features;
  std::string labels;
  std::size_t synthetic_tree = 0;
  std::uint64_t synthetic_seed = 0;
};

void add_data_options(CLI::App* app, DataArgs& d, bool allow_synthetic) {
  auto* edges = app->add_option("--edges", d.edges, "Edge list (u v per line, 0-based)");
  app->add_option("--features", d.features, "Node features: CSV or JSON manifest");
  app->add_option("--labels", d.labels, "Node labels: CSV node_id,class_id");
  if (allow_synthetic) {
    auto* tree = app->add_option("--synthetic-tree", d.synthetic_tree,
                                 "Use a balanced binary tree of this depth with 16-dim tree features")
                     ->excludes(edges);
    app->add_option("--synthetic-seed", d.synthetic_seed, "Feature seed for --synthetic-tree")->needs(tree);
  }
}

Graph load(const DataArgs& d) {
  if (d.synthetic_tree > 0) {
    const Graph t = synthetic::balanced_binary_tree(d.synthetic_tree);
    const auto edges = t.edges();
    return Graph(t.num_nodes(), edges, synthetic::hierarchical_features(t, 16, 0.3, 2.0, d.synthetic_seed));
  }
  if (d.edges.empty()) throw CLI::RequiredError("--edges");
  std::optional<std::string> f, l;
  if (!d.features.empty()) f = d.features;
  if (!d.labels.empty()) l = d.labels;
  return load_graph(d.edges, f, l);
}

Tensor load_embeddings(const std::string& path, const Graph& g, Curvature k) {
  Tensor emb = read_features(path);
  if (emb.rows() != g.num_nodes()) {
    throw DataError("embedding file has " + std::to_string(emb.rows()) + " rows for " +
                        std::to_string(g.num_nodes()) + " nodes",
                    path);
  }
  for (std::size_t i = 0; i < emb.rows(); ++i) {
    try {
      manifold::require_on_manifold(emb.row(i), k);
    } catch (const std::domain_error& e) {
      throw DataError("row " + std::to_string(i) + ": " + e.what() + " at zeta " + fmt::format("{}", k.zeta()), path);
    }
  }
  return emb;
}

void write_embeddings(const Tensor& emb, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write embeddings", path);
  for (std::size_t i = 0; i < emb.rows(); ++i) out << fmt::format("{}\n", fmt::join(emb.row(i), ","));
}

std::vector<double> parse_grid(const std::string& spec) {
  double a = 0, b = 0, step = 0;
  char c1 = 0, c2 = 0;
  std::istringstream in(spec);
  if (!(in >> a >> c1 >> b >> c2 >> step) || c1 != ':' || c2 != ':' || !in.eof()) {
    throw CLI::ValidationError("--grid", "expected start:stop:step, got '" + spec + "'");
  }
  if (!(step > 0.0) || b < a || !(a > 0.0)) {
    throw CLI::ValidationError("--grid", "need 0 < start <= stop and step > 0");
  }
  const auto n = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9)) + 1;
  std::vector<double> grid;
  for (std::size_t i = 0; i < n; ++i) grid.push_back(a + static_cast<double>(i) * step);
  return grid;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hyperbolic graph learning with adaptive per-layer curvature"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI configuration file; command-line flags take precedence");
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging on stderr");

  // train
  DataArgs train_data;
  runner::RunConfig cfg;
  std::string task = "lp";
  std::string out_dir = ".";
  bool no_rl = false;
  auto* train = app.add_subcommand("train", "Train a model and report the test metric of the best checkpoint");
  add_data_options(train, train_data, true);
  train->add_option("--task", task, "lp or nc")->check(CLI::IsMember({"lp", "nc"}))->capture_default_str();
  train->add_option("--epochs", cfg.epochs)->capture_default_str();
  train->add_option("--lr", cfg.adam.lr)->capture_default_str();
  train->add_option("--weight-decay", cfg.adam.weight_decay)->capture_default_str();
  train->add_option("--dropout", cfg.model.dropout)->capture_default_str();
  train->add_option("--dim", cfg.model.dim)->capture_default_str();
  train->add_option("--layers", cfg.model.n_layers)->capture_default_str();
  train->add_option("--seed", cfg.seed)->capture_default_str();
  train->add_option("--val-frac", cfg.val_frac, "Link prediction val share of edges")->capture_default_str();
  train->add_option("--test-frac", cfg.test_frac, "Link prediction test share of edges")->capture_default_str();
  train->add_option("--nc-train-frac", cfg.nc_train_frac, "Node classification train share")->capture_default_str();
  train->add_option("--nc-val-frac", cfg.nc_val_frac, "Node classification val share")->capture_default_str();
  train->add_option("--patience", cfg.early_stop_patience, "Early-stopping patience (0 disables)")->capture_default_str();
  train->add_option("--zeta0", cfg.zeta0)->capture_default_str();
  train->add_option("--zeta-min", cfg.bounds.min)->capture_default_str();
  train->add_option("--zeta-max", cfg.bounds.max)->capture_default_str();
  train->add_option("--gamma", cfg.gamma)->capture_default_str();
  train->add_option("--alpha", cfg.alpha)->capture_default_str();
  train->add_option("--beta", cfg.beta)->capture_default_str();
  train->add_option("--eps-start", cfg.epsilon.start)->capture_default_str();
  train->add_option("--eps-decay", cfg.epsilon.decay)->capture_default_str();
  train->add_option("--eps-min", cfg.epsilon.floor)->capture_default_str();
  train->add_option("--bin-width", cfg.bin_width)->capture_default_str();
  train->add_option("--rl-patience", cfg.rl_patience)->capture_default_str();
  train->add_option("--kappa-samples", cfg.kappa_samples)->capture_default_str();
  train->add_option("--distortion-every", cfg.distortion_every)->capture_default_str();
  train->add_option("--fd-r", cfg.model.fd_r)->capture_default_str();
  train->add_option("--fd-t", cfg.model.fd_t)->capture_default_str();
  train->add_flag("--no-rl", no_rl, "Keep every curvature fixed at zeta0");
  train->add_flag("--timing", cfg.record_wall_time, "Add wall_ms to metric records");
  train->add_option("--out-dir", out_dir, "Directory for metrics, trace, checkpoints, embeddings")->capture_default_str();

  // eval
  DataArgs eval_data;
  std::string checkpoint_path;
  auto* eval = app.add_subcommand("eval", "Test metric of a checkpoint on the data it was trained on");
  add_data_options(eval, eval_data, true);
  eval->add_option("--checkpoint", checkpoint_path)->required();

  // delta
  DataArgs delta_data;
  std::string mode = "exact";
  std::size_t samples = 100000;
  std::uint64_t delta_seed = 0;
  auto* delta = app.add_subcommand("delta", "Gromov four-point hyperbolicity of the graph");
  add_data_options(delta, delta_data, false);
  delta->add_option("--mode", mode)->check(CLI::IsMember({"exact", "sampled"}))->capture_default_str();
  delta->add_option("--samples", samples)->capture_default_str();
  delta->add_option("--seed", delta_seed)->capture_default_str();

  // distortion
  DataArgs dist_data;
  std::string emb_path, grid_spec;
  double emb_zeta = 1.0;
  std::uint64_t dist_seed = 0;
  auto* distortion = app.add_subcommand("distortion", "Embedding distortion over a grid of curvatures");
  add_data_options(distortion, dist_data, false);
  distortion->add_option("--embeddings", emb_path, "Hyperboloid points, one CSV row per node")->required();
  distortion->add_option("--zeta", emb_zeta, "Curvature of the given embeddings")->capture_default_str();
  distortion->add_option("--grid", grid_spec, "start:stop:step; omitted = the given curvature only");
  distortion->add_option("--seed", dist_seed, "Pair-sampling seed for large graphs")->capture_default_str();

  // estimate-curvature
  DataArgs est_data;
  std::string est_emb;
  double est_zeta = 1.0, est_gamma = 0.2;
  std::size_t est_samples = 2;
  std::uint64_t est_seed = 0;
  auto* estimate = app.add_subcommand("estimate-curvature", "Parallelogram-law curvature estimate of embeddings");
  add_data_options(estimate, est_data, false);
  estimate->add_option("--embeddings", est_emb)->required();
  estimate->add_option("--zeta", est_zeta)->capture_default_str();
  estimate->add_option("--samples", est_samples, "Triangles per node")->capture_default_str();
  estimate->add_option("--seed", est_seed)->capture_default_str();
  estimate->add_option("--gamma", est_gamma, "Step used for the reported curvature update")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  }
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (*train) {
      cfg.model.task = task == "lp" ? hgnn::Task::kLinkPrediction : hgnn::Task::kNodeClassification;
      cfg.rl_enabled = !no_rl;
      cfg.validate();
      const Graph g = load(train_data);
      const runner::Dataset data = runner::prepare_dataset(g, cfg);
      fs::create_directories(out_dir);
      const fs::path dir(out_dir);
      runner::TrainOutputs outputs{(dir / "metrics.jsonl").string(), (dir / "trace.csv").string(),
                                   (dir / "diverged_checkpoint.json").string()};
      const runner::TrainResult res = runner::train(data, cfg, outputs);
      runner::save_checkpoint(res.best, (dir / "checkpoint.json").string());
      runner::save_checkpoint(res.last, (dir / "last_checkpoint.json").string());
      write_embeddings(runner::embed(data, res.best), (dir / "embeddings.csv").string());
      const double test = runner::evaluate_test(data, res.best);
      json summary{{"task", task},
                   {"epochs_run", res.records.size()},
                   {"best_epoch", res.best.best_epoch},
                   {"best_val_metric", res.best.best_val_metric},
                   {"test_metric", test},
                   {"zetas", res.best.state.zetas},
                   {"frozen_epoch", res.frozen_epoch == 0 ? json(nullptr) : json(res.frozen_epoch)},
                   {"early_stopped", res.early_stopped}};
      out << summary.dump() << "\n";
    } else if (*eval) {
      const runner::Checkpoint c = runner::load_checkpoint(checkpoint_path);
      const Graph g = load(eval_data);
      const runner::Dataset data = runner::prepare_dataset(g, c.config);
      out << json{{"test_metric", runner::evaluate_test(data, c)}, {"zetas", c.state.zetas}}.dump() << "\n";
    } else if (*delta) {
      const Graph g = load(delta_data);
      const DeltaResult r = gromov_delta(g, mode == "exact" ? DeltaMode::kExact : DeltaMode::kSampled, samples, delta_seed);
      if (r.component_size != g.num_nodes()) {
        err << fmt::format("note: graph is disconnected; delta of the largest component ({} nodes)\n", r.component_size);
      }
      if (r.lower_bound) {
        out << fmt::format("{} (lower bound over {} sampled quadruples)\n", r.delta, r.quadruples);
      } else {
        out << fmt::format("{}\n", r.delta);
      }
    } else if (*distortion) {
      const Graph g = load(dist_data);
      const Curvature k(emb_zeta);
      const Tensor emb = load_embeddings(emb_path, g, k);
      const std::vector<double> grid = grid_spec.empty() ? std::vector<double>{emb_zeta} : parse_grid(grid_spec);
      out << "zeta,distortion\n";
      for (double z : grid) {
        const Curvature kz(z);
        const auto rep = curvature::embedding_distortion(g, curvature::remap_embeddings(emb, k, kz), kz, dist_seed);
        out << fmt::format("{},{}\n", z, rep.mean_distortion);
      }
    } else if (*estimate) {
      const Graph g = load(est_data);
      const Curvature k(est_zeta);
      const Tensor emb = load_embeddings(est_emb, g, k);
      const auto est = curvature::estimate_kappa(g, emb, k, est_samples, est_seed);
      out << json{{"kappa", est.kappa},
                  {"n_samples", est.n_samples},
                  {"eligible_nodes", est.nodes.size()},
                  {"zeta_next", curvature::update_zeta(est_zeta, est.kappa, est_gamma)}}
                 .dump()
          << "\n";
    }
  } catch (const CLI::Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const runner::DivergenceError& e) {
    err << "diverged: " << e.what() << "\n";
    return kDiverged;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kOk;
}

}  // namespace hypercurv::cli
