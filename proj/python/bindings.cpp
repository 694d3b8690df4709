#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "hypercurv/curvature.hpp"
#include "hypercurv/graph.hpp"
#include "hypercurv/manifold.hpp"
#include "hypercurv/marl.hpp"
#include "hypercurv/metrics.hpp"
#include "hypercurv/runner.hpp"
#include "hypercurv/synthetic.hpp"

namespace py = pybind11;
using namespace hypercurv;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a 2-d array");
  const auto r = static_cast<std::size_t>(a.shape(0)), c = static_cast<std::size_t>(a.shape(1));
  return Tensor({r, c}, std::vector<double>(a.data(), a.data() + r * c));
}

Array to_array(const Tensor& t) {
  return Array(std::vector<py::ssize_t>{static_cast<py::ssize_t>(t.rows()), static_cast<py::ssize_t>(t.cols())},
               t.values().data());
}

Array to_array(const Vector& v) { return Array(static_cast<py::ssize_t>(v.size()), v.data()); }

std::vector<double> to_vector(const Array& a) {
  if (a.ndim() != 1) throw std::invalid_argument("expected a 1-d array");
  return {a.data(), a.data() + a.size()};
}

Graph make_graph(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                 std::optional<Array> features = std::nullopt, std::vector<int> labels = {}) {
  std::vector<Edge> edges;
  for (auto [u, v] : pairs) edges.push_back({u, v});
  Tensor f = features ? to_tensor(*features) : Tensor::matrix(n, 0);
  return Graph(n, edges, std::move(f), std::move(labels));
}

std::vector<std::pair<std::size_t, std::size_t>> edge_pairs(const Graph& g) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const Edge& e : g.edges()) out.emplace_back(e.u, e.v);
  return out;
}

}  // namespace

PYBIND11_MODULE(_hypercurv, m) {
  m.doc() = "Hyperbolic graph learning with adaptive per-layer curvature";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);

  m.def("lorentz_inner", [](const Array& u, const Array& v) {
    return manifold::lorentz_inner(to_vector(u), to_vector(v));
  });
  m.def("distance", [](const Array& x, const Array& y, double zeta) {
    return manifold::distance(to_vector(x), to_vector(y), Curvature(zeta));
  }, py::arg("x"), py::arg("y"), py::arg("zeta") = 1.0);
  m.def("log_map", [](const Array& x, const Array& y, double zeta) {
    return to_array(manifold::log_map(to_vector(x), to_vector(y), Curvature(zeta)));
  }, py::arg("x"), py::arg("y"), py::arg("zeta") = 1.0);
  m.def("exp_map", [](const Array& x, const Array& v, double zeta) {
    return to_array(manifold::exp_map(to_vector(x), to_vector(v), Curvature(zeta)));
  }, py::arg("x"), py::arg("v"), py::arg("zeta") = 1.0);
  m.def("parallel_transport", [](const Array& x, const Array& y, const Array& v, double zeta) {
    return to_array(manifold::parallel_transport(to_vector(x), to_vector(y), to_vector(v), Curvature(zeta)));
  }, py::arg("x"), py::arg("y"), py::arg("v"), py::arg("zeta") = 1.0);
  m.def("to_hyperboloid", [](const Array& e, double zeta) {
    return to_array(manifold::to_hyperboloid(to_vector(e), Curvature(zeta)));
  }, py::arg("euclidean"), py::arg("zeta") = 1.0);
  m.def("transfer_curvature", [](const Array& h, double from, double to) {
    return to_array(manifold::transfer_curvature(to_vector(h), Curvature(from), Curvature(to)));
  }, py::arg("h"), py::arg("zeta_from"), py::arg("zeta_to"));

  m.def("balanced_binary_tree", [](std::size_t depth) {
    const Graph g = synthetic::balanced_binary_tree(depth);
    return py::make_tuple(g.num_nodes(), edge_pairs(g));
  }, py::arg("depth"));
  m.def("sarkar_tree_embedding", [](std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                                    double edge_length, double zeta) {
    return to_array(synthetic::sarkar_tree_embedding(make_graph(n, edges), edge_length, Curvature(zeta)));
  }, py::arg("n"), py::arg("edges"), py::arg("edge_length") = 1.5, py::arg("zeta") = 1.0);

  m.def("gromov_delta", [](std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                           const std::string& mode, std::size_t samples, std::uint64_t seed) {
    if (mode != "exact" && mode != "sampled") throw std::invalid_argument("mode must be 'exact' or 'sampled'");
    const DeltaResult r = gromov_delta(make_graph(n, edges), mode == "exact" ? DeltaMode::kExact : DeltaMode::kSampled,
                                       samples, seed);
    py::dict d;
    d["delta"] = r.delta;
    d["lower_bound"] = r.lower_bound;
    d["quadruples"] = r.quadruples;
    d["component_size"] = r.component_size;
    return d;
  }, py::arg("n"), py::arg("edges"), py::arg("mode") = "exact", py::arg("samples") = 100000, py::arg("seed") = 0);

  m.def("embedding_distortion", [](std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                                   const Array& emb, double zeta, std::uint64_t seed) {
    const auto r = curvature::embedding_distortion(make_graph(n, edges), to_tensor(emb), Curvature(zeta), seed);
    py::dict d;
    d["mean_distortion"] = r.mean_distortion;
    d["pairs_used"] = r.pairs_used;
    d["pairs_excluded"] = r.pairs_excluded;
    d["sampled"] = r.sampled;
    return d;
  }, py::arg("n"), py::arg("edges"), py::arg("embeddings"), py::arg("zeta") = 1.0, py::arg("seed") = 0);

  m.def("estimate_kappa", [](std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                             const Array& emb, double zeta, std::size_t n_s, std::uint64_t seed) {
    const auto r = curvature::estimate_kappa(make_graph(n, edges), to_tensor(emb), Curvature(zeta), n_s, seed);
    py::dict d;
    d["kappa"] = r.kappa;
    d["n_samples"] = r.n_samples;
    d["nodes"] = r.nodes;
    d["per_node"] = r.per_node;
    return d;
  }, py::arg("n"), py::arg("edges"), py::arg("embeddings"), py::arg("zeta") = 1.0, py::arg("n_s") = 2,
     py::arg("seed") = 0);

  m.def("update_zeta", [](double zeta_prev, double kappa, double gamma, double zmin, double zmax) {
    return curvature::update_zeta(zeta_prev, kappa, gamma, CurvatureBounds{zmin, zmax});
  }, py::arg("zeta_prev"), py::arg("kappa"), py::arg("gamma") = 0.2, py::arg("zeta_min") = 0.1,
     py::arg("zeta_max") = 10.0);

  m.def("nash_equilibrium_2x2", [](const std::array<std::array<double, 2>, 2>& a,
                                   const std::array<std::array<double, 2>, 2>& b) {
    const marl::Equilibrium eq = marl::nash_equilibrium_2x2({a, b});
    py::dict d;
    d["pi_hgnn"] = eq.pi_hgnn;
    d["pi_ace"] = eq.pi_ace;
    d["value_hgnn"] = eq.value_hgnn;
    d["value_ace"] = eq.value_ace;
    d["pure"] = eq.pure;
    d["degenerate"] = eq.degenerate;
    return d;
  }, py::arg("payoff_hgnn"), py::arg("payoff_ace"));

  m.def("roc_auc", [](const std::vector<double>& scores, const std::vector<int>& labels) {
    return metrics::roc_auc(scores, labels);
  });

  m.def("_train_json", [](std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                          std::optional<Array> features, std::vector<int> labels, const std::string& config) {
    const runner::RunConfig cfg = runner::run_config_from_json(nlohmann::json::parse(config));
    const Graph g = make_graph(n, edges, std::move(features), std::move(labels));
    nlohmann::json out;
    {
      py::gil_scoped_release release;
      const runner::Dataset data = runner::prepare_dataset(g, cfg);
      const runner::TrainResult res = runner::train(data, cfg);
      nlohmann::json records = nlohmann::json::array();
      for (const auto& r : res.records) records.push_back(runner::to_json(r));
      out = {{"best_epoch", res.best.best_epoch},
             {"best_val_metric", res.best.best_val_metric},
             {"test_metric", runner::evaluate_test(data, res.best)},
             {"zetas", res.best.state.zetas},
             {"final_distortion", runner::train_graph_distortion(data, res.last)},
             {"frozen_epoch", res.frozen_epoch},
             {"records", records}};
    }
    return out.dump();
  });
}
