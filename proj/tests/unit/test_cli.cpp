#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cli.hpp"
#include "hypercurv/synthetic.hpp"

using namespace hypercurv;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "hypercurv");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("hc_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_edges(const std::string& path, const Graph& g) {
  std::ofstream out(path);
  for (const Edge& e : g.edges()) out << e.u << '\t' << e.v << '\n';
}

std::string slurp(const std::string& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_lines(const std::string& s) { return std::count(s.begin(), s.end(), '\n'); }

}  // namespace

TEST_CASE("delta subcommand") {
  TempDir dir;
  write_edges(dir.file("tree.tsv"), synthetic::balanced_binary_tree(3));
  write_edges(dir.file("c4.tsv"), synthetic::cycle(4));
  const Result t = run({"delta", "--edges", dir.file("tree.tsv"), "--mode", "exact"});
  CHECK(t.code == cli::kOk);
  CHECK(t.out == "0\n");
  const Result c = run({"delta", "--edges", dir.file("c4.tsv"), "--mode", "exact"});
  CHECK(c.out == "1\n");
  const Result s = run({"delta", "--edges", dir.file("c4.tsv"), "--mode", "sampled", "--samples", "50"});
  CHECK(s.out == "1 (lower bound over 50 sampled quadruples)\n");
}

TEST_CASE("exit codes") {
  TempDir dir;
  CHECK(run({"delta", "--edges", dir.file("missing.tsv")}).code == cli::kDataError);
  CHECK(run({"delta", "--bogus"}).code == cli::kUsageError);
  CHECK(run({"frobnicate"}).code == cli::kUsageError);
  std::ofstream(dir.file("bad.tsv")) << "0\t1\n2\tq\n";
  const Result bad = run({"delta", "--edges", dir.file("bad.tsv")});
  CHECK(bad.code == cli::kDataError);
  CHECK(bad.err.find(":2:") != std::string::npos);
}

TEST_CASE("train, eval, distortion and curvature estimate") {
  TempDir dir;
  const std::string out = dir.file("run");
  const std::vector<std::string> args{"train", "--synthetic-tree", "4", "--epochs", "4", "--dim", "4",
                                      "--seed", "7", "--val-frac", "0.1", "--out-dir", out};
  const Result a = run(args);
  REQUIRE(a.code == cli::kOk);
  const std::string m1 = slurp(out + "/metrics.jsonl");
  CHECK(count_lines(m1) == 4);
  CHECK(fs::exists(out + "/trace.csv"));
  CHECK(fs::exists(out + "/checkpoint.json"));
  CHECK(fs::exists(out + "/embeddings.csv"));

  const Result b = run(args);
  REQUIRE(b.code == cli::kOk);
  CHECK(slurp(out + "/metrics.jsonl") == m1);

  const Result e = run({"eval", "--checkpoint", out + "/checkpoint.json", "--synthetic-tree", "4"});
  CHECK(e.code == cli::kOk);

  write_edges(dir.file("tree.tsv"), synthetic::balanced_binary_tree(4));
  const Result d = run({"distortion", "--edges", dir.file("tree.tsv"), "--embeddings", out + "/embeddings.csv",
                        "--zeta", "1.0", "--grid", "0.2:4.0:0.2"});
  REQUIRE(d.code == cli::kOk);
  CHECK(count_lines(d.out) == 21);  // header + 20 rows
  CHECK(d.out.rfind("zeta,distortion\n", 0) == 0);

  const Result k = run({"estimate-curvature", "--edges", dir.file("tree.tsv"), "--embeddings",
                        out + "/embeddings.csv", "--zeta", "1.0"});
  CHECK(k.code == cli::kOk);
  CHECK(k.out.find("kappa") != std::string::npos);
}

TEST_CASE("config file with flag override") {
  TempDir dir;
  std::ofstream(dir.file("cfg.toml")) << "[train]\nepochs = 3\ndim = 4\nseed = 2\n";
  const std::string out = dir.file("run");
  const Result r = run({"--config", dir.file("cfg.toml"), "train", "--synthetic-tree", "3", "--epochs", "2",
                        "--val-frac", "0.15", "--out-dir", out});
  REQUIRE(r.code == cli::kOk);
  CHECK(count_lines(slurp(out + "/metrics.jsonl")) == 2);
}
