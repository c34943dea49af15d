#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "hyper/cli.hpp"
#include "hyper/data.hpp"
#include "hyper/io.hpp"

using namespace hyper;
namespace fs = std::filesystem;

namespace {

RunConfig tiny_config(const fs::path& out) {
  RunConfig cfg = parse_config(R"(
sim.width = 16
sim.height = 16
data.n_trajectories = 8
data.horizon = 6
data.split.surrogate = 0.5
data.split.rl = 0.25
data.split.test = 0.25
surrogate.fields = cuv
surrogate.hidden = 4
surrogate.epochs = 3
surrogate.lr = 3e-3
policy.epochs = 2
policy.lr = 1e-3
policy.scenarios = clean,unimodal-1,boundary
eval.scenarios = clean,unimodal,boundary
eval.sigma2 = 0.5,1
noise.unimodal.windows = 2-4
boundary.start = 2
boundary.end = 4
seed = 5
)");
  cfg.out = out;
  return cfg;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

struct Workspace {
  fs::path root = fs::temp_directory_path() / "hyper_cli_test";
  Workspace() { fs::remove_all(root); }
  ~Workspace() { fs::remove_all(root); }
};

}  // namespace

TEST_CASE("pipeline commands") {
  Workspace ws;
  const auto cfg = tiny_config(ws.root / "a");

  SUBCASE("missing artifacts are usage errors") {
    CHECK(cmd_train_surrogate(cfg) == kExitUsage);
    CHECK(cmd_train_policy(cfg) == kExitUsage);
    CHECK(cmd_eval(cfg) == kExitUsage);
    auto bad = cfg;
    bad.split = {0.5, 0.5, 0.5};
    CHECK(cmd_gen_data(bad) == kExitUsage);
  }

  REQUIRE(cmd_gen_data(cfg) == kExitOk);
  const auto manifest_path = cfg.data_dir() / "manifest.json";
  const auto m = load_manifest(manifest_path);
  CHECK(m.n_trajectories == 8);
  CHECK(m.horizon == 6);
  CHECK(m.ids(Split::surrogate).size() == 4);
  CHECK(m.ids(Split::test).size() == 2);
  CHECK(fs::exists(cfg.data_dir() / "gen-data.config"));
  const auto manifest_bytes = io::read_file(manifest_path);
  REQUIRE(cmd_gen_data(cfg) == kExitOk);
  CHECK(io::read_file(manifest_path) == manifest_bytes);

  CHECK(cmd_train_policy(cfg) == kExitUsage);  // no surrogate yet
  REQUIRE(cmd_train_surrogate(cfg) == kExitOk);
  const auto loss = read_csv(cfg.model_dir() / "surrogate_loss.csv");
  REQUIRE(loss.size() == 5);
  CHECK(loss[0] == std::vector<std::string>{"epoch", "loss"});
  CHECK(std::stod(loss.back()[1]) < std::stod(loss[1][1]));

  CHECK(cmd_eval(cfg) == kExitUsage);  // no policies yet
  REQUIRE(cmd_train_policy(cfg) == kExitOk);
  for (const char* name : {"clean", "unimodal-1", "boundary"})
    CHECK(fs::exists(cfg.model_dir() / (std::string("policy_") + name + ".hypo")));
  REQUIRE(cmd_eval(cfg) == kExitOk);

  const auto rows = read_csv(cfg.eval_dir() / "per_trajectory.csv");
  REQUIRE(!rows.empty());
  CHECK(rows[0] == std::vector<std::string>{"scenario", "method", "traj_id", "final_mse", "cumulative_mse", "sim_calls",
                                            "wall_time_s"});
  // 4 scenarios (clean, unimodal-0.5, unimodal-1, boundary) x 4 methods x 2 trajectories
  CHECK(rows.size() == 1 + 4 * 4 * 2);
  std::map<std::string, std::map<std::string, std::map<std::string, double>>> cum;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r[1] == "simulator-only") CHECK(std::stod(r[4]) == 0.0);
    if (r[1] == "surrogate-only") CHECK(r[5] == "0");
    cum[r[0]][r[2]][r[1]] = std::stod(r[4]);
  }

  const auto agg = read_csv(cfg.eval_dir() / "aggregate.csv");
  int checked = 0;
  for (std::size_t i = 1; i < agg.size(); ++i) {
    if (agg[i][1] != "hyper") continue;
    int wins = 0, n = 0;
    for (const auto& [traj, methods] : cum[agg[i][0]]) {
      ++n;
      if (methods.at("hyper") < methods.at("random-policy")) ++wins;
    }
    CHECK(std::stod(agg[i].back()) == doctest::Approx(100.0 * wins / n).epsilon(1e-9));
    ++checked;
  }
  CHECK(checked == 4);

  SUBCASE("fixed seeds reproduce artifacts") {
    const auto other = tiny_config(ws.root / "b");
    REQUIRE(cmd_gen_data(other) == kExitOk);
    REQUIRE(cmd_train_surrogate(other) == kExitOk);
    REQUIRE(cmd_train_policy(other) == kExitOk);
    REQUIRE(cmd_eval(other) == kExitOk);
    CHECK(io::read_file(cfg.model_dir() / "surrogate.hysg") == io::read_file(other.model_dir() / "surrogate.hysg"));
    CHECK(io::read_file(cfg.model_dir() / "policy_clean.hypo") == io::read_file(other.model_dir() / "policy_clean.hypo"));
    auto strip_time = [](std::vector<std::vector<std::string>> t) {
      for (auto& r : t) r.pop_back();
      return t;
    };
    CHECK(strip_time(read_csv(other.eval_dir() / "per_trajectory.csv")) == strip_time(rows));
  }

  SUBCASE("snapshots") {
    const auto traj_file = cfg.data_dir() / m.files[0];
    SnapshotArgs args;
    args.trajectory = traj_file;
    args.compare = traj_file;
    args.steps = {0, 6};
    args.fields = {FieldSelector::concentration, FieldSelector::velocity_u};
    args.out_dir = ws.root / "snap";
    REQUIRE(cmd_snapshot(args) == kExitOk);
    const auto img = io::read_file(args.out_dir / "c_006.pgm");
    const std::string header = "P5\n16 16\n255\n";
    REQUIRE(img.size() == header.size() + 256);
    CHECK(std::string(img.begin(), img.begin() + header.size()) == header);
    const auto err = io::read_file(args.out_dir / "c_abserr_006.pgm");
    for (std::size_t i = header.size(); i < err.size(); ++i) CHECK(err[i] == 0);
    // initial velocity is zero
    const auto u0 = io::read_file(args.out_dir / "u_000.pgm");
    for (std::size_t i = header.size(); i < u0.size(); ++i) CHECK(u0[i] == 0);

    args.steps = {7};
    CHECK(cmd_snapshot(args) == kExitUsage);
    args.trajectory = ws.root / "missing.hytj";
    CHECK(cmd_snapshot(args) == kExitUsage);
  }
}

TEST_CASE("greyscale images") {
  const auto zero = field_to_pgm(ScalarField(3, 2, 0.0));
  const std::string header = "P5\n3 2\n255\n";
  REQUIRE(zero.size() == header.size() + 6);
  for (std::size_t i = header.size(); i < zero.size(); ++i) CHECK(zero[i] == 0);

  ScalarField ramp(2, 2, std::vector<double>{0.0, 1.0, 0.5, 0.25});
  const auto img = field_to_pgm(ramp);
  const std::size_t o = std::string("P5\n2 2\n255\n").size();
  CHECK(img[o + 0] == 128);
  CHECK(img[o + 1] == 64);
  CHECK(img[o + 2] == 0);
  CHECK(img[o + 3] == 255);
}

TEST_CASE("policy scenario names") {
  CHECK(policy_scenario_name("unimodal", 0.25) == "unimodal-0.25");
  CHECK(policy_scenario_name("bimodal", 1.0) == "bimodal-1");
  CHECK(policy_scenario_name("clean", 0.7) == "clean");
}
