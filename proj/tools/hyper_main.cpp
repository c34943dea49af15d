#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "hyper/cli.hpp"

using namespace hyper;

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"hybrid simulator/surrogate rollouts"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::string out;
  std::vector<std::string> sets;
  app.add_option("--config", config_path, "config file (flat key = value)");
  app.add_option("--seed", seed, "master seed");
  app.add_option("--jobs", jobs, "worker threads");
  app.add_option("--out", out, "output directory");
  app.add_option("--set", sets, "override a config key, key=value");

  auto* gen = app.add_subcommand("gen-data", "generate and split a trajectory dataset");
  auto* tsur = app.add_subcommand("train-surrogate", "train the surrogate on the surrogate split");
  auto* tpol = app.add_subcommand("train-policy", "train one policy per configured scenario");
  auto* eval = app.add_subcommand("eval", "compare methods on the test split");
  auto* snap = app.add_subcommand("snapshot", "write greyscale images of trajectory fields");
  for (auto* sub : {gen, tsur, tpol, eval, snap}) sub->fallthrough();

  SnapshotArgs sargs;
  std::string compare;
  std::vector<std::string> fields;
  std::string snap_out;
  snap->add_option("file", sargs.trajectory, "trajectory file")->required();
  snap->add_option("--steps", sargs.steps, "steps to render (default all)")->delimiter(',');
  snap->add_option("--fields", fields, "fields: c, p, u, v")->delimiter(',');
  snap->add_option("--compare", compare, "second trajectory for absolute-error maps");
  snap->add_option("--dir", snap_out, "image directory (default <out>/snapshots)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (snap->parsed()) {
    return run_guarded("snapshot", [&] {
      if (!compare.empty()) sargs.compare = compare;
      if (!fields.empty()) {
        sargs.fields.clear();
        for (const auto& f : fields) sargs.fields.push_back(parse_field_selector(f));
      }
      sargs.out_dir = !snap_out.empty() ? snap_out : (out.empty() ? "snapshots" : out + "/snapshots");
      return cmd_snapshot(sargs);
    });
  }

  RunConfig cfg;
  const int loaded = run_guarded("config", [&] {
    if (!config_path.empty()) cfg = load_config(config_path);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed) cfg.seed = *seed;
    if (jobs) cfg.jobs = *jobs;
    if (!out.empty()) cfg.out = out;
    cfg.validate();
    return kExitOk;
  });
  if (loaded != kExitOk) return loaded;

  if (gen->parsed()) return cmd_gen_data(cfg);
  if (tsur->parsed()) return cmd_train_surrogate(cfg);
  if (tpol->parsed()) return cmd_train_policy(cfg);
  return cmd_eval(cfg);
}
