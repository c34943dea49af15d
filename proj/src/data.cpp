#include "hyper/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "hyper/error.hpp"
#include "hyper/io.hpp"
#include "hyper/nn.hpp"

namespace hyper {

namespace {

constexpr std::uint8_t kFieldCount = 4;

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

std::uint64_t parse_hex64(const std::string& s) { return std::stoull(s, nullptr, 16); }

}  // namespace

std::vector<std::uint8_t> encode_trajectory(const Trajectory& traj, double dt) {
  traj.validate();
  const auto& first = traj.states.front().concentration;
  io::ByteWriter w;
  w.raw("HYTJ");
  w.u16(kTrajectoryVersion);
  w.u32(static_cast<std::uint32_t>(first.width()));
  w.u32(static_cast<std::uint32_t>(first.height()));
  w.u32(static_cast<std::uint32_t>(traj.states.size()));
  w.f64(dt);
  w.u8(kFieldCount);
  for (const auto& s : traj.states) {
    for (const ScalarField* f : {&s.concentration, &s.velocity.u, &s.velocity.v, &s.pressure})
      for (double v : f->values()) w.f32(static_cast<float>(v));
  }
  const auto& b = w.bytes();
  w.u32(io::crc32(std::span(b).subspan(4)));
  return w.bytes();
}

Trajectory decode_trajectory(std::span<const std::uint8_t> bytes, double* dt_out) {
  io::ByteReader r(bytes, "trajectory file");
  if (r.raw(4) != "HYTJ") throw FormatError(FormatError::Kind::bad_magic, "trajectory file: bad magic, expected HYTJ");
  const std::uint16_t version = r.u16();
  if (version != kTrajectoryVersion)
    throw FormatError(FormatError::Kind::version, "trajectory file: file version " + std::to_string(version) +
                                                      ", supported version " + std::to_string(kTrajectoryVersion));
  const std::uint32_t w = r.u32();
  const std::uint32_t h = r.u32();
  const std::uint32_t count = r.u32();
  const double dt = r.f64();
  const std::uint8_t fields = r.u8();
  if (fields != kFieldCount)
    throw FormatError(FormatError::Kind::version,
                      "trajectory file: " + std::to_string(fields) + " fields, expected " + std::to_string(kFieldCount));
  const std::size_t cells = static_cast<std::size_t>(w) * h;
  if (w == 0 || h == 0 || count < 2) throw FormatError(FormatError::Kind::truncated, "trajectory file: empty header");
  if (cells * kFieldCount * count * 4 + 4 != r.remaining())
    throw FormatError(FormatError::Kind::truncated, "trajectory file: payload size does not match the header");
  const std::size_t body_end = bytes.size() - 4;
  io::ByteReader tail(bytes.subspan(body_end), "trajectory file");
  if (io::crc32(bytes.subspan(4, body_end - 4)) != tail.u32())
    throw FormatError(FormatError::Kind::checksum, "trajectory file: checksum mismatch");

  Trajectory traj;
  traj.states.reserve(count);
  auto read_field = [&] {
    std::vector<double> v(cells);
    for (auto& x : v) x = r.f32();
    return ScalarField(static_cast<int>(w), static_cast<int>(h), std::move(v));
  };
  for (std::uint32_t i = 0; i < count; ++i) {
    SimState s;
    s.concentration = read_field();
    s.velocity.u = read_field();
    s.velocity.v = read_field();
    s.pressure = read_field();
    s.step_index = static_cast<int>(i);
    s.sim_time = i * dt;
    traj.states.push_back(std::move(s));
  }
  if (dt_out) *dt_out = dt;
  return traj;
}

void save_trajectory(const Trajectory& traj, double dt, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_trajectory(traj, dt));
}

Trajectory load_trajectory(const std::filesystem::path& path, double* dt) {
  const auto bytes = io::read_file(path);
  try {
    return decode_trajectory(bytes, dt);
  } catch (const FormatError& e) {
    throw FormatError(e.kind(), path.string() + ": " + e.what());
  }
}

std::string to_string(Split s) {
  switch (s) {
    case Split::surrogate: return "surrogate";
    case Split::rl: return "rl";
    case Split::test: return "test";
  }
  return "unknown";
}

Split parse_split(const std::string& name) {
  if (name == "surrogate") return Split::surrogate;
  if (name == "rl") return Split::rl;
  if (name == "test") return Split::test;
  throw InvalidArgument("unknown split '" + name + "'");
}

std::vector<std::uint64_t> DatasetManifest::ids(Split s) const {
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < splits.size(); ++i)
    if (splits[i] == s) out.push_back(i);
  return out;
}

void DatasetManifest::validate() const {
  if (n_trajectories < 1) throw InvalidArgument("manifest: no trajectories");
  if (files.size() != static_cast<std::size_t>(n_trajectories) || seeds.size() != files.size())
    throw InvalidArgument("manifest: file list does not match n_trajectories");
  if (!splits.empty() && splits.size() != files.size())
    throw InvalidArgument("manifest: split assignment does not cover every trajectory");
}

std::string manifest_to_json(const DatasetManifest& m) {
  nlohmann::ordered_json j;
  j["dataset_id"] = m.dataset_id;
  j["simulator"] = {{"kind", m.simulator_kind}, {"config", m.simulator_config}, {"config_hash", hex64(m.config_hash)}};
  j["n_trajectories"] = m.n_trajectories;
  j["horizon"] = m.horizon;
  j["grid"] = {{"width", m.width}, {"height", m.height}};
  j["dt"] = m.dt;
  j["master_seed"] = m.master_seed;
  nlohmann::ordered_json trajs = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < m.files.size(); ++i) {
    nlohmann::ordered_json t{{"id", i}, {"file", m.files[i]}, {"seed", hex64(m.seeds[i])}};
    if (!m.splits.empty()) t["split"] = to_string(m.splits[i]);
    trajs.push_back(t);
  }
  j["trajectories"] = trajs;
  if (!m.splits.empty()) {
    j["split"] = {{"fractions", m.fractions},
                  {"seed", m.split_seed},
                  {"sizes",
                   {{"surrogate", m.ids(Split::surrogate).size()},
                    {"rl", m.ids(Split::rl).size()},
                    {"test", m.ids(Split::test).size()}}}};
  }
  return j.dump(2) + "\n";
}

DatasetManifest manifest_from_json(const std::string& text) {
  DatasetManifest m;
  try {
    const auto j = nlohmann::json::parse(text);
    m.dataset_id = j.at("dataset_id").get<std::string>();
    m.simulator_kind = j.at("simulator").at("kind").get<std::string>();
    m.simulator_config = j.at("simulator").at("config").get<std::string>();
    m.config_hash = parse_hex64(j.at("simulator").at("config_hash").get<std::string>());
    m.n_trajectories = j.at("n_trajectories").get<int>();
    m.horizon = j.at("horizon").get<int>();
    m.width = j.at("grid").at("width").get<int>();
    m.height = j.at("grid").at("height").get<int>();
    m.dt = j.at("dt").get<double>();
    m.master_seed = j.at("master_seed").get<std::uint64_t>();
    bool has_split = false;
    for (const auto& t : j.at("trajectories")) {
      m.files.push_back(t.at("file").get<std::string>());
      m.seeds.push_back(parse_hex64(t.at("seed").get<std::string>()));
      if (t.contains("split")) {
        has_split = true;
        m.splits.push_back(parse_split(t.at("split").get<std::string>()));
      }
    }
    if (has_split) {
      m.fractions = j.at("split").at("fractions").get<std::array<double, 3>>();
      m.split_seed = j.at("split").at("seed").get<std::uint64_t>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatError::Kind::io, std::string("manifest: ") + e.what());
  }
  m.validate();
  return m;
}

void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  const std::string text = manifest_to_json(m);
  io::write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  return manifest_from_json(std::string(bytes.begin(), bytes.end()));
}

std::uint64_t trajectory_seed(std::uint64_t master_seed, std::uint64_t traj_id) {
  return nn::derive_seed(master_seed, traj_id, "trajectory");
}

Trajectory stored_trajectory(Trajectory traj) {
  for (auto& s : traj.states) s = round_to_storage(s);
  return traj;
}

DatasetManifest generate_dataset(const Simulator& sim, const std::string& simulator_kind, int n, int horizon,
                                 std::uint64_t master_seed, const std::filesystem::path& dir,
                                 const InitialConditionSampler& sampler, int jobs) {
  if (n < 1) throw InvalidArgument("generate_dataset: n must be >= 1");
  if (horizon < 1) throw InvalidArgument("generate_dataset: horizon must be >= 1");
  std::filesystem::create_directories(dir);
  DatasetManifest m;
  m.simulator_kind = simulator_kind;
  m.simulator_config = sim.describe();
  m.config_hash = nn::fnv1a(simulator_kind + " " + m.simulator_config);
  m.n_trajectories = n;
  m.horizon = horizon;
  m.width = sim.width();
  m.height = sim.height();
  m.dt = sim.dt();
  m.master_seed = master_seed;
  m.dataset_id = hex64(nn::fnv1a(hex64(m.config_hash) + " n=" + std::to_string(n) + " T=" + std::to_string(horizon) +
                                 " seed=" + std::to_string(master_seed)));
  for (int i = 0; i < n; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "traj_%05d.hytj", i);
    m.files.emplace_back(name);
    m.seeds.push_back(trajectory_seed(master_seed, static_cast<std::uint64_t>(i)));
  }

  // A manifest from another configuration must not survive a partial run.
  const auto manifest_path = dir / "manifest.json";
  if (std::filesystem::exists(manifest_path)) {
    bool same = false;
    try {
      same = load_manifest(manifest_path).dataset_id == m.dataset_id;
    } catch (const Error&) {
    }
    if (!same) std::filesystem::remove(manifest_path);
  }

  std::vector<std::string> failures(static_cast<std::size_t>(n));
  int reused = 0;
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, jobs)) reduction(+ : reused)
  for (int i = 0; i < n; ++i) {
    const auto path = dir / m.files[i];
    try {
      if (std::filesystem::exists(path)) {
        try {
          double dt = 0.0;
          const Trajectory t = load_trajectory(path, &dt);
          if (t.horizon() == horizon && t.states.front().concentration.width() == m.width &&
              t.states.front().concentration.height() == m.height && dt == m.dt) {
            ++reused;
            continue;
          }
        } catch (const FormatError&) {
        }
      }
      std::mt19937_64 rng(m.seeds[i]);
      const SimState init = SimState::from_concentration(round_to_storage(sampler(m.width, m.height, rng)), 0, m.dt);
      Trajectory t = simulate(sim, init, horizon);
      save_trajectory(stored_trajectory(std::move(t)), m.dt, path);
    } catch (const std::exception& e) {
      failures[i] = m.files[i] + ": " + e.what();
    }
  }
  for (const auto& f : failures)
    if (!f.empty()) throw Error("generate_dataset: " + f);
  spdlog::info("generated {} trajectories ({} reused) in {}", n - reused, reused, dir.string());
  save_manifest(m, manifest_path);
  return m;
}

std::array<int, 3> split_sizes(int n, std::array<double, 3> fractions) {
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0)) throw InvalidArgument("split fractions must be non-negative");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw InvalidArgument("split fractions sum to " + std::to_string(sum) + ", expected 1");
  std::array<int, 3> sizes{};
  std::array<double, 3> rem{};
  int assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double q = fractions[i] * n;
    sizes[i] = static_cast<int>(std::floor(q + 1e-9));
    rem[i] = q - sizes[i];
    assigned += sizes[i];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return rem[a] > rem[b]; });
  for (int k = 0; assigned < n; ++k, ++assigned) ++sizes[order[k % 3]];
  return sizes;
}

DatasetManifest split_dataset(DatasetManifest manifest, std::array<double, 3> fractions, std::uint64_t seed) {
  const int n = manifest.n_trajectories;
  const auto sizes = split_sizes(n, fractions);
  std::vector<int> ids(static_cast<std::size_t>(n));
  std::iota(ids.begin(), ids.end(), 0);
  std::mt19937_64 rng(nn::derive_seed(seed, 0, "split"));
  std::shuffle(ids.begin(), ids.end(), rng);
  manifest.splits.assign(static_cast<std::size_t>(n), Split::test);
  int pos = 0;
  for (int s = 0; s < 3; ++s)
    for (int k = 0; k < sizes[s]; ++k) manifest.splits[static_cast<std::size_t>(ids[pos++])] = static_cast<Split>(s);
  manifest.fractions = fractions;
  manifest.split_seed = seed;
  return manifest;
}

std::vector<Trajectory> load_split(const std::filesystem::path& dir, const DatasetManifest& m, Split s) {
  if (m.splits.empty()) throw InvalidArgument("dataset has not been split");
  std::vector<Trajectory> out;
  for (auto id : m.ids(s)) {
    Trajectory t = load_trajectory(dir / m.files[id]);
    t.seed = m.seeds[id];
    t.config_id = m.simulator_config;
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace hyper
