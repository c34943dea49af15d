#include <doctest.h>

#include <filesystem>
#include <set>

#include "helpers.hpp"
#include "hyper/data.hpp"
#include "hyper/error.hpp"
#include "hyper/io.hpp"

using namespace hyper;

namespace {

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name) : path(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

Trajectory small_traj(std::uint64_t seed) {
  NavierStokesConfig cfg;
  cfg.width = 12;
  cfg.height = 10;
  std::mt19937_64 rng(seed);
  return stored_trajectory(simulate(NavierStokesSimulator(cfg), SimState::from_concentration(sample_plumes(12, 10, rng)), 3));
}

FormatError::Kind decode_kind(std::span<const std::uint8_t> bytes) {
  try {
    decode_trajectory(bytes);
  } catch (const FormatError& e) {
    return e.kind();
  }
  FAIL("expected FormatError");
  return FormatError::Kind::io;
}

}  // namespace

TEST_CASE("trajectory files round trip") {
  const auto t = small_traj(1);
  const auto bytes = encode_trajectory(t, 1.5);
  double dt = 0.0;
  const auto back = decode_trajectory(bytes, &dt);
  CHECK(dt == 1.5);
  CHECK(back.states == t.states);
  CHECK(encode_trajectory(back, dt) == bytes);

  TempDir dir("hyper_data_rt");
  save_trajectory(t, 1.5, dir.path / "a.hytj");
  CHECK(io::read_file(dir.path / "a.hytj") == bytes);
  CHECK(load_trajectory(dir.path / "a.hytj").states == t.states);
}

TEST_CASE("corrupted trajectory files") {
  const auto bytes = encode_trajectory(small_traj(2), 1.5);
  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x01;
  CHECK(decode_kind(flipped) == FormatError::Kind::checksum);

  auto versioned = bytes;
  versioned[4] = 9;
  CHECK(decode_kind(versioned) == FormatError::Kind::version);

  CHECK(decode_kind(std::span(bytes).first(bytes.size() - 5)) == FormatError::Kind::truncated);
  CHECK(decode_kind(std::span(bytes).first(3)) == FormatError::Kind::truncated);
  auto longer = bytes;
  longer.push_back(0);
  CHECK(decode_kind(longer) != FormatError::Kind::io);

  auto magic = bytes;
  magic[1] = 'Z';
  CHECK(decode_kind(magic) == FormatError::Kind::bad_magic);
  CHECK_THROWS_AS(load_trajectory("/nonexistent/x.hytj"), FormatError);
}

TEST_CASE("split sizes") {
  CHECK(split_sizes(10, {0.4, 0.4, 0.2}) == std::array<int, 3>{4, 4, 2});
  CHECK(split_sizes(7, {1.0, 0.0, 0.0}) == std::array<int, 3>{7, 0, 0});
  CHECK(split_sizes(120, {5.0 / 12, 5.0 / 12, 1.0 / 6}) == std::array<int, 3>{50, 50, 20});
  CHECK(split_sizes(11, {1.0 / 3, 1.0 / 3, 1.0 / 3}) == std::array<int, 3>{4, 4, 3});
  CHECK_THROWS_AS(split_sizes(10, {0.5, 0.5, 0.5}), InvalidArgument);
}

TEST_CASE("dataset generation, resume and split") {
  TempDir dir("hyper_data_gen");
  NavierStokesConfig cfg;
  cfg.width = cfg.height = 12;
  NavierStokesSimulator sim(cfg);

  const auto one = generate_dataset(sim, "ns", 1, 2, 5, dir.path / "one");
  CHECK(load_trajectory(dir.path / "one" / one.files[0]).states.size() == 3);

  const auto m = generate_dataset(sim, "ns", 10, 3, 42, dir.path / "a");
  const auto again = generate_dataset(sim, "ns", 10, 3, 42, dir.path / "b");
  for (std::size_t i = 0; i < m.files.size(); ++i)
    CHECK(io::read_file(dir.path / "a" / m.files[i]) == io::read_file(dir.path / "b" / again.files[i]));
  CHECK(manifest_to_json(m) == manifest_to_json(again));

  const auto before = std::filesystem::last_write_time(dir.path / "a" / m.files[3]);
  const auto resumed = generate_dataset(sim, "ns", 10, 3, 42, dir.path / "a");
  CHECK(manifest_to_json(resumed) == manifest_to_json(m));
  CHECK(std::filesystem::last_write_time(dir.path / "a" / m.files[3]) == before);

  // a corrupted file is regenerated
  auto bytes = io::read_file(dir.path / "a" / m.files[2]);
  bytes[20] ^= 0xff;
  io::write_file_atomic(dir.path / "a" / m.files[2], bytes);
  generate_dataset(sim, "ns", 10, 3, 42, dir.path / "a");
  CHECK(io::read_file(dir.path / "a" / m.files[2]) == io::read_file(dir.path / "b" / m.files[2]));

  const auto s1 = split_dataset(m, {0.4, 0.4, 0.2}, 3);
  const auto s2 = split_dataset(m, {0.4, 0.4, 0.2}, 3);
  CHECK(s1.splits == s2.splits);
  CHECK(s1.ids(Split::surrogate).size() == 4);
  CHECK(s1.ids(Split::rl).size() == 4);
  CHECK(s1.ids(Split::test).size() == 2);
  std::set<std::uint64_t> all;
  for (auto s : {Split::surrogate, Split::rl, Split::test})
    for (auto id : s1.ids(s)) CHECK(all.insert(id).second);
  CHECK(all.size() == 10);

  save_manifest(s1, dir.path / "a" / "manifest.json");
  const auto loaded = load_manifest(dir.path / "a" / "manifest.json");
  CHECK(manifest_to_json(loaded) == manifest_to_json(s1));
  CHECK(loaded.splits == s1.splits);
  const auto test_split = load_split(dir.path / "a", loaded, Split::test);
  REQUIRE(test_split.size() == 2);
  CHECK(test_split[0].seed == loaded.seeds[loaded.ids(Split::test)[0]]);
}

TEST_CASE("split on many manifests stays disjoint and covering") {
  DatasetManifest m;
  for (int n : {1, 2, 5, 17, 120}) {
    m.n_trajectories = n;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto s = split_dataset(m, {0.5, 0.3, 0.2}, seed);
      REQUIRE(s.splits.size() == static_cast<std::size_t>(n));
      CHECK(s.ids(Split::surrogate).size() + s.ids(Split::rl).size() + s.ids(Split::test).size() ==
            static_cast<std::size_t>(n));
    }
  }
}
