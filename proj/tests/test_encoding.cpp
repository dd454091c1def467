#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "strk/encoding.hpp"

using namespace strk;
namespace fs = std::filesystem;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) {
    path = (fs::temp_directory_path() / name).string();
    fs::remove(path);
  }
  ~TempFile() { fs::remove(path); }
};

std::vector<char> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("single-joint window arithmetic") {
  const ArmSpec spec = ArmSpec::four_geared(1);
  const GearState gears = GearState::neutral(spec);
  const ChainPoses poses = forward_chain(gears, spec);
  const EncodedSample s = encode(gears, poses, 50.0, spec);

  CHECK(s.length() == 12);
  CHECK(s.inputs.cols() == 4);  // 3 actuation lines + 1 clock line
  // Clock column carries exactly 7 ones on steps 5..11.
  int ones = 0;
  for (int t = 0; t < 12; ++t) {
    if (s.inputs(t, 3) == 1.0) {
      ones++;
      CHECK(t >= 5);
      CHECK(s.output_mask[t] == 1);
    } else {
      CHECK(s.output_mask[t] == 0);
    }
  }
  CHECK(ones == 7);
}

TEST_CASE("window partition: inputs live only inside their joint's window") {
  const ArmSpec spec = ArmSpec::four_geared(3);
  std::mt19937_64 rng(2);
  const GearState gears = sample_random_gears(spec, rng);
  const ChainPoses poses = forward_chain(gears, spec);
  const Dataset ds{spec, {{gears, poses.joints}}, 56.0};
  const EncodedSample s = ds.encode_sample(0);

  CHECK(s.length() == 36);
  for (int k = 0; k < 3; ++k)
    for (int t = 0; t < 36; ++t) {
      const bool inside = t / kStepsPerJoint == k;
      if (inside) {
        CHECK(s.inputs(t, 0) == gears.values(k, 0));
        CHECK(s.inputs(t, 1) == gears.values(k, 1));
        CHECK(s.inputs(t, 2) == gears.values(k, 2));
      }
      // Clock line k is on only inside window k's output phase.
      const bool clock_on = inside && t % kStepsPerJoint >= kClockOnset;
      CHECK(s.inputs(t, 3 + k) == (clock_on ? 1.0 : 0.0));
    }
}

TEST_CASE("neutral arm targets are evenly spaced identity poses") {
  const ArmSpec spec = ArmSpec::four_geared(4);
  const GearState gears = GearState::neutral(spec);
  const ChainPoses poses = forward_chain(gears, spec);
  const double d = spec.neutral_extension_mm();
  const EncodedSample s = encode(gears, poses, d, spec);
  for (int k = 0; k < 4; ++k) {
    CHECK(s.targets(k, 0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(s.targets(k, 1) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(s.targets(k, 2) == doctest::Approx(k + 1.0).epsilon(1e-12));  // k*d / d
    CHECK(s.targets(k, 3) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.targets.row(k).tail(3).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("target quaternions are canonicalized to w >= 0") {
  const ArmSpec spec = ArmSpec::three_geared(8);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const GearState gears = sample_random_gears(spec, rng);
    const ChainPoses poses = forward_chain(gears, spec);
    const EncodedSample s = encode(gears, poses, 60.0, spec);
    for (int k = 0; k < 8; ++k) CHECK(s.targets(k, 3) >= 0.0);
  }
}

TEST_CASE("decode recovers the gear values exactly") {
  const ArmSpec spec = ArmSpec::four_geared(5);
  std::mt19937_64 rng(4);
  const GearState gears = sample_random_gears(spec, rng);
  const ChainPoses poses = forward_chain(gears, spec);
  const EncodedSample s = encode(gears, poses, 56.0, spec);
  const GearState decoded = decode_gears(s.inputs, spec);
  CHECK(decoded.values == gears.values);
}

TEST_CASE("dataset generation is seed deterministic and index stable") {
  const ArmSpec spec = ArmSpec::four_geared(3);
  const Dataset a = generate_dataset(spec, 50, 1234);
  const Dataset b = generate_dataset(spec, 50, 1234);
  CHECK(a.normalization_mm == b.normalization_mm);
  for (size_t i = 0; i < 50; ++i)
    CHECK(a.samples[i].gears.values == b.samples[i].gears.values);

  // Prefix stability: sample i depends only on (seed, i).
  const Dataset c = generate_dataset(spec, 10, 1234);
  for (size_t i = 0; i < 10; ++i)
    CHECK(a.samples[i].gears.values == c.samples[i].gears.values);
}

TEST_CASE("all-neutral dataset normalization equals the module pitch") {
  const ArmSpec spec = ArmSpec::four_geared(4);
  const GearState gears = GearState::neutral(spec);
  const ChainPoses poses = forward_chain(gears, spec);
  Dataset ds;
  ds.spec = spec;
  for (int i = 0; i < 5; ++i) ds.samples.push_back({gears, poses.joints});
  double total = 0.0;
  for (const ArmSample& s : ds.samples) total += mean_inter_joint_distance(s.joint_poses);
  ds.normalization_mm = total / 5.0;
  CHECK(ds.normalization_mm == doctest::Approx(spec.neutral_extension_mm()).epsilon(1e-12));
}

TEST_CASE("normalized targets respect the reach bound") {
  const ArmSpec spec = ArmSpec::three_geared(5);
  const Dataset ds = generate_dataset(spec, 200, 77);
  const double bound =
      spec.n_joints * spec.max_extension_mm() / ds.normalization_mm;
  for (size_t i = 0; i < ds.size(); ++i) {
    const EncodedSample s = ds.encode_sample(i);
    CHECK(s.targets.leftCols(3).cwiseAbs().maxCoeff() <= bound);
  }
}

TEST_CASE("dataset file round trip is lossless and byte stable") {
  const ArmSpec spec = ArmSpec::three_geared(4);
  const Dataset ds = generate_dataset(spec, 64, 99);
  TempFile f1("strk_ds_a.bin"), f2("strk_ds_b.bin");
  save_dataset(ds, f1.path);
  save_dataset(ds, f2.path);
  CHECK(read_bytes(f1.path) == read_bytes(f2.path));

  const Dataset loaded = load_dataset(f1.path);
  CHECK(loaded.spec == ds.spec);
  CHECK(loaded.normalization_mm == ds.normalization_mm);
  REQUIRE(loaded.size() == ds.size());
  for (size_t i = 0; i < ds.size(); ++i) {
    CHECK(loaded.samples[i].gears.values == ds.samples[i].gears.values);
    for (int k = 0; k < spec.n_joints; ++k) {
      CHECK(loaded.samples[i].joint_poses[k].p == ds.samples[i].joint_poses[k].p);
      CHECK(loaded.samples[i].joint_poses[k].q.coeffs() ==
            ds.samples[i].joint_poses[k].q.coeffs());
    }
  }
}

TEST_CASE("corrupted dataset files raise distinct errors") {
  const ArmSpec spec = ArmSpec::four_geared(2);
  const Dataset ds = generate_dataset(spec, 8, 5);
  TempFile f("strk_ds_corrupt.bin");
  save_dataset(ds, f.path);

  SUBCASE("bad magic is a format error") {
    auto bytes = read_bytes(f.path);
    bytes[0] = 'X';
    std::ofstream(f.path, std::ios::binary).write(bytes.data(), bytes.size());
    CHECK_THROWS_AS(load_dataset(f.path), FormatError);
  }
  SUBCASE("bad version is a version error") {
    auto bytes = read_bytes(f.path);
    bytes[4] = 0x7F;
    std::ofstream(f.path, std::ios::binary).write(bytes.data(), bytes.size());
    CHECK_THROWS_AS(load_dataset(f.path), VersionError);
  }
  SUBCASE("flipped payload byte is a checksum error") {
    auto bytes = read_bytes(f.path);
    // Last payload byte: part of a pose record, so no range check fires
    // before the trailing CRC comparison.
    bytes[bytes.size() - 5] ^= 0x01;
    std::ofstream(f.path, std::ios::binary).write(bytes.data(), bytes.size());
    CHECK_THROWS_AS(load_dataset(f.path), ChecksumError);
  }
  SUBCASE("truncation is its own error") {
    auto bytes = read_bytes(f.path);
    bytes.resize(bytes.size() / 2);
    std::ofstream(f.path, std::ios::binary).write(bytes.data(), bytes.size());
    CHECK_THROWS_AS(load_dataset(f.path), TruncationError);
  }
}

TEST_CASE("csv export writes one row per sample") {
  const ArmSpec spec = ArmSpec::four_geared(2);
  const Dataset ds = generate_dataset(spec, 10, 5);
  TempFile f("strk_ds.csv");
  export_dataset_csv(ds, f.path);
  std::ifstream in(f.path);
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 11);  // header + 10 samples
}
