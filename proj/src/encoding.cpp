#include "strk/encoding.hpp"

#include <fstream>
#include <iomanip>

#include "strk/serialize.hpp"

namespace strk {

namespace {

constexpr char kDatasetMagic[4] = {'S', 'T', 'R', 'K'};
constexpr uint32_t kDatasetVersion = 1;

void write_arm_spec(BinaryWriter& w, const ArmSpec& spec) {
  w.u32(static_cast<uint32_t>(spec.variant));
  w.u32(static_cast<uint32_t>(spec.n_joints));
  w.f64(spec.tilt_max_deg);
  w.f64(spec.stretch_max_mm);
  w.f64(spec.base_height_mm);
  w.f64(spec.gear_radius_mm);
}

ArmSpec read_arm_spec(BinaryReader& r) {
  ArmSpec spec;
  const uint32_t variant = r.u32();
  if (variant > 1) throw FormatError("unknown arm variant tag");
  spec.variant = static_cast<ArmVariant>(variant);
  spec.n_joints = static_cast<int>(r.u32());
  spec.tilt_max_deg = r.f64();
  spec.stretch_max_mm = r.f64();
  spec.base_height_mm = r.f64();
  spec.gear_radius_mm = r.f64();
  spec.validate();
  return spec;
}

}  // namespace

EncodedSample encode(const GearState& gears, const ChainPoses& poses,
                     double normalization_mm, const ArmSpec& spec) {
  const int n = spec.n_joints;
  if (gears.n_joints() != n || static_cast<int>(poses.joints.size()) != n)
    throw ShapeError("gears/poses joint count does not match spec");
  if (!(normalization_mm > 0.0))
    throw InvalidInputError("normalization must be positive");

  const int T = sequence_length(n);
  EncodedSample sample;
  sample.inputs.setZero(T, input_width(n));
  sample.targets.resize(n, kPoseDim);
  sample.output_mask.assign(T, 0);

  for (int k = 0; k < n; ++k) {
    const int window_start = k * kStepsPerJoint;
    for (int s = 0; s < kStepsPerJoint; ++s) {
      const int t = window_start + s;
      sample.inputs.block(t, 0, 1, 3) = gears.values.row(k);
      if (s >= kClockOnset) {
        sample.inputs(t, 3 + k) = 1.0;
        sample.output_mask[t] = 1;
      }
    }
    Pose target = poses.joints[k];
    target.canonicalize();
    sample.targets(k, 0) = target.p.x() / normalization_mm;
    sample.targets(k, 1) = target.p.y() / normalization_mm;
    sample.targets(k, 2) = target.p.z() / normalization_mm;
    sample.targets(k, 3) = target.q.w();
    sample.targets(k, 4) = target.q.x();
    sample.targets(k, 5) = target.q.y();
    sample.targets(k, 6) = target.q.z();
  }
  return sample;
}

GearState decode_gears(const Matrix& inputs, const ArmSpec& spec) {
  const int n = spec.n_joints;
  if (inputs.rows() != sequence_length(n) || inputs.cols() != input_width(n))
    throw ShapeError("encoded input block does not match spec");
  Eigen::MatrixXd v(n, 3);
  for (int k = 0; k < n; ++k) v.row(k) = inputs.block(k * kStepsPerJoint, 0, 1, 3);
  return GearState::from_values(spec, std::move(v));
}

EncodedSample Dataset::encode_sample(size_t i) const {
  const ArmSample& s = samples.at(i);
  ChainPoses poses{s.joint_poses};
  return encode(s.gears, poses, normalization_mm, spec);
}

double mean_inter_joint_distance(const std::vector<Pose>& joint_poses) {
  if (joint_poses.empty()) throw InvalidInputError("empty pose chain");
  double total = 0.0;
  Eigen::Vector3d prev = Eigen::Vector3d::Zero();
  for (const Pose& pose : joint_poses) {
    total += (pose.p - prev).norm();
    prev = pose.p;
  }
  return total / static_cast<double>(joint_poses.size());
}

Dataset generate_dataset(const ArmSpec& spec, size_t n_samples, uint64_t seed,
                         double edge_probability) {
  spec.validate();
  if (n_samples < 1) throw InvalidInputError("n_samples must be >= 1");
  Dataset ds;
  ds.spec = spec;
  ds.samples.reserve(n_samples);
  double distance_sum = 0.0;
  for (size_t i = 0; i < n_samples; ++i) {
    std::mt19937_64 rng = stream_rng(seed, i);
    GearState gears = sample_random_gears(spec, rng, edge_probability);
    ChainPoses chain = forward_chain(gears, spec);
    distance_sum += mean_inter_joint_distance(chain.joints);
    ds.samples.push_back({std::move(gears), std::move(chain.joints)});
  }
  ds.normalization_mm = distance_sum / static_cast<double>(n_samples);
  return ds;
}

void save_dataset(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  BinaryWriter w(out);
  w.bytes(kDatasetMagic, sizeof kDatasetMagic);
  w.u32(kDatasetVersion);
  write_arm_spec(w, dataset.spec);
  w.u64(dataset.samples.size());
  w.f64(dataset.normalization_mm);
  for (const ArmSample& s : dataset.samples) {
    for (int j = 0; j < s.gears.values.rows(); ++j)
      for (int c = 0; c < 3; ++c) w.f64(s.gears.values(j, c));
    for (const Pose& pose : s.joint_poses) {
      w.f64(pose.p.x());
      w.f64(pose.p.y());
      w.f64(pose.p.z());
      w.f64(pose.q.w());
      w.f64(pose.q.x());
      w.f64(pose.q.y());
      w.f64(pose.q.z());
    }
  }
  w.finish_with_crc();
  if (!out) throw IoError("write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  BinaryReader r(in);
  char magic[4];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kDatasetMagic, sizeof magic) != 0)
    throw FormatError("not a dataset file (bad magic): " + path);
  const uint32_t version = r.u32();
  if (version != kDatasetVersion)
    throw VersionError("unsupported dataset version " + std::to_string(version));
  Dataset ds;
  ds.spec = read_arm_spec(r);
  const uint64_t n = r.u64();
  ds.normalization_mm = r.f64();
  ds.samples.reserve(n);
  for (uint64_t i = 0; i < n; ++i) {
    Eigen::MatrixXd v(ds.spec.n_joints, 3);
    for (int j = 0; j < ds.spec.n_joints; ++j)
      for (int c = 0; c < 3; ++c) v(j, c) = r.f64();
    ArmSample s{GearState::from_values(ds.spec, std::move(v)), {}};
    s.joint_poses.resize(ds.spec.n_joints);
    for (Pose& pose : s.joint_poses) {
      pose.p.x() = r.f64();
      pose.p.y() = r.f64();
      pose.p.z() = r.f64();
      double qw = r.f64(), qx = r.f64(), qy = r.f64(), qz = r.f64();
      pose.q = Eigen::Quaterniond(qw, qx, qy, qz);
    }
    ds.samples.push_back(std::move(s));
  }
  r.verify_trailing_crc();
  return ds;
}

void export_dataset_csv(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << std::setprecision(17);
  for (int j = 0; j < dataset.spec.n_joints; ++j)
    for (int c = 0; c < 3; ++c) out << "g" << j << "_" << c << ",";
  out << "ee_x_mm,ee_y_mm,ee_z_mm,ee_qw,ee_qx,ee_qy,ee_qz\n";
  for (const ArmSample& s : dataset.samples) {
    for (int j = 0; j < s.gears.values.rows(); ++j)
      for (int c = 0; c < 3; ++c) out << s.gears.values(j, c) << ",";
    const Pose& ee = s.joint_poses.back();
    out << ee.p.x() << "," << ee.p.y() << "," << ee.p.z() << "," << ee.q.w() << ","
        << ee.q.x() << "," << ee.q.y() << "," << ee.q.z() << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace strk
