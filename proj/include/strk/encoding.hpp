#pragma once

#include <string>
#include <vector>

#include "strk/kinematics.hpp"
#include "strk/network.hpp"

namespace strk {

// Sequence layout: each joint owns a window of 12 steps. Its actuation
// values are injected on all 12; from step 5 of the window the joint's clock
// bit turns on and the 7 remaining steps carry the pose supervision.
constexpr int kStepsPerJoint = 12;
constexpr int kClockOnset = 5;
constexpr int kOutputStepsPerJoint = kStepsPerJoint - kClockOnset;
// Per-joint pose target layout: normalized position (3) + quaternion wxyz (4).
constexpr int kPoseDim = 7;

inline int sequence_length(int n_joints) { return kStepsPerJoint * n_joints; }
// Actuation values + one clock line per joint.
inline int input_width(int n_joints) { return 3 + n_joints; }

struct EncodedSample {
  Matrix inputs;                  // T x n_in, T = 12 * n_joints
  Matrix targets;                 // n_joints x 7
  std::vector<uint8_t> output_mask;  // length T; 1 on supervised steps

  Eigen::Index length() const { return inputs.rows(); }
  int n_joints() const { return static_cast<int>(targets.rows()); }
};

// Builds the input sequence and per-joint targets for one configuration.
// Positions are divided by `normalization_mm`; target quaternions are stored
// with w >= 0. Poses must come from forward_chain on the same gears.
EncodedSample encode(const GearState& gears, const ChainPoses& poses,
                     double normalization_mm, const ArmSpec& spec);

// Recovers the per-joint actuation values from an encoded input block.
GearState decode_gears(const Matrix& inputs, const ArmSpec& spec);

struct ArmSample {
  GearState gears;
  std::vector<Pose> joint_poses;
};

struct Dataset {
  ArmSpec spec;
  std::vector<ArmSample> samples;
  double normalization_mm = 0.0;  // mean inter-joint distance over the dataset

  size_t size() const { return samples.size(); }
  EncodedSample encode_sample(size_t i) const;
};

// Mean of |p_k - p_{k-1}| along one chain (base counts as p_{-1} = origin).
double mean_inter_joint_distance(const std::vector<Pose>& joint_poses);

// n_samples independent draws; sample i uses the RNG stream (seed, i), so
// content does not depend on generation order.
Dataset generate_dataset(const ArmSpec& spec, size_t n_samples, uint64_t seed,
                         double edge_probability = 0.05);

// Binary container: "STRK" magic, format version, arm spec block, samples as
// packed f64 records, trailing CRC32. Byte-exact for identical inputs.
void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

// One row per sample: gear values, then the end-effector pose.
void export_dataset_csv(const Dataset& dataset, const std::string& path);

}  // namespace strk
