#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <random>
#include <vector>

#include "strk/errors.hpp"

namespace strk {

enum class ArmVariant : uint32_t { ThreeGeared = 0, FourGeared = 1 };

// Geometric description of a modular trunk arm. All lengths in millimeters,
// tilt_max in degrees per axis.
//
// Three-geared joints are driven by three linear gears (range [0,1]) on a
// circle of gear_radius; gear travel equals stretch_max, so equal gears give
// pure vertical extension in [0, stretch_max]. The default radius is chosen
// so single-gear extremes tilt the joint by exactly tilt_max.
//
// Four-geared joints take (tilt_x, tilt_y, stretch), each in [-1,1]. Tilts
// map linearly to [-tilt_max, tilt_max]; stretch moves the joint height by up
// to +-stretch_max/2 around its midpoint, scaled down by (1 - max |tilt|) so
// the height is frozen at maximal tilt.
struct ArmSpec {
  ArmVariant variant = ArmVariant::FourGeared;
  int n_joints = 1;
  double tilt_max_deg = 16.0;
  double stretch_max_mm = 22.0;
  double base_height_mm = 45.0;
  double gear_radius_mm = 0.0;

  static ArmSpec three_geared(int n_joints);
  static ArmSpec four_geared(int n_joints);

  int gears_per_joint() const { return 3; }
  double tilt_max_rad() const;
  // Per-module extension at mid actuation; also the straight-arm module pitch.
  double neutral_extension_mm() const { return base_height_mm + stretch_max_mm / 2.0; }
  // No configuration can move a joint further than this from its parent.
  double max_extension_mm() const { return base_height_mm + stretch_max_mm; }

  double gear_lo() const { return variant == ArmVariant::ThreeGeared ? 0.0 : -1.0; }
  double gear_hi() const { return 1.0; }
  double neutral_gear() const { return variant == ArmVariant::ThreeGeared ? 0.5 : 0.0; }

  void validate() const;
  bool operator==(const ArmSpec&) const = default;
};

// Position + orientation of a frame. Quaternions are kept unit-length and
// canonicalized to w >= 0 (q and -q are the same rotation).
struct Pose {
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  Eigen::Quaterniond q = Eigen::Quaterniond::Identity();

  static Pose identity() { return {}; }
  Pose compose(const Eigen::Vector3d& translation, const Eigen::Quaterniond& rotation) const;
  void canonicalize();
};

// Actuation of every joint: one row of 3 values per joint, each within its
// variant's declared range. Out-of-range construction throws; callers that
// optimize gears clamp first.
struct GearState {
  Eigen::MatrixXd values;  // n_joints x 3

  static GearState neutral(const ArmSpec& spec);
  static GearState from_values(const ArmSpec& spec, Eigen::MatrixXd v);
  static GearState from_flat(const ArmSpec& spec, const Eigen::VectorXd& flat);

  Eigen::VectorXd flatten() const;
  void clamp_to(const ArmSpec& spec);
  int n_joints() const { return static_cast<int>(values.rows()); }
};

struct JointTransform {
  Eigen::Vector3d translation;
  Eigen::Quaterniond rotation;
};

// Local transform of one joint given its actuation row.
JointTransform joint_transform(const Eigen::Vector3d& joint_gears, const ArmSpec& spec);

// Attachment points of the three linear gears in the joint's base frame
// (three-geared variant); the plane through them defines the joint's tilt.
std::array<Eigen::Vector3d, 3> gear_attachment_points(const Eigen::Vector3d& gears,
                                                      const ArmSpec& spec);

// Cumulative poses along the chain. joints[k] is the distal frame of module
// k (base at origin, identity orientation); the end-effector is mounted
// rigidly on the last module, so its pose equals joints.back().
struct ChainPoses {
  std::vector<Pose> joints;
  const Pose& end_effector() const { return joints.back(); }
};

ChainPoses forward_chain(const GearState& gears, const ArmSpec& spec);

// Uniform draw over the actuation box. With probability edge_probability a
// joint is pinned to range extremes, covering heavily twisted poses. Stretch
// is clamped back into its feasible interval afterwards (a no-op for the
// box parameterizations used here, kept as the single place the coupling
// rule would act).
GearState sample_random_gears(const ArmSpec& spec, std::mt19937_64& rng,
                              double edge_probability = 0.05);

}  // namespace strk
