#include "strk/kinematics.hpp"

#include <cmath>
#include <numbers>

namespace strk {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

// Gear angular placement around the joint axis.
constexpr double kThreeGearAnglesDeg[3] = {90.0, 210.0, 330.0};

Eigen::Quaterniond rotation_x(double angle) {
  return Eigen::Quaterniond(Eigen::AngleAxisd(angle, Eigen::Vector3d::UnitX()));
}
Eigen::Quaterniond rotation_y(double angle) {
  return Eigen::Quaterniond(Eigen::AngleAxisd(angle, Eigen::Vector3d::UnitY()));
}

// Minimal rotation taking the parent z axis onto `target` (unit length).
Eigen::Quaterniond tilt_z_onto(const Eigen::Vector3d& target) {
  const Eigen::Vector3d z = Eigen::Vector3d::UnitZ();
  const Eigen::Vector3d axis = z.cross(target);
  const double sin_angle = axis.norm();
  if (sin_angle < 1e-15)
    return target.z() > 0 ? Eigen::Quaterniond::Identity()
                          : Eigen::Quaterniond(0, 1, 0, 0);  // straight down
  const double angle = std::atan2(sin_angle, z.dot(target));
  return Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis / sin_angle));
}

}  // namespace

double ArmSpec::tilt_max_rad() const { return tilt_max_deg * kDegToRad; }

ArmSpec ArmSpec::three_geared(int n_joints) {
  ArmSpec spec;
  spec.variant = ArmVariant::ThreeGeared;
  spec.n_joints = n_joints;
  spec.tilt_max_deg = 40.0;
  spec.stretch_max_mm = 55.0;
  spec.base_height_mm = 60.0;
  // Radius at which single-gear extremes tilt the attachment plane by exactly
  // tilt_max: tan(tilt_max) = 2L / (3r) with gear travel L = stretch_max.
  spec.gear_radius_mm = 2.0 * spec.stretch_max_mm / (3.0 * std::tan(spec.tilt_max_rad()));
  return spec;
}

ArmSpec ArmSpec::four_geared(int n_joints) {
  ArmSpec spec;
  spec.variant = ArmVariant::FourGeared;
  spec.n_joints = n_joints;
  spec.tilt_max_deg = 16.0;
  spec.stretch_max_mm = 22.0;
  spec.base_height_mm = 45.0;
  spec.gear_radius_mm = 25.0;  // not used by the four-geared map
  return spec;
}

void ArmSpec::validate() const {
  if (n_joints < 1) throw InvalidInputError("n_joints must be >= 1");
  if (!(tilt_max_deg > 0.0 && tilt_max_deg < 90.0))
    throw InvalidInputError("tilt_max_deg must be in (0, 90)");
  if (!(stretch_max_mm > 0.0)) throw InvalidInputError("stretch_max_mm must be > 0");
  if (!(base_height_mm > 0.0)) throw InvalidInputError("base_height_mm must be > 0");
  if (variant == ArmVariant::ThreeGeared && !(gear_radius_mm > 0.0))
    throw InvalidInputError("gear_radius_mm must be > 0");
}

void Pose::canonicalize() {
  q.normalize();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
}

Pose Pose::compose(const Eigen::Vector3d& translation,
                   const Eigen::Quaterniond& rotation) const {
  Pose out;
  out.p = p + q * translation;
  out.q = q * rotation;
  out.canonicalize();
  return out;
}

GearState GearState::neutral(const ArmSpec& spec) {
  GearState g;
  g.values = Eigen::MatrixXd::Constant(spec.n_joints, 3, spec.neutral_gear());
  return g;
}

GearState GearState::from_values(const ArmSpec& spec, Eigen::MatrixXd v) {
  spec.validate();
  if (v.rows() != spec.n_joints || v.cols() != 3)
    throw ShapeError("gear matrix must be n_joints x 3");
  if (!v.allFinite()) throw InvalidInputError("gear values must be finite");
  if ((v.array() < spec.gear_lo()).any() || (v.array() > spec.gear_hi()).any())
    throw InvalidInputError("gear value outside declared range");
  GearState g;
  g.values = std::move(v);
  return g;
}

GearState GearState::from_flat(const ArmSpec& spec, const Eigen::VectorXd& flat) {
  if (flat.size() != spec.n_joints * 3)
    throw ShapeError("flat gear vector must have 3 * n_joints entries");
  Eigen::MatrixXd v(spec.n_joints, 3);
  for (int j = 0; j < spec.n_joints; ++j)
    for (int c = 0; c < 3; ++c) v(j, c) = flat[3 * j + c];
  return from_values(spec, std::move(v));
}

Eigen::VectorXd GearState::flatten() const {
  Eigen::VectorXd flat(values.rows() * 3);
  for (int j = 0; j < values.rows(); ++j)
    for (int c = 0; c < 3; ++c) flat[3 * j + c] = values(j, c);
  return flat;
}

void GearState::clamp_to(const ArmSpec& spec) {
  values = values.array().max(spec.gear_lo()).min(spec.gear_hi());
}

std::array<Eigen::Vector3d, 3> gear_attachment_points(const Eigen::Vector3d& gears,
                                                      const ArmSpec& spec) {
  std::array<Eigen::Vector3d, 3> pts;
  for (int i = 0; i < 3; ++i) {
    const double phi = kThreeGearAnglesDeg[i] * kDegToRad;
    pts[i] = {spec.gear_radius_mm * std::cos(phi), spec.gear_radius_mm * std::sin(phi),
              gears[i] * spec.stretch_max_mm};
  }
  return pts;
}

JointTransform joint_transform(const Eigen::Vector3d& joint_gears, const ArmSpec& spec) {
  if (!joint_gears.allFinite()) throw InvalidInputError("gear values must be finite");
  if ((joint_gears.array() < spec.gear_lo()).any() ||
      (joint_gears.array() > spec.gear_hi()).any())
    throw InvalidInputError("gear value outside declared range");

  JointTransform tf;
  if (spec.variant == ArmVariant::ThreeGeared) {
    // Plane z = c0 + c1 x + c2 y through the three attachment points. For
    // gears at angles 90/210/330 degrees the normal equations collapse to
    // closed form (the angles are equally spaced).
    const double L = spec.stretch_max_mm;
    const double r = spec.gear_radius_mm;
    double sum = 0, cos_moment = 0, sin_moment = 0;
    for (int i = 0; i < 3; ++i) {
      const double phi = kThreeGearAnglesDeg[i] * kDegToRad;
      sum += joint_gears[i];
      cos_moment += joint_gears[i] * std::cos(phi);
      sin_moment += joint_gears[i] * std::sin(phi);
    }
    const double c0 = L * sum / 3.0;
    const double c1 = 2.0 * L * cos_moment / (3.0 * r);
    const double c2 = 2.0 * L * sin_moment / (3.0 * r);
    const Eigen::Vector3d normal = Eigen::Vector3d(-c1, -c2, 1.0).normalized();
    tf.translation = {0.0, 0.0, spec.base_height_mm + c0};
    tf.rotation = tilt_z_onto(normal);
  } else {
    const double theta_x = joint_gears[0] * spec.tilt_max_rad();
    const double theta_y = joint_gears[1] * spec.tilt_max_rad();
    const double tilt_mag = std::max(std::abs(joint_gears[0]), std::abs(joint_gears[1]));
    const double stretch_eff =
        joint_gears[2] * (spec.stretch_max_mm / 2.0) * (1.0 - tilt_mag);
    tf.translation = {0.0, 0.0, spec.neutral_extension_mm() + stretch_eff};
    tf.rotation = rotation_x(theta_x) * rotation_y(theta_y);
  }
  return tf;
}

ChainPoses forward_chain(const GearState& gears, const ArmSpec& spec) {
  spec.validate();
  if (gears.n_joints() != spec.n_joints)
    throw ShapeError("gear vector length does not match n_joints");
  ChainPoses chain;
  chain.joints.reserve(spec.n_joints);
  Pose pose = Pose::identity();
  for (int j = 0; j < spec.n_joints; ++j) {
    const JointTransform tf = joint_transform(gears.values.row(j).transpose(), spec);
    pose = pose.compose(tf.translation, tf.rotation);
    chain.joints.push_back(pose);
  }
  return chain;
}

GearState sample_random_gears(const ArmSpec& spec, std::mt19937_64& rng,
                              double edge_probability) {
  spec.validate();
  std::uniform_real_distribution<double> uniform(spec.gear_lo(), spec.gear_hi());
  std::bernoulli_distribution pin_joint(edge_probability);
  std::bernoulli_distribution coin(0.5);
  Eigen::MatrixXd v(spec.n_joints, 3);
  for (int j = 0; j < spec.n_joints; ++j) {
    if (pin_joint(rng)) {
      for (int c = 0; c < 3; ++c) v(j, c) = coin(rng) ? spec.gear_hi() : spec.gear_lo();
    } else {
      for (int c = 0; c < 3; ++c) v(j, c) = uniform(rng);
    }
  }
  GearState g;
  g.values = std::move(v);
  g.clamp_to(spec);  // coupling rule hook; the box is already feasible
  return g;
}

}  // namespace strk
