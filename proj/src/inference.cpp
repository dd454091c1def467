#include "strk/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "strk/parallel.hpp"
#include "strk/serialize.hpp"

namespace strk {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

Eigen::Vector4d quat_coeffs_wxyz(const Eigen::Quaterniond& q) {
  return {q.w(), q.x(), q.y(), q.z()};
}

// Flip `q` onto the hemisphere of `reference` (raw, possibly non-unit).
Eigen::Vector4d align_hemisphere(const Eigen::Vector4d& q, const Eigen::Vector4d& reference) {
  return q.dot(reference) < 0.0 ? Eigen::Vector4d(-q) : q;
}

}  // namespace

PoseError pose_metrics(const Pose& actual, const Pose& target) {
  PoseError err;
  err.pos_mm = (actual.p - target.p).norm();
  const Eigen::Quaterniond qa = actual.q.normalized();
  const Eigen::Quaterniond qt = target.q.normalized();
  const double dot = std::clamp(std::abs(qa.dot(qt)), -1.0, 1.0);
  err.rot_deg = std::acos(dot) * kRadToDeg;
  return err;
}

Eigen::RowVectorXd window_prediction(const Matrix& y, int joint) {
  const Eigen::Index start = static_cast<Eigen::Index>(joint) * kStepsPerJoint + kClockOnset;
  if (start < 0 || start + kOutputStepsPerJoint > y.rows())
    throw ShapeError("joint window outside readout sequence");
  return y.middleRows(start, kOutputStepsPerJoint).colwise().mean();
}

void InferenceTarget::validate() const {
  if (std::abs(q_star.norm() - 1.0) > 1e-6)
    throw InvalidInputError("target orientation must be a unit quaternion");
  if (gamma1 < 0.0 || gamma2 < 0.0)
    throw InvalidInputError("correction gains must be >= 0");
}

// Input block for the current gears; targets are irrelevant here so the
// dataset encode path is bypassed.
static Matrix encode_inputs_only(const GearState& gears, const ArmSpec& spec) {
  const int n = spec.n_joints;
  Matrix inputs = Matrix::Zero(sequence_length(n), input_width(n));
  for (int k = 0; k < n; ++k) {
    for (int s = 0; s < kStepsPerJoint; ++s) {
      const int t = k * kStepsPerJoint + s;
      inputs.block(t, 0, 1, 3) = gears.values.row(k);
      if (s >= kClockOnset) inputs(t, 3 + k) = 1.0;
    }
  }
  return inputs;
}

InferenceEngine::InferenceEngine(const Checkpoint& checkpoint, const ArmSpec& spec,
                                 const InferenceTarget& target,
                                 const InferenceOptions& options, GearState start_gears)
    : ckpt_(checkpoint),
      spec_(spec),
      target_(target),
      opts_(options),
      gears_(std::move(start_gears)) {
  spec_.validate();
  target_.validate();
  if (!(ckpt_.arm == spec_))
    throw SpecMismatchError("checkpoint was trained on a different arm");
  if (ckpt_.topo.n_in != input_width(spec_.n_joints))
    throw SpecMismatchError("checkpoint input width does not match arm");
  if (gears_.n_joints() != spec_.n_joints)
    throw ShapeError("start gears do not match arm");
  opt_state_ = OptimizerState::zeros(static_cast<Eigen::Index>(spec_.n_joints) * 3);
  hyper_ = OptimizerHyper{opts_.eta0, opts_.beta1, opts_.beta2, opts_.beta3, opts_.epsilon};
  eta_ = opts_.eta0;
}

PoseError InferenceEngine::current_error() const {
  const ChainPoses chain = forward_chain(gears_, spec_);
  Pose target_pose{target_.p_star, target_.q_star};
  return pose_metrics(chain.end_effector(), target_pose);
}

IterationRecord InferenceEngine::step() {
  const int n = spec_.n_joints;
  const double norm = ckpt_.normalization_mm;
  const Eigen::Index T = sequence_length(n);

  const Matrix inputs = encode_inputs_only(gears_, spec_);
  const SpikeTape tape = forward(inputs, ckpt_.weights, ckpt_.cfg, ckpt_.topo);

  // Aggregated end-effector prediction (normalized position, raw quaternion).
  const Eigen::RowVectorXd pred = window_prediction(tape.state.y, n - 1);
  const Eigen::Vector3d pred_pos = pred.segment<3>(0).transpose();
  const Eigen::Vector4d pred_quat = pred.segment<4>(3).transpose();

  // Measured pose: the simulator stands in for external feedback.
  const ChainPoses chain = forward_chain(gears_, spec_);
  const Pose& actual = chain.end_effector();
  const Pose target_pose{target_.p_star, target_.q_star};
  const PoseError err = pose_metrics(actual, target_pose);

  // Pose targets for the masked loss. With correction enabled the raw goal
  // is replaced by prediction + gamma * (goal - measured), all in the
  // network's output units; quaternions are first brought onto the
  // prediction's hemisphere so the difference is the short way around.
  const Eigen::Vector4d q_goal =
      align_hemisphere(quat_coeffs_wxyz(target_.q_star), pred_quat);
  const Eigen::Vector4d q_actual =
      align_hemisphere(quat_coeffs_wxyz(actual.q), pred_quat);
  Eigen::Vector3d u_pos;
  Eigen::Vector4d u_quat;
  if (opts_.use_correction) {
    u_pos = pred_pos + target_.gamma1 * (target_.p_star - actual.p) / norm;
    u_quat = pred_quat + target_.gamma2 * (q_goal - q_actual);
  } else {
    u_pos = target_.p_star / norm;
    u_quat = q_goal;
  }

  // Masked MSE over the end-effector window only.
  Matrix loss_grad = Matrix::Zero(T, kPoseDim);
  Eigen::RowVectorXd u(kPoseDim);
  u << u_pos.transpose(), u_quat.transpose();
  const double denom = static_cast<double>(kOutputStepsPerJoint) * kPoseDim;
  double pos_loss = 0.0, rot_loss = 0.0;
  for (int s = kClockOnset; s < kStepsPerJoint; ++s) {
    const Eigen::Index t = static_cast<Eigen::Index>(n - 1) * kStepsPerJoint + s;
    const Eigen::RowVectorXd diff = tape.state.y.row(t) - u;
    loss_grad.row(t) = 2.0 * diff / denom;
    pos_loss += diff.segment<3>(0).squaredNorm() / denom;
    rot_loss += diff.segment<4>(3).squaredNorm() / denom;
  }
  pos_loss_last_ = pos_loss;
  rot_loss_last_ = rot_loss;

  // Backprojection onto the inputs, summed per joint window; only the three
  // actuation lines are free variables.
  const Matrix g_x = input_gradient(tape, ckpt_.weights, ckpt_.cfg, ckpt_.topo, loss_grad);
  Eigen::VectorXd gear_grad(static_cast<Eigen::Index>(n) * 3);
  for (int k = 0; k < n; ++k) {
    const auto window = g_x.middleRows(static_cast<Eigen::Index>(k) * kStepsPerJoint,
                                       kStepsPerJoint);
    for (int c = 0; c < 3; ++c) gear_grad[3 * k + c] = window.col(c).sum();
  }

  if (err_0_ < 0.0) {
    err_0_ = err.pos_mm;
    err_min_ = err.pos_mm;
  } else {
    err_min_ = std::min(err_min_, err.pos_mm);
  }

  IterationRecord record{err.pos_mm, err.rot_deg, eta_};

  hyper_.eta = eta_;
  Eigen::VectorXd flat = gears_.flatten();
  optimizer_step(opts_.optimizer, flat, gear_grad, opt_state_, hyper_);
  for (int k = 0; k < n; ++k)
    for (int c = 0; c < 3; ++c) gears_.values(k, c) = flat[3 * k + c];
  gears_.clamp_to(spec_);

  if (err_0_ > 0.0) eta_ = step_size_decay(eta_, opts_.eta0, err_min_, err_0_);
  return record;
}

InferenceRun run_inference(const GearState& start_gears, const InferenceTarget& target,
                           const Checkpoint& checkpoint, const ArmSpec& spec,
                           const InferenceOptions& options) {
  InferenceEngine engine(checkpoint, spec, target, options, start_gears);
  InferenceRun run{start_gears, {}, false, 0.0, 0.0};
  run.history.reserve(options.max_iterations);
  int below_tol_streak = 0;
  for (int it = 0; it < options.max_iterations; ++it) {
    const IterationRecord rec = engine.step();
    run.history.push_back(rec);
    if (rec.pos_err_mm > checkpoint.normalization_mm) {
      run.pos_loss_far_sum += engine.pos_loss_last_;
      run.rot_loss_far_sum += engine.rot_loss_last_;
    }
    if (options.early_stop_patience > 0) {
      below_tol_streak = rec.pos_err_mm < options.early_stop_tol_mm ? below_tol_streak + 1 : 0;
      if (below_tol_streak >= options.early_stop_patience) {
        run.early_stopped = true;
        break;
      }
    }
  }
  run.gears = engine.gears();
  const PoseError final_err = engine.current_error();
  run.final_pos_err_mm = final_err.pos_mm;
  run.final_rot_deg = final_err.rot_deg;
  return run;
}

std::vector<InferenceTarget> sample_reachable_targets(const ArmSpec& spec, size_t count,
                                                      uint64_t seed, double gamma1,
                                                      double gamma2) {
  std::vector<InferenceTarget> targets;
  targets.reserve(count);
  for (size_t i = 0; i < count; ++i) {
    std::mt19937_64 rng = stream_rng(seed, i);
    const GearState gears = sample_random_gears(spec, rng);
    const Pose ee = forward_chain(gears, spec).end_effector();
    targets.push_back({ee.p, ee.q, gamma1, gamma2});
  }
  return targets;
}

std::vector<InferenceRun> run_inference_batch(const std::vector<InferenceTarget>& targets,
                                              const Checkpoint& checkpoint,
                                              const ArmSpec& spec,
                                              const InferenceOptions& options, int jobs) {
  std::vector<InferenceRun> runs(targets.size());
  const GearState start = GearState::neutral(spec);
  parallel_for(targets.size(), jobs, [&](size_t i) {
    runs[i] = run_inference(start, targets[i], checkpoint, spec, options);
  });
  return runs;
}

std::vector<double> error_quantile_curve(const std::vector<InferenceRun>& runs,
                                         double quantile) {
  if (runs.empty()) throw InvalidInputError("no runs");
  size_t longest = 0;
  for (const InferenceRun& r : runs) longest = std::max(longest, r.history.size());
  std::vector<double> curve(longest);
  std::vector<double> column(runs.size());
  for (size_t t = 0; t < longest; ++t) {
    for (size_t i = 0; i < runs.size(); ++i) {
      const auto& h = runs[i].history;
      column[i] = t < h.size() ? h[t].pos_err_mm
                               : (h.empty() ? 0.0 : runs[i].final_pos_err_mm);
    }
    std::sort(column.begin(), column.end());
    const double idx = quantile * static_cast<double>(column.size() - 1);
    const size_t lo = static_cast<size_t>(idx);
    const size_t hi = std::min(column.size() - 1, lo + 1);
    const double frac = idx - static_cast<double>(lo);
    curve[t] = column[lo] * (1.0 - frac) + column[hi] * frac;
  }
  return curve;
}

}  // namespace strk
