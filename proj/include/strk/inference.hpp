#pragma once

#include "strk/training.hpp"

namespace strk {

struct PoseError {
  double pos_mm = 0.0;
  double rot_deg = 0.0;
};

// Euclidean position distance plus the quaternion angle
// acos(|<q, q_other>|) in degrees (q and -q compare equal; the inner product
// is clamped before acos and both quaternions renormalized).
PoseError pose_metrics(const Pose& actual, const Pose& target);

// Mean readout row over joint k's 7 supervised steps: the window-aggregated
// pose prediction (normalized position + raw quaternion).
Eigen::RowVectorXd window_prediction(const Matrix& y, int joint);

struct InferenceTarget {
  Eigen::Vector3d p_star = Eigen::Vector3d::Zero();  // mm
  Eigen::Quaterniond q_star = Eigen::Quaterniond::Identity();
  double gamma1 = 1.0;  // position feedback gain
  double gamma2 = 1.0;  // orientation feedback gain

  void validate() const;
};

struct InferenceOptions {
  OptimizerKind optimizer = OptimizerKind::SdAmsGrad;
  double eta0 = 0.1;  // initial step size (0.01 suits 512-hidden models)
  double beta1 = 0.9;
  double beta2 = 0.999;
  double beta3 = 0.9;
  double epsilon = 1e-8;
  int max_iterations = 5000;
  double early_stop_tol_mm = 1.0;
  int early_stop_patience = 10;  // consecutive iterations below tol; 0 disables
  bool use_correction = true;    // feedback-corrected targets
};

struct IterationRecord {
  double pos_err_mm = 0.0;
  double rot_deg = 0.0;
  double eta = 0.0;
};

struct InferenceRun {
  GearState gears;
  std::vector<IterationRecord> history;
  bool early_stopped = false;
  double final_pos_err_mm = 0.0;
  double final_rot_deg = 0.0;
  // Masked-loss split summed over iterations where the end-effector was more
  // than one mean inter-joint distance from target (diagnostics).
  double pos_loss_far_sum = 0.0;
  double rot_loss_far_sum = 0.0;
};

// One closed-loop controller: predicts the end-effector pose with the
// trained network, measures the arm, corrects the target with the measured
// error, backprojects the masked pose loss onto the gear inputs (summed per
// joint window, clock lines discarded), and applies the chosen optimizer
// under the logarithmic step-size decay. Gears are clamped to their box
// after every update. State (moments, eta, best error) is per target; build
// a fresh engine for a new target.
class InferenceEngine {
 public:
  InferenceEngine(const Checkpoint& checkpoint, const ArmSpec& spec,
                  const InferenceTarget& target, const InferenceOptions& options,
                  GearState start_gears);

  // Measures the current error, records it, and applies one gear update.
  IterationRecord step();

  const GearState& gears() const { return gears_; }
  PoseError current_error() const;

 private:
  const Checkpoint& ckpt_;
  ArmSpec spec_;
  InferenceTarget target_;
  InferenceOptions opts_;
  GearState gears_;
  OptimizerState opt_state_;
  OptimizerHyper hyper_;
  double eta_ = 0.0;
  double err_0_ = -1.0;      // position error before the first update
  double err_min_ = -1.0;    // minimum encountered position error
  double pos_loss_last_ = 0.0;
  double rot_loss_last_ = 0.0;

  friend InferenceRun run_inference(const GearState&, const InferenceTarget&,
                                    const Checkpoint&, const ArmSpec&,
                                    const InferenceOptions&);
};

InferenceRun run_inference(const GearState& start_gears, const InferenceTarget& target,
                           const Checkpoint& checkpoint, const ArmSpec& spec,
                           const InferenceOptions& options);

// Targets guaranteed reachable: end-effector poses of random gear draws.
std::vector<InferenceTarget> sample_reachable_targets(const ArmSpec& spec, size_t count,
                                                      uint64_t seed, double gamma1 = 1.0,
                                                      double gamma2 = 1.0);

// Independent runs over many targets (parallel over runs, deterministic).
std::vector<InferenceRun> run_inference_batch(const std::vector<InferenceTarget>& targets,
                                              const Checkpoint& checkpoint,
                                              const ArmSpec& spec,
                                              const InferenceOptions& options,
                                              int jobs = 0);

// Per-iteration quantile across runs; runs that stopped early hold their
// final error. Length equals the longest history.
std::vector<double> error_quantile_curve(const std::vector<InferenceRun>& runs,
                                         double quantile);

}  // namespace strk
