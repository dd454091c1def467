#pragma once

#include <Eigen/Dense>
#include <string>

#include "strk/errors.hpp"

namespace strk {

enum class OptimizerKind { SdAmsGrad, AmsGrad, Adam, SdMomentum };

OptimizerKind optimizer_kind_from_string(const std::string& name);
std::string to_string(OptimizerKind kind);

struct OptimizerHyper {
  double eta = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double beta3 = 0.9;  // sign-average decay
  double epsilon = 1e-8;
};

// Moment estimates shared by all four update rules. v_max is the running
// componentwise max of v; s averages gradient signs, so after bias
// correction |s_hat| <= 1 and its square damps oscillating components.
struct OptimizerState {
  Eigen::VectorXd m, v, v_max, s;
  long step_count = 0;

  static OptimizerState zeros(Eigen::Index dim);
};

// theta <- theta - eta * s_hat^2 * m_hat / (sqrt(max-corrected v) + eps)
void sd_amsgrad_step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad,
                     OptimizerState& state, const OptimizerHyper& hyper);
// Same with the sign damping forced to 1.
void amsgrad_step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad,
                  OptimizerState& state, const OptimizerHyper& hyper);
// Also drops the running max of v.
void adam_step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad,
               OptimizerState& state, const OptimizerHyper& hyper);
// Classical momentum buffer scaled componentwise by the sign damping.
void sd_momentum_step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad,
                      OptimizerState& state, const OptimizerHyper& hyper);

void optimizer_step(OptimizerKind kind, Eigen::VectorXd& theta,
                    const Eigen::VectorXd& grad, OptimizerState& state,
                    const OptimizerHyper& hyper);

// Continuous step-size decay driven by the minimum position error seen so
// far: eta' = min(eta, eta0 * ln(1+err_min) / ln(1+err0)). Nonincreasing
// within one target episode; reset eta to eta0 on a new target.
double step_size_decay(double eta_t, double eta_0, double err_min_seen, double err_0);

}  // namespace strk
