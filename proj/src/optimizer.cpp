#include "strk/optimizer.hpp"

#include <cmath>

namespace strk {

OptimizerKind optimizer_kind_from_string(const std::string& name) {
  if (name == "sd_amsgrad") return OptimizerKind::SdAmsGrad;
  if (name == "amsgrad") return OptimizerKind::AmsGrad;
  if (name == "adam") return OptimizerKind::Adam;
  if (name == "sd_momentum") return OptimizerKind::SdMomentum;
  throw InvalidInputError("unknown optimizer: " + name);
}

std::string to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::SdAmsGrad: return "sd_amsgrad";
    case OptimizerKind::AmsGrad: return "amsgrad";
    case OptimizerKind::Adam: return "adam";
    case OptimizerKind::SdMomentum: return "sd_momentum";
  }
  return "?";
}

OptimizerState OptimizerState::zeros(Eigen::Index dim) {
  OptimizerState s;
  s.m.setZero(dim);
  s.v.setZero(dim);
  s.v_max.setZero(dim);
  s.s.setZero(dim);
  return s;
}

namespace {

void check_grad(const Eigen::VectorXd& theta, const Eigen::VectorXd& grad,
                const OptimizerState& state) {
  if (grad.size() != theta.size() || state.m.size() != theta.size())
    throw ShapeError("optimizer state/gradient size mismatch");
  for (Eigen::Index i = 0; i < grad.size(); ++i)
    if (!std::isfinite(grad[i]))
      throw NumericError("non-finite gradient at component " + std::to_string(i), i);
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Shared moment bookkeeping; returns the bias-corrected sign damping s_hat^2.
Eigen::ArrayXd update_moments(const Eigen::VectorXd& grad, OptimizerState& state,
                              const OptimizerHyper& hyper, bool with_sign_average) {
  state.step_count += 1;
  state.m = hyper.beta1 * state.m + (1.0 - hyper.beta1) * grad;
  state.v = hyper.beta2 * state.v + (1.0 - hyper.beta2) * grad.cwiseProduct(grad);
  state.v_max = state.v_max.cwiseMax(state.v);
  if (!with_sign_average) return Eigen::ArrayXd::Ones(grad.size());
  Eigen::VectorXd g_sign(grad.size());
  for (Eigen::Index i = 0; i < grad.size(); ++i) g_sign[i] = sign(grad[i]);
  state.s = hyper.beta3 * state.s + (1.0 - hyper.beta3) * g_sign;
  const double s_corr = 1.0 - std::pow(hyper.beta3, state.step_count);
  return (state.s.array() / s_corr).square();
}

}  // namespace

void sd_amsgrad_step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad,
                     OptimizerState& state, const OptimizerHyper& hyper) {
  check_grad(theta, grad, state);
  const Eigen::ArrayXd damping = update_moments(grad, state, hyper, true);
  const double m_corr = 1.0 - std::pow(hyper.beta1, state.step_count);
  const double v_corr = 1.0 - std::pow(hyper.beta2, state.step_count);
  theta.array() -= hyper.eta * damping * (state.m.array() / m_corr) /
                   ((state.v_max.array() / v_corr).sqrt() + hyper.epsilon);
}

void amsgrad_step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad,
                  OptimizerState& state, const OptimizerHyper& hyper) {
  check_grad(theta, grad, state);
  update_moments(grad, state, hyper, false);
  const double m_corr = 1.0 - std::pow(hyper.beta1, state.step_count);
  const double v_corr = 1.0 - std::pow(hyper.beta2, state.step_count);
  theta.array() -= hyper.eta * (state.m.array() / m_corr) /
                   ((state.v_max.array() / v_corr).sqrt() + hyper.epsilon);
}

void adam_step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad,
               OptimizerState& state, const OptimizerHyper& hyper) {
  check_grad(theta, grad, state);
  update_moments(grad, state, hyper, false);
  const double m_corr = 1.0 - std::pow(hyper.beta1, state.step_count);
  const double v_corr = 1.0 - std::pow(hyper.beta2, state.step_count);
  theta.array() -= hyper.eta * (state.m.array() / m_corr) /
                   ((state.v.array() / v_corr).sqrt() + hyper.epsilon);
}

void sd_momentum_step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad,
                      OptimizerState& state, const OptimizerHyper& hyper) {
  check_grad(theta, grad, state);
  const Eigen::ArrayXd damping = update_moments(grad, state, hyper, true);
  theta.array() -= hyper.eta * damping * state.m.array();
}

void optimizer_step(OptimizerKind kind, Eigen::VectorXd& theta,
                    const Eigen::VectorXd& grad, OptimizerState& state,
                    const OptimizerHyper& hyper) {
  switch (kind) {
    case OptimizerKind::SdAmsGrad: sd_amsgrad_step(theta, grad, state, hyper); break;
    case OptimizerKind::AmsGrad: amsgrad_step(theta, grad, state, hyper); break;
    case OptimizerKind::Adam: adam_step(theta, grad, state, hyper); break;
    case OptimizerKind::SdMomentum: sd_momentum_step(theta, grad, state, hyper); break;
  }
}

double step_size_decay(double eta_t, double eta_0, double err_min_seen, double err_0) {
  if (!(err_0 > 0.0)) throw InvalidInputError("initial error must be positive");
  const double factor = std::log1p(std::max(0.0, err_min_seen)) / std::log1p(err_0);
  return std::min(eta_t, eta_0 * factor);
}

}  // namespace strk
