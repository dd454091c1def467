#pragma once

#include <cmath>

#include "strk/errors.hpp"

namespace strk {

// Spiking-dynamics constants. Defaults are the values the networks in this
// project are run with; construction validates the ranges once so the step
// functions can stay branch-free.
struct NeuronConfig {
  double alpha = std::exp(-1.0 / 20.0);   // voltage decay per step
  double rho = std::exp(-1.0 / 1200.0);   // threshold-adaptation decay per step
  double zeta = 0.03;                     // adaptation -> threshold coefficient
  double v_thr = 0.61;                    // base spike threshold
  double lambda_pd = 0.3;                 // surrogate-derivative damping

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidInputError("alpha must be in (0,1)");
    if (!(rho > 0.0 && rho < 1.0)) throw InvalidInputError("rho must be in (0,1)");
    if (!(zeta >= 0.0)) throw InvalidInputError("zeta must be >= 0");
    if (!(v_thr > 0.0)) throw InvalidInputError("v_thr must be > 0");
    if (!(lambda_pd > 0.0)) throw InvalidInputError("lambda_pd must be > 0");
  }
};

struct LifResult {
  double v;
  double z;  // 0.0 or 1.0
};

struct AlifResult {
  double v;
  double a;
  double z;  // 0.0 or 1.0
};

// Piecewise-linear surrogate for the spike threshold derivative. Peaks at
// lambda_pd when v sits on the (possibly adapted) threshold and hits zero
// once |v - v_thr_dyn| >= v_thr.
inline double pseudo_derivative(double v, double v_thr_dyn, const NeuronConfig& cfg) {
  return cfg.lambda_pd * std::max(0.0, 1.0 - std::abs(v - v_thr_dyn) / cfg.v_thr);
}

// One leaky integrate-and-fire step. The membrane decays by alpha, integrates
// the incoming currents, and a spike on the previous step subtracts the
// threshold. Spike comparison is >= so the at-threshold case fires.
inline LifResult lif_step(double v_prev, double input_current, double rec_current,
                          double z_prev, const NeuronConfig& cfg) {
  if (!std::isfinite(v_prev) || !std::isfinite(input_current) ||
      !std::isfinite(rec_current) || !std::isfinite(z_prev))
    throw InvalidInputError("lif_step: non-finite input");
  const double v = cfg.alpha * v_prev + input_current + rec_current - z_prev * cfg.v_thr;
  return {v, v >= cfg.v_thr ? 1.0 : 0.0};
}

// Adaptive LIF step. The adaptation value integrates past spikes and raises
// the spike threshold; the reset subtracts the base threshold only, so the
// adaptation acts purely on the firing condition. This is what reproduces
// the reference constant-input traces (spikes at 13/33/58/93 for zeta=0.27)
// and keeps the reset's gradient the constant -v_thr used by the backward
// pass.
inline AlifResult alif_step(double v_prev, double a_prev, double input_current,
                            double rec_current, double z_prev, const NeuronConfig& cfg) {
  if (!std::isfinite(v_prev) || !std::isfinite(input_current) ||
      !std::isfinite(rec_current) || !std::isfinite(z_prev))
    throw InvalidInputError("alif_step: non-finite input");
  if (!(a_prev >= 0.0)) throw InvalidInputError("alif_step: negative adaptation value");
  const double a = cfg.rho * a_prev + z_prev;
  const double v = cfg.alpha * v_prev + input_current + rec_current - z_prev * cfg.v_thr;
  const double thr = cfg.v_thr + cfg.zeta * a;
  return {v, a, v >= thr ? 1.0 : 0.0};
}

}  // namespace strk
