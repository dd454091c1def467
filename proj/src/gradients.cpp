#include "strk/gradients.hpp"

#include <string>

namespace strk {

GradientSet GradientSet::zeros(const NetworkTopology& topo, Eigen::Index T) {
  GradientSet g;
  g.g_in.setZero(topo.n_in, topo.n_hidden);
  g.g_rec.setZero(topo.n_hidden, topo.n_hidden);
  g.g_out.setZero(topo.n_hidden, topo.n_out);
  g.g_x.setZero(T, topo.n_in);
  return g;
}

GradientSet& GradientSet::operator+=(const GradientSet& other) {
  g_in += other.g_in;
  g_rec += other.g_rec;
  g_out += other.g_out;
  g_x += other.g_x;
  return *this;
}

GradientSet& GradientSet::operator*=(double factor) {
  g_in *= factor;
  g_rec *= factor;
  g_out *= factor;
  g_x *= factor;
  return *this;
}

GradientSet backward(const SpikeTape& tape, const NetworkWeights& weights,
                     const NeuronConfig& cfg, const NetworkTopology& topo,
                     const Matrix& loss_grad, const Matrix* spike_loss_grad,
                     bool want_weight_grads) {
  topo.validate();
  weights.validate(topo);
  const Eigen::Index T = tape.length();
  if (loss_grad.rows() != T || loss_grad.cols() != topo.n_out)
    throw ShapeError("loss_grad shape does not match tape/topology");
  if (spike_loss_grad &&
      (spike_loss_grad->rows() != T || spike_loss_grad->cols() != topo.n_hidden))
    throw ShapeError("spike_loss_grad shape does not match tape/topology");
  if (tape.state.v.rows() != T || tape.state.v.cols() != topo.n_hidden ||
      tape.state.a.cols() != topo.n_alif || tape.state.y.cols() != topo.n_out)
    throw ShapeError("tape shape does not match topology");

  const int n_h = topo.n_hidden;
  const int n_lif = topo.n_lif();

  GradientSet g = GradientSet::zeros(topo, T);

  // Deltas from step t+1, all zero past the end of the sequence.
  Vector delta_out_next = Vector::Zero(topo.n_out);
  Vector delta_v_next = Vector::Zero(n_h);
  Vector delta_a_next = Vector::Zero(topo.n_alif);
  Vector delta_out(topo.n_out), delta_v(n_h), delta_a(topo.n_alif);
  Vector dE_dz(n_h);

  for (Eigen::Index t = T - 1; t >= 0; --t) {
    delta_out = loss_grad.row(t).transpose() + cfg.alpha * delta_out_next;

    // dE/dz at step t: readout path, outer recurrence into t+1, the reset
    // self-term, and the adaptation self-term for adaptive neurons.
    dE_dz = weights.w_out * delta_out + weights.w_rec * delta_v_next;
    dE_dz -= cfg.v_thr * delta_v_next;
    for (int j = n_lif; j < n_h; ++j) dE_dz[j] += delta_a_next[j - n_lif];
    if (spike_loss_grad) dE_dz += spike_loss_grad->row(t).transpose();

    for (int j = 0; j < n_h; ++j) {
      const double hz = dE_dz[j] * tape.h(t, j);
      delta_v[j] = hz + cfg.alpha * delta_v_next[j];
      if (j >= n_lif) {
        const int ai = j - n_lif;
        delta_a[ai] = -cfg.zeta * hz + cfg.rho * delta_a_next[ai];
      }
    }

    if (!delta_v.allFinite() || !delta_out.allFinite() ||
        (topo.n_alif > 0 && !delta_a.allFinite()))
      throw NumericError("non-finite delta at backward step " + std::to_string(t), t);

    if (want_weight_grads) {
      // Spikes and inputs are sparse; touch only the nonzero rows.
      for (int j = 0; j < n_h; ++j)
        if (tape.state.z(t, j) != 0.0) g.g_out.row(j) += delta_out.transpose();
      for (int i = 0; i < topo.n_in; ++i) {
        const double x = tape.inputs(t, i);
        if (x != 0.0) g.g_in.row(i) += x * delta_v.transpose();
      }
      if (t >= 1) {
        for (int j = 0; j < n_h; ++j)
          if (tape.state.z(t - 1, j) != 0.0) g.g_rec.row(j) += delta_v.transpose();
      }
    }
    g.g_x.row(t) = (weights.w_in * delta_v).transpose();

    delta_out_next = delta_out;
    delta_v_next = delta_v;
    delta_a_next = delta_a;
  }
  return g;
}

Matrix input_gradient(const SpikeTape& tape, const NetworkWeights& weights,
                      const NeuronConfig& cfg, const NetworkTopology& topo,
                      const Matrix& loss_grad, const Matrix* spike_loss_grad) {
  return backward(tape, weights, cfg, topo, loss_grad, spike_loss_grad,
                  /*want_weight_grads=*/false)
      .g_x;
}

}  // namespace strk
