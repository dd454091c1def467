#pragma once

#include "strk/network.hpp"

namespace strk {

// Gradients of a scalar loss with respect to all three synapse groups and the
// input sequence. Shapes mirror NetworkWeights / the tape's inputs.
struct GradientSet {
  Matrix g_in;   // n_in x n_hidden
  Matrix g_rec;  // n_hidden x n_hidden
  Matrix g_out;  // n_hidden x n_out
  Matrix g_x;    // T x n_in

  static GradientSet zeros(const NetworkTopology& topo, Eigen::Index T);

  GradientSet& operator+=(const GradientSet& other);
  GradientSet& operator*=(double factor);
};

// Reverse-mode pass over a recorded tape.
//
// loss_grad is dE/dy per step (T x n_out). spike_loss_grad, when non-null,
// adds a direct dE/dz term per step and hidden neuron (T x n_hidden); the
// firing-rate regularizer enters through it. The surrogate derivative stored
// on the tape stands in for the spike nonlinearity, the adaptation state
// decays through diag(alpha, rho), and the reset contributes -delta_v * v_thr
// (plus the +delta_a path for adaptive neurons).
//
// want_weight_grads=false skips the three weight accumulations and fills only
// g_x; the deltas, and therefore g_x, are bit-identical either way.
GradientSet backward(const SpikeTape& tape, const NetworkWeights& weights,
                     const NeuronConfig& cfg, const NetworkTopology& topo,
                     const Matrix& loss_grad, const Matrix* spike_loss_grad = nullptr,
                     bool want_weight_grads = true);

// dE/dx only. Same code path as backward(); returns its g_x field.
Matrix input_gradient(const SpikeTape& tape, const NetworkWeights& weights,
                      const NeuronConfig& cfg, const NetworkTopology& topo,
                      const Matrix& loss_grad, const Matrix* spike_loss_grad = nullptr);

}  // namespace strk
