#pragma once

#include <Eigen/Dense>
#include <random>

#include "strk/neuron.hpp"

namespace strk {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Layer sizes of the single-recurrent-layer network. The hidden layer is
// split into a LIF prefix [0, n_hidden - n_alif) and an ALIF suffix
// [n_hidden - n_alif, n_hidden); the fixed layout keeps state storage and
// gradient bookkeeping index-stable.
struct NetworkTopology {
  int n_in = 1;
  int n_hidden = 1;
  int n_alif = 0;
  int n_out = 1;

  static NetworkTopology make(int n_in, int n_hidden, int n_out) {
    // Half adaptive, half plain by default.
    return NetworkTopology{n_in, n_hidden, n_hidden / 2, n_out};
  }

  int n_lif() const { return n_hidden - n_alif; }
  bool is_alif(int j) const { return j >= n_lif(); }
  int alif_index(int j) const { return j - n_lif(); }

  void validate() const {
    if (n_in < 1 || n_hidden < 1 || n_out < 1)
      throw InvalidInputError("topology counts must be >= 1");
    if (n_alif < 0 || n_alif > n_hidden)
      throw InvalidInputError("n_alif must be in [0, n_hidden]");
  }

  bool operator==(const NetworkTopology&) const = default;
};

struct NetworkWeights {
  Matrix w_in;   // n_in x n_hidden
  Matrix w_rec;  // n_hidden x n_hidden, row = presynaptic
  Matrix w_out;  // n_hidden x n_out

  void validate(const NetworkTopology& topo) const;
};

// Gaussian init with std 1/sqrt(fan-in) for each synapse group.
// zero_self_recurrence clears the w_rec diagonal (ablation knob; self
// connections are otherwise allowed).
NetworkWeights init_weights(const NetworkTopology& topo, std::mt19937_64& rng,
                            bool zero_self_recurrence = false);

// Per-timestep trajectory of one unrolled sequence; row t = step t.
struct NetworkState {
  Matrix v;  // T x n_hidden
  Matrix a;  // T x n_alif
  Matrix z;  // T x n_hidden, entries exactly 0.0 or 1.0
  Matrix y;  // T x n_out
};

// Everything the backward pass needs to replay one forward run exactly.
struct SpikeTape {
  Matrix inputs;  // T x n_in
  NetworkState state;
  Matrix h;  // T x n_hidden, surrogate derivative at each step

  Eigen::Index length() const { return inputs.rows(); }
};

// Leaky readout: decays like the hidden voltage, integrates the current
// step's spikes, never resets.
inline double readout_step(double y_prev, const Eigen::Ref<const Vector>& hidden_spikes,
                           const Eigen::Ref<const Vector>& w_out_col,
                           const NeuronConfig& cfg) {
  return cfg.alpha * y_prev + w_out_col.dot(hidden_spikes);
}

// Runs the network over an input sequence from an all-zero initial state and
// records the full trajectory. Recurrent input at step t uses spikes from
// step t-1; readouts use spikes from step t.
SpikeTape forward(const Matrix& inputs, const NetworkWeights& weights,
                  const NeuronConfig& cfg, const NetworkTopology& topo);

}  // namespace strk
