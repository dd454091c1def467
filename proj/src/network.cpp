#include "strk/network.hpp"

namespace strk {

void NetworkWeights::validate(const NetworkTopology& topo) const {
  if (w_in.rows() != topo.n_in || w_in.cols() != topo.n_hidden ||
      w_rec.rows() != topo.n_hidden || w_rec.cols() != topo.n_hidden ||
      w_out.rows() != topo.n_hidden || w_out.cols() != topo.n_out)
    throw ShapeError("weight shapes do not match topology");
  if (!w_in.allFinite() || !w_rec.allFinite() || !w_out.allFinite())
    throw InvalidInputError("weights contain non-finite entries");
}

NetworkWeights init_weights(const NetworkTopology& topo, std::mt19937_64& rng,
                            bool zero_self_recurrence) {
  topo.validate();
  std::normal_distribution<double> dist(0.0, 1.0);
  auto fill = [&](Matrix& m, double fan_in) {
    const double scale = 1.0 / std::sqrt(fan_in);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = scale * dist(rng);
  };
  NetworkWeights w;
  w.w_in.resize(topo.n_in, topo.n_hidden);
  w.w_rec.resize(topo.n_hidden, topo.n_hidden);
  w.w_out.resize(topo.n_hidden, topo.n_out);
  fill(w.w_in, topo.n_in);
  fill(w.w_rec, topo.n_hidden);
  fill(w.w_out, topo.n_hidden);
  if (zero_self_recurrence) w.w_rec.diagonal().setZero();
  return w;
}

SpikeTape forward(const Matrix& inputs, const NetworkWeights& weights,
                  const NeuronConfig& cfg, const NetworkTopology& topo) {
  cfg.validate();
  topo.validate();
  weights.validate(topo);
  if (inputs.cols() != topo.n_in)
    throw ShapeError("input row width does not match n_in");
  const Eigen::Index T = inputs.rows();
  if (T < 1) throw ShapeError("input sequence must have at least one step");
  if (!inputs.allFinite()) throw InvalidInputError("inputs contain non-finite entries");

  const int n_h = topo.n_hidden;
  const int n_lif = topo.n_lif();

  SpikeTape tape;
  tape.inputs = inputs;
  tape.state.v.setZero(T, n_h);
  tape.state.a.setZero(T, topo.n_alif);
  tape.state.z.setZero(T, n_h);
  tape.state.y.setZero(T, topo.n_out);
  tape.h.setZero(T, n_h);

  Vector v_prev = Vector::Zero(n_h);
  Vector a_prev = Vector::Zero(topo.n_alif);
  Vector z_prev = Vector::Zero(n_h);
  Vector y_prev = Vector::Zero(topo.n_out);
  Vector rec_cur(n_h);
  Vector z_now(n_h);

  for (Eigen::Index t = 0; t < T; ++t) {
    const Vector in_cur = weights.w_in.transpose() * inputs.row(t).transpose();

    // Spikes are binary, so the recurrent current is a sum of presynaptic
    // rows; accumulate in ascending neuron index to keep sums reproducible.
    rec_cur.setZero();
    for (int j = 0; j < n_h; ++j)
      if (z_prev[j] != 0.0) rec_cur += weights.w_rec.row(j).transpose();

    for (int j = 0; j < n_lif; ++j) {
      const LifResult r = lif_step(v_prev[j], in_cur[j], rec_cur[j], z_prev[j], cfg);
      tape.state.v(t, j) = r.v;
      z_now[j] = r.z;
      tape.h(t, j) = pseudo_derivative(r.v, cfg.v_thr, cfg);
    }
    for (int j = n_lif; j < n_h; ++j) {
      const int ai = j - n_lif;
      const AlifResult r =
          alif_step(v_prev[j], a_prev[ai], in_cur[j], rec_cur[j], z_prev[j], cfg);
      tape.state.v(t, j) = r.v;
      tape.state.a(t, ai) = r.a;
      z_now[j] = r.z;
      tape.h(t, j) = pseudo_derivative(r.v, cfg.v_thr + cfg.zeta * r.a, cfg);
      a_prev[ai] = r.a;
    }
    tape.state.z.row(t) = z_now.transpose();

    for (int k = 0; k < topo.n_out; ++k)
      tape.state.y(t, k) = readout_step(y_prev[k], z_now, weights.w_out.col(k), cfg);

    v_prev = tape.state.v.row(t).transpose();
    z_prev = z_now;
    y_prev = tape.state.y.row(t).transpose();
  }
  return tape;
}

}  // namespace strk
