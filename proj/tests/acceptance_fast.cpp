// Acceptance suite, fast half: golden traces, dual-route gradient checks,
// kinematic oracle equivalence, and the cross-module invariant battery.
// Prints one PASS/FAIL line per criterion; exit code is the failure count.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "strk/encoding.hpp"
#include "strk/gradients.hpp"
#include "strk/optimizer.hpp"
#include "strk/training.hpp"

using namespace strk;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int criterion, const char* name, bool ok, double seconds) {
  std::printf("%s  criterion %d: %s  (%.2fs)\n", ok ? "PASS" : "FAIL", criterion, name,
              seconds);
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::vector<int> spike_steps(const SpikeTape& tape, int neuron) {
  std::vector<int> steps;
  for (Eigen::Index t = 0; t < tape.length(); ++t)
    if (tape.state.z(t, neuron) == 1.0) steps.push_back(static_cast<int>(t));
  return steps;
}

SpikeTape constant_input_trace(bool adaptive, double zeta) {
  NeuronConfig cfg;
  cfg.v_thr = 1.0;
  cfg.zeta = zeta;
  NetworkTopology topo{1, 1, adaptive ? 1 : 0, 1};
  NetworkWeights w;
  w.w_in = Matrix::Ones(1, 1);
  w.w_rec = Matrix::Zero(1, 1);
  w.w_out = Matrix::Zero(1, 1);
  return forward(Matrix::Constant(100, 1, 0.1), w, cfg, topo);
}

// ---- criterion 1: golden spike timing ------------------------------------

bool golden_spike_timing() {
  const SpikeTape lif = constant_input_trace(false, 0.03);
  if (spike_steps(lif, 0) != std::vector<int>{13, 27, 41, 55, 69, 83, 97}) return false;

  const SpikeTape alif = constant_input_trace(true, 0.27);
  const std::vector<int> alif_spikes = spike_steps(alif, 0);
  if (alif_spikes != std::vector<int>{13, 33, 58, 93}) return false;
  for (size_t i = 2; i < alif_spikes.size(); ++i)
    if (alif_spikes[i] - alif_spikes[i - 1] <= alif_spikes[i - 1] - alif_spikes[i - 2])
      return false;
  return true;
}

// ---- criterion 2: pseudo-derivative golden values -------------------------

bool pseudo_derivative_golden() {
  const SpikeTape lif = constant_input_trace(false, 0.03);
  return std::abs(lif.h(0, 0) - 0.030000) < 1e-6 && std::abs(lif.h(1, 0) - 0.058537) < 1e-6;
}

// ---- criterion 3: gradient oracle equivalence ------------------------------

bool gradient_oracles() {
  std::mt19937_64 rng(20240531);
  std::normal_distribution<double> dist(0.0, 1.0);
  auto rand_mat = [&](Eigen::Index r, Eigen::Index c, double scale) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = scale * dist(rng);
    return m;
  };

  std::uniform_int_distribution<int> d_in(1, 6), d_hidden(2, 16), d_out(1, 4), d_T(8, 48);
  for (int trial = 0; trial < 24; ++trial) {
    const int n_hidden = d_hidden(rng);
    std::uniform_int_distribution<int> d_alif(0, n_hidden);
    const NetworkTopology topo{d_in(rng), n_hidden, d_alif(rng), d_out(rng)};
    const int T = d_T(rng);
    NetworkWeights w;
    w.w_in = rand_mat(topo.n_in, n_hidden, 0.4);
    w.w_rec = rand_mat(n_hidden, n_hidden, 0.2);
    w.w_out = rand_mat(n_hidden, topo.n_out, 0.4);
    const Matrix inputs = rand_mat(T, topo.n_in, 0.5);
    const Matrix loss_grad = rand_mat(T, topo.n_out, 1.0);
    const Matrix spike_grad = rand_mat(T, n_hidden, 0.1);

    const SpikeTape tape = forward(inputs, w, NeuronConfig{}, topo);
    const GradientSet fast =
        backward(tape, w, NeuronConfig{}, topo, loss_grad, &spike_grad);
    const GradientSet ref = oracle::backward_reference(tape, w, NeuronConfig{}, topo,
                                                       loss_grad, &spike_grad);
    const double worst =
        std::max({(fast.g_in - ref.g_in).cwiseAbs().maxCoeff(),
                  (fast.g_rec - ref.g_rec).cwiseAbs().maxCoeff(),
                  (fast.g_out - ref.g_out).cwiseAbs().maxCoeff(),
                  (fast.g_x - ref.g_x).cwiseAbs().maxCoeff()});
    if (worst >= 1e-10) return false;

    // Smooth-path check: central differences against the quadratic loss
    // 0.5 * |y - targets|^2 (spikes cannot move under w_out perturbations).
    const Matrix targets = rand_mat(T, topo.n_out, 1.0);
    auto loss_of = [&](const NetworkWeights& weights) {
      const SpikeTape t2 = forward(inputs, weights, NeuronConfig{}, topo);
      return 0.5 * (t2.state.y - targets).squaredNorm();
    };
    const Matrix lg = tape.state.y - targets;
    const GradientSet g = backward(tape, w, NeuronConfig{}, topo, lg);
    const double eps = 1e-5;
    for (int j = 0; j < n_hidden; ++j)
      for (int k = 0; k < topo.n_out; ++k) {
        NetworkWeights wp = w;
        wp.w_out(j, k) += eps;
        const double up = loss_of(wp);
        wp.w_out(j, k) -= 2 * eps;
        const double down = loss_of(wp);
        const double fd = (up - down) / (2 * eps);
        const double scale = std::max({1e-8, std::abs(fd), std::abs(g.g_out(j, k))});
        if (std::abs(fd - g.g_out(j, k)) / scale >= 1e-6) return false;
      }
  }
  return true;
}

// ---- criterion 4: kinematic oracle equivalence -----------------------------

bool kinematic_oracles() {
  std::mt19937_64 rng(77001);
  for (const ArmVariant variant : {ArmVariant::ThreeGeared, ArmVariant::FourGeared}) {
    const ArmSpec spec = variant == ArmVariant::ThreeGeared ? ArmSpec::three_geared(5)
                                                            : ArmSpec::four_geared(5);
    for (int trial = 0; trial < 1000; ++trial) {
      const GearState gears = sample_random_gears(spec, rng);
      const ChainPoses chain = forward_chain(gears, spec);
      const oracle::MatrixChainResult ref = oracle::chain_reference(gears, spec);
      for (int j = 0; j < spec.n_joints; ++j) {
        if ((chain.joints[j].p - ref.positions[j]).norm() >= 1e-9) return false;
        const Eigen::Quaterniond ref_q(ref.rotations[j]);
        const double dist = std::min(
            (chain.joints[j].q.coeffs() - ref_q.coeffs()).norm(),
            (chain.joints[j].q.coeffs() + ref_q.coeffs()).norm());
        if (dist >= 1e-9) return false;
      }
    }
  }

  const ArmSpec three = ArmSpec::three_geared(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::Vector3d gears{u(rng), u(rng), u(rng)};
    const Eigen::Vector3d closed =
        joint_transform(gears, three).rotation * Eigen::Vector3d::UnitZ();
    const Eigen::Vector3d fit = oracle::plane_normal_lsq(gear_attachment_points(gears, three));
    if ((closed - fit).norm() >= 1e-10) return false;
  }
  return true;
}

// ---- criterion 9: invariant battery ----------------------------------------

bool spike_binarity() {
  std::mt19937_64 rng(9001);
  std::normal_distribution<double> dist(0.0, 1.0);
  const NetworkTopology topo = NetworkTopology::make(4, 12, 3);
  NetworkWeights w;
  w.w_in = Matrix::NullaryExpr(4, 12, [&] { return 0.5 * dist(rng); });
  w.w_rec = Matrix::NullaryExpr(12, 12, [&] { return 0.2 * dist(rng); });
  w.w_out = Matrix::NullaryExpr(12, 3, [&] { return 0.5 * dist(rng); });
  const Matrix inputs = Matrix::NullaryExpr(64, 4, [&] { return dist(rng); });
  const SpikeTape tape = forward(inputs, w, NeuronConfig{}, topo);
  for (Eigen::Index t = 0; t < tape.length(); ++t)
    for (int j = 0; j < 12; ++j)
      if (tape.state.z(t, j) != 0.0 && tape.state.z(t, j) != 1.0) return false;
  return true;
}

bool quaternion_norm_75() {
  const ArmSpec spec = ArmSpec::four_geared(75);
  std::mt19937_64 rng(9002);
  for (int trial = 0; trial < 5; ++trial) {
    const ChainPoses chain = forward_chain(sample_random_gears(spec, rng), spec);
    for (const Pose& pose : chain.joints)
      if (std::abs(pose.q.norm() - 1.0) >= 1e-9) return false;
  }
  return true;
}

bool optimizer_reduction() {
  std::mt19937_64 rng(9003);
  std::uniform_real_distribution<double> mag(0.05, 2.0);
  OptimizerHyper hyper;
  hyper.eta = 0.01;
  Eigen::VectorXd a = Eigen::VectorXd::Zero(4), b = a;
  OptimizerState sa = OptimizerState::zeros(4), sb = OptimizerState::zeros(4);
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd g(4);
    for (int j = 0; j < 4; ++j) g[j] = mag(rng);  // constant sign -> s_hat == 1
    sd_amsgrad_step(a, g, sa, hyper);
    amsgrad_step(b, g, sb, hyper);
    if ((a - b).cwiseAbs().maxCoeff() >= 1e-12) return false;
  }
  return true;
}

bool eta_monotonicity() {
  std::mt19937_64 rng(9004);
  std::uniform_real_distribution<double> u(0.0, 20.0);
  for (int trial = 0; trial < 100; ++trial) {
    const double err0 = u(rng) + 1e-6;
    double eta = 0.1, err_min = err0;
    for (int i = 0; i < 100; ++i) {
      err_min = std::min(err_min, u(rng));
      const double next = step_size_decay(eta, 0.1, err_min, err0);
      if (next > eta) return false;
      eta = next;
    }
  }
  return true;
}

bool mask_locality() {
  const ArmSpec spec = ArmSpec::four_geared(3);
  const Dataset ds = generate_dataset(spec, 4, 9005);
  const EncodedSample sample = ds.encode_sample(0);
  std::mt19937_64 rng(9006);
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix y = Matrix::NullaryExpr(sample.length(), kPoseDim, [&] { return dist(rng); });
  Matrix grad;
  const double base = masked_mse(y, sample, &grad);
  for (Eigen::Index t = 0; t < sample.length(); ++t) {
    if (sample.output_mask[t]) continue;
    Matrix perturbed = y;
    perturbed.row(t).array() += 37.0;
    Matrix grad2;
    if (masked_mse(perturbed, sample, &grad2) != base) return false;
    if (!(grad2 == grad)) return false;
  }
  return true;
}

bool dataset_round_trip() {
  namespace fs = std::filesystem;
  const ArmSpec spec = ArmSpec::three_geared(4);
  const Dataset ds = generate_dataset(spec, 32, 9007);
  const std::string path = (fs::temp_directory_path() / "strk_acc_ds.bin").string();
  save_dataset(ds, path);
  const Dataset loaded = load_dataset(path);
  fs::remove(path);
  if (!(loaded.spec == ds.spec) || loaded.normalization_mm != ds.normalization_mm ||
      loaded.size() != ds.size())
    return false;
  for (size_t i = 0; i < ds.size(); ++i) {
    if (!(loaded.samples[i].gears.values == ds.samples[i].gears.values)) return false;
    for (int k = 0; k < spec.n_joints; ++k) {
      if (!(loaded.samples[i].joint_poses[k].p == ds.samples[i].joint_poses[k].p))
        return false;
      if (!(loaded.samples[i].joint_poses[k].q.coeffs() ==
            ds.samples[i].joint_poses[k].q.coeffs()))
        return false;
    }
  }
  return true;
}

bool determinism() {
  const ArmSpec spec = ArmSpec::four_geared(2);
  const Dataset a = generate_dataset(spec, 24, 9008);
  const Dataset b = generate_dataset(spec, 24, 9008);
  for (size_t i = 0; i < a.size(); ++i)
    if (!(a.samples[i].gears.values == b.samples[i].gears.values)) return false;

  TrainConfig cfg;
  cfg.n_hidden = 12;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.seed = 5;
  cfg.jobs = 2;
  const TrainResult r1 = train(a, nullptr, cfg);
  const TrainResult r2 = train(b, nullptr, cfg);
  if (!(r1.checkpoint.weights.w_rec == r2.checkpoint.weights.w_rec)) return false;
  for (size_t i = 0; i < r1.history.size(); ++i)
    if (r1.history[i].train_loss != r2.history[i].train_loss) return false;
  return true;
}

bool invariant_battery() {
  bool ok = true;
  ok &= spike_binarity();
  ok &= quaternion_norm_75();
  ok &= optimizer_reduction();
  ok &= eta_monotonicity();
  ok &= mask_locality();
  ok &= dataset_round_trip();
  ok &= determinism();
  return ok;
}

template <typename Fn>
void run(int criterion, const char* name, Fn fn) {
  const auto start = Clock::now();
  bool ok = false;
  try {
    ok = fn();
  } catch (const std::exception& e) {
    std::printf("      exception: %s\n", e.what());
  }
  report(criterion, name, ok, std::chrono::duration<double>(Clock::now() - start).count());
}

}  // namespace

int main() {
  run(1, "golden spike timing (constant-input LIF/ALIF traces)", golden_spike_timing);
  run(2, "pseudo-derivative golden values h(0), h(1)", pseudo_derivative_golden);
  run(3, "gradient oracle equivalence + smooth-path finite differences",
      gradient_oracles);
  run(4, "kinematic oracle equivalence (matrix chain + plane fit)", kinematic_oracles);
  run(9, "invariant battery (binarity, quaternions, reductions, eta, mask, io, determinism)",
      invariant_battery);
  return failures;
}
