#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "strk/encoding.hpp"
#include "strk/gradients.hpp"
#include "strk/optimizer.hpp"

namespace strk {

struct TrainConfig {
  int batch_size = 128;
  double lr0 = 0.001;
  double lr_decay_factor = 0.5;
  long lr_decay_every = 10000;     // updates
  double reg_factor = 0.001;       // firing-rate penalty weight, decays like lr
  double target_rate = 0.02;       // mean spikes per step per neuron
  int epochs = 64;
  uint64_t seed = 1;
  int n_hidden = 512;
  int n_alif = -1;  // -1: half the hidden layer
  bool zero_self_recurrence = false;
  int jobs = 0;  // 0: hardware concurrency
  long checkpoint_every_updates = 0;  // 0: epoch boundaries only
  size_t test_eval_max = 0;           // 0: whole test set

  double lr_at(uint64_t update) const;
  double reg_at(uint64_t update) const;
  NetworkTopology topology(const ArmSpec& arm) const;
};

// Full training state; save/load round-trips bitwise. The RNG state is the
// shuffle generator as of the start of `epoch`, so a resumed run re-derives
// the same batch order and continues mid-epoch if needed.
struct Checkpoint {
  ArmSpec arm;
  double normalization_mm = 0.0;
  NetworkTopology topo;
  NeuronConfig cfg;
  NetworkWeights weights;
  uint64_t update_count = 0;
  uint64_t epoch = 0;
  uint64_t epoch_offset_updates = 0;
  double epoch_loss_sum = 0.0;
  double epoch_rate_sum = 0.0;
  OptimizerState opt;
  std::string rng_state;

  uint32_t arm_fingerprint() const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

struct BatchResult {
  double loss = 0.0;       // masked MSE + rate penalty, averaged over the batch
  double mse = 0.0;        // masked MSE alone
  double mean_rate = 0.0;  // spikes per step per neuron
  GradientSet grads;
};

// Masked MSE between readouts and the window-constant per-joint targets;
// also writes dE/dy into loss_grad (same shape as y). Steps outside output
// windows contribute nothing.
double masked_mse(const Matrix& y, const EncodedSample& sample, Matrix* loss_grad);

// Forward + backward over a batch, including the firing-rate regularizer
// (squared deviation of each neuron's sequence-mean rate from target_rate,
// routed back through the surrogate derivative). Losses and gradients are
// averaged over the batch; accumulation order is fixed by sample index.
BatchResult loss_and_grad(const std::vector<const EncodedSample*>& batch,
                          const NetworkWeights& weights, const NeuronConfig& cfg,
                          const NetworkTopology& topo, double reg_factor,
                          double target_rate, int jobs = 1);

struct EpochMetrics {
  uint64_t update = 0;
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double mean_rate = 0.0;
  double test_pos_mm = std::numeric_limits<double>::quiet_NaN();
  double test_rot_deg = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochMetrics> history;
  bool diverged = false;
};

struct TrainHooks {
  std::function<void(const EpochMetrics&)> on_epoch;
  std::function<void(const Checkpoint&)> on_checkpoint;
};

// Adam over the flattened weights with the scheduled lr/regularizer decay.
// Pass `resume_from` to continue a previous run; metrics and weights then
// match the uninterrupted run exactly.
TrainResult train(const Dataset& train_data, const Dataset* test_data,
                  const TrainConfig& config, const TrainHooks& hooks = {},
                  const Checkpoint* resume_from = nullptr);

struct QuantileStats {
  double median = 0.0, q25 = 0.0, q75 = 0.0, mean = 0.0, max = 0.0;
};
QuantileStats quantile_stats(std::vector<double> values);

struct EvalSummary {
  std::vector<QuantileStats> pos_mm_per_joint;   // one entry per joint
  std::vector<QuantileStats> rot_deg_per_joint;
  QuantileStats pos_mm_ee;  // last joint = end-effector
  QuantileStats rot_deg_ee;
  double normalization_mm = 0.0;
};

// Prediction accuracy of a trained model over a dataset. Predictions are the
// per-window means of the readout; positions are reported in mm (and divide
// by normalization_mm for normalized units), orientations in degrees.
EvalSummary evaluate(const Checkpoint& ckpt, const Dataset& data, int jobs = 0,
                     size_t max_samples = 0);

}  // namespace strk
