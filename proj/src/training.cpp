#include "strk/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "strk/inference.hpp"
#include "strk/parallel.hpp"
#include "strk/serialize.hpp"

namespace strk {

namespace {

constexpr char kCheckpointMagic[8] = {'S', 'T', 'R', 'K', 'C', 'K', 'P', 'T'};
constexpr uint32_t kCheckpointVersion = 1;

void write_arm_block(BinaryWriter& w, const ArmSpec& spec) {
  w.u32(static_cast<uint32_t>(spec.variant));
  w.u32(static_cast<uint32_t>(spec.n_joints));
  w.f64(spec.tilt_max_deg);
  w.f64(spec.stretch_max_mm);
  w.f64(spec.base_height_mm);
  w.f64(spec.gear_radius_mm);
}

ArmSpec read_arm_block(BinaryReader& r) {
  ArmSpec spec;
  const uint32_t variant = r.u32();
  if (variant > 1) throw FormatError("unknown arm variant tag");
  spec.variant = static_cast<ArmVariant>(variant);
  spec.n_joints = static_cast<int>(r.u32());
  spec.tilt_max_deg = r.f64();
  spec.stretch_max_mm = r.f64();
  spec.base_height_mm = r.f64();
  spec.gear_radius_mm = r.f64();
  return spec;
}

// Weights <-> flat parameter vector, fixed pack order.
Eigen::VectorXd flatten_weights(const NetworkWeights& w) {
  Eigen::VectorXd flat(w.w_in.size() + w.w_rec.size() + w.w_out.size());
  Eigen::Index off = 0;
  for (const Matrix* m : {&w.w_in, &w.w_rec, &w.w_out}) {
    flat.segment(off, m->size()) = Eigen::Map<const Eigen::VectorXd>(m->data(), m->size());
    off += m->size();
  }
  return flat;
}

void unflatten_weights(const Eigen::VectorXd& flat, NetworkWeights& w) {
  Eigen::Index off = 0;
  for (Matrix* m : {&w.w_in, &w.w_rec, &w.w_out}) {
    Eigen::Map<Eigen::VectorXd>(m->data(), m->size()) = flat.segment(off, m->size());
    off += m->size();
  }
}

Eigen::VectorXd flatten_grads(const GradientSet& g) {
  Eigen::VectorXd flat(g.g_in.size() + g.g_rec.size() + g.g_out.size());
  Eigen::Index off = 0;
  for (const Matrix* m : {&g.g_in, &g.g_rec, &g.g_out}) {
    flat.segment(off, m->size()) = Eigen::Map<const Eigen::VectorXd>(m->data(), m->size());
    off += m->size();
  }
  return flat;
}

}  // namespace

double TrainConfig::lr_at(uint64_t update) const {
  if (lr_decay_every <= 0) return lr0;
  return lr0 * std::pow(lr_decay_factor, static_cast<double>(update / static_cast<uint64_t>(lr_decay_every)));
}

double TrainConfig::reg_at(uint64_t update) const {
  if (lr_decay_every <= 0) return reg_factor;
  return reg_factor * std::pow(lr_decay_factor, static_cast<double>(update / static_cast<uint64_t>(lr_decay_every)));
}

NetworkTopology TrainConfig::topology(const ArmSpec& arm) const {
  NetworkTopology topo;
  topo.n_in = input_width(arm.n_joints);
  topo.n_hidden = n_hidden;
  topo.n_alif = n_alif < 0 ? n_hidden / 2 : n_alif;
  topo.n_out = kPoseDim;
  topo.validate();
  return topo;
}

uint32_t Checkpoint::arm_fingerprint() const {
  std::ostringstream os;
  BinaryWriter w(os);
  write_arm_block(w, arm);
  return w.crc();
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  BinaryWriter w(out);
  w.bytes(kCheckpointMagic, sizeof kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u32(ckpt.arm_fingerprint());
  write_arm_block(w, ckpt.arm);
  w.f64(ckpt.normalization_mm);
  w.u32(static_cast<uint32_t>(ckpt.topo.n_in));
  w.u32(static_cast<uint32_t>(ckpt.topo.n_hidden));
  w.u32(static_cast<uint32_t>(ckpt.topo.n_alif));
  w.u32(static_cast<uint32_t>(ckpt.topo.n_out));
  w.f64(ckpt.cfg.alpha);
  w.f64(ckpt.cfg.rho);
  w.f64(ckpt.cfg.zeta);
  w.f64(ckpt.cfg.v_thr);
  w.f64(ckpt.cfg.lambda_pd);
  w.u64(ckpt.update_count);
  w.u64(ckpt.epoch);
  w.u64(ckpt.epoch_offset_updates);
  w.f64(ckpt.epoch_loss_sum);
  w.f64(ckpt.epoch_rate_sum);
  w.str(ckpt.rng_state);
  w.matrix(ckpt.weights.w_in);
  w.matrix(ckpt.weights.w_rec);
  w.matrix(ckpt.weights.w_out);
  w.vector(ckpt.opt.m);
  w.vector(ckpt.opt.v);
  w.vector(ckpt.opt.v_max);
  w.vector(ckpt.opt.s);
  w.u64(static_cast<uint64_t>(ckpt.opt.step_count));
  w.finish_with_crc();
  if (!out) throw IoError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  BinaryReader r(in);
  char magic[8];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
    throw FormatError("not a checkpoint file (bad magic): " + path);
  const uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw VersionError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  const uint32_t fingerprint = r.u32();
  ckpt.arm = read_arm_block(r);
  ckpt.normalization_mm = r.f64();
  ckpt.topo.n_in = static_cast<int>(r.u32());
  ckpt.topo.n_hidden = static_cast<int>(r.u32());
  ckpt.topo.n_alif = static_cast<int>(r.u32());
  ckpt.topo.n_out = static_cast<int>(r.u32());
  ckpt.cfg.alpha = r.f64();
  ckpt.cfg.rho = r.f64();
  ckpt.cfg.zeta = r.f64();
  ckpt.cfg.v_thr = r.f64();
  ckpt.cfg.lambda_pd = r.f64();
  ckpt.update_count = r.u64();
  ckpt.epoch = r.u64();
  ckpt.epoch_offset_updates = r.u64();
  ckpt.epoch_loss_sum = r.f64();
  ckpt.epoch_rate_sum = r.f64();
  ckpt.rng_state = r.str();
  ckpt.weights.w_in = r.matrix();
  ckpt.weights.w_rec = r.matrix();
  ckpt.weights.w_out = r.matrix();
  ckpt.opt.m = r.vector();
  ckpt.opt.v = r.vector();
  ckpt.opt.v_max = r.vector();
  ckpt.opt.s = r.vector();
  ckpt.opt.step_count = static_cast<long>(r.u64());
  r.verify_trailing_crc();
  if (fingerprint != ckpt.arm_fingerprint())
    throw ChecksumError("arm fingerprint does not match spec block");
  ckpt.arm.validate();
  ckpt.topo.validate();
  ckpt.cfg.validate();
  ckpt.weights.validate(ckpt.topo);
  return ckpt;
}

double masked_mse(const Matrix& y, const EncodedSample& sample, Matrix* loss_grad) {
  const int n = sample.n_joints();
  const Eigen::Index T = sample.length();
  if (y.rows() != T || y.cols() != kPoseDim)
    throw ShapeError("readout shape does not match sample");
  if (loss_grad) loss_grad->setZero(T, kPoseDim);
  const double denom = static_cast<double>(n) * kOutputStepsPerJoint * kPoseDim;
  double sum_sq = 0.0;
  for (int k = 0; k < n; ++k) {
    for (int s = kClockOnset; s < kStepsPerJoint; ++s) {
      const Eigen::Index t = k * kStepsPerJoint + s;
      const Eigen::RowVectorXd diff = y.row(t) - sample.targets.row(k);
      sum_sq += diff.squaredNorm();
      if (loss_grad) loss_grad->row(t) = 2.0 * diff / denom;
    }
  }
  return sum_sq / denom;
}

BatchResult loss_and_grad(const std::vector<const EncodedSample*>& batch,
                          const NetworkWeights& weights, const NeuronConfig& cfg,
                          const NetworkTopology& topo, double reg_factor,
                          double target_rate, int jobs) {
  if (batch.empty()) throw InvalidInputError("empty batch");
  const Eigen::Index T = batch.front()->length();
  for (const EncodedSample* s : batch)
    if (s->length() != T) throw ShapeError("batch sequences must share one length");

  struct PerSample {
    double loss, mse, rate;
    GradientSet grads;
  };
  std::vector<PerSample> results(batch.size());

  parallel_for(batch.size(), jobs, [&](size_t i) {
    const EncodedSample& sample = *batch[i];
    const SpikeTape tape = forward(sample.inputs, weights, cfg, topo);
    Matrix loss_grad;
    const double mse = masked_mse(tape.state.y, sample, &loss_grad);

    // Rate penalty: reg * sum_j (f_j - target)^2, f_j the sequence-mean rate.
    const Eigen::RowVectorXd rates = tape.state.z.colwise().mean();
    const Eigen::RowVectorXd rate_dev = rates.array() - target_rate;
    const double rate_loss = reg_factor * rate_dev.squaredNorm();
    const Eigen::RowVectorXd dE_dz_row =
        (2.0 * reg_factor / static_cast<double>(T)) * rate_dev;
    const Matrix spike_grad = Eigen::VectorXd::Ones(T) * dE_dz_row;

    results[i].grads = backward(tape, weights, cfg, topo, loss_grad, &spike_grad);
    results[i].loss = mse + rate_loss;
    results[i].mse = mse;
    results[i].rate = rates.mean();
  });

  BatchResult out;
  out.grads = GradientSet::zeros(topo, T);
  for (const PerSample& r : results) {
    out.loss += r.loss;
    out.mse += r.mse;
    out.mean_rate += r.rate;
    out.grads += r.grads;
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  out.loss *= inv;
  out.mse *= inv;
  out.mean_rate *= inv;
  out.grads *= inv;
  return out;
}

TrainResult train(const Dataset& train_data, const Dataset* test_data,
                  const TrainConfig& config, const TrainHooks& hooks,
                  const Checkpoint* resume_from) {
  if (train_data.samples.empty()) throw InvalidInputError("empty training dataset");
  const ArmSpec& arm = train_data.spec;
  const NetworkTopology topo = config.topology(arm);
  if (test_data && !(test_data->spec == arm))
    throw SpecMismatchError("test dataset was generated for a different arm");

  NeuronConfig cfg;  // network constants are not training hyperparameters
  Checkpoint ckpt;
  std::mt19937_64 rng;
  if (resume_from) {
    ckpt = *resume_from;
    if (!(ckpt.arm == arm))
      throw SpecMismatchError("checkpoint was trained on a different arm");
    if (!(ckpt.topo == topo))
      throw SpecMismatchError("checkpoint topology does not match config");
    cfg = ckpt.cfg;
    rng = rng_from_string(ckpt.rng_state);
  } else {
    rng = std::mt19937_64(config.seed);
    ckpt.arm = arm;
    ckpt.normalization_mm = train_data.normalization_mm;
    ckpt.topo = topo;
    ckpt.cfg = cfg;
    ckpt.weights = init_weights(topo, rng, config.zero_self_recurrence);
    ckpt.opt = OptimizerState::zeros(flatten_weights(ckpt.weights).size());
    ckpt.rng_state = rng_to_string(rng);
  }

  Eigen::VectorXd theta = flatten_weights(ckpt.weights);
  const size_t n_samples = train_data.samples.size();
  const size_t batches_per_epoch = (n_samples + config.batch_size - 1) / config.batch_size;

  TrainResult result;
  Checkpoint last_good = ckpt;

  std::vector<size_t> order(n_samples);
  OptimizerHyper adam_hyper;  // standard Adam parameters; eta set per update

  auto snapshot = [&](uint64_t epoch, uint64_t offset, double loss_sum, double rate_sum) {
    ckpt.epoch = epoch;
    ckpt.epoch_offset_updates = offset;
    ckpt.epoch_loss_sum = loss_sum;
    ckpt.epoch_rate_sum = rate_sum;
    unflatten_weights(theta, ckpt.weights);
  };

  for (uint64_t epoch = ckpt.epoch; epoch < static_cast<uint64_t>(config.epochs); ++epoch) {
    // The shuffle consumes RNG state; remember the pre-shuffle state so a
    // resume can re-derive this epoch's batch order.
    ckpt.rng_state = rng_to_string(rng);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    uint64_t batch_index = 0;
    double epoch_loss_sum = 0.0;
    double epoch_rate_sum = 0.0;
    uint64_t counted_updates = 0;
    if (epoch == ckpt.epoch && ckpt.epoch_offset_updates > 0) {
      batch_index = ckpt.epoch_offset_updates;
      epoch_loss_sum = ckpt.epoch_loss_sum;
      epoch_rate_sum = ckpt.epoch_rate_sum;
      counted_updates = ckpt.epoch_offset_updates;
    }

    for (; batch_index < batches_per_epoch; ++batch_index) {
      const size_t begin = batch_index * config.batch_size;
      const size_t end = std::min(n_samples, begin + config.batch_size);
      std::vector<EncodedSample> encoded;
      encoded.reserve(end - begin);
      for (size_t i = begin; i < end; ++i)
        encoded.push_back(train_data.encode_sample(order[i]));
      std::vector<const EncodedSample*> batch;
      for (const EncodedSample& s : encoded) batch.push_back(&s);

      const double reg = config.reg_at(ckpt.update_count);
      BatchResult br = loss_and_grad(batch, ckpt.weights, cfg, topo, reg,
                                     config.target_rate, config.jobs);
      if (!std::isfinite(br.loss)) {
        result.checkpoint = last_good;
        result.diverged = true;
        return result;
      }

      adam_hyper.eta = config.lr_at(ckpt.update_count);
      adam_step(theta, flatten_grads(br.grads), ckpt.opt, adam_hyper);
      unflatten_weights(theta, ckpt.weights);
      ckpt.update_count += 1;
      epoch_loss_sum += br.loss;
      epoch_rate_sum += br.mean_rate;
      counted_updates += 1;

      if (config.checkpoint_every_updates > 0 && hooks.on_checkpoint &&
          ckpt.update_count % static_cast<uint64_t>(config.checkpoint_every_updates) == 0) {
        snapshot(epoch, batch_index + 1, epoch_loss_sum, epoch_rate_sum);
        hooks.on_checkpoint(ckpt);
      }
    }

    EpochMetrics metrics;
    metrics.update = ckpt.update_count;
    metrics.epoch = static_cast<int>(epoch);
    metrics.lr = config.lr_at(ckpt.update_count);
    metrics.train_loss = epoch_loss_sum / static_cast<double>(counted_updates);
    metrics.mean_rate =
        counted_updates > 0 ? epoch_rate_sum / static_cast<double>(counted_updates) : 0.0;

    snapshot(epoch + 1, 0, 0.0, 0.0);
    ckpt.rng_state = rng_to_string(rng);
    if (test_data) {
      const EvalSummary eval = evaluate(ckpt, *test_data, config.jobs, config.test_eval_max);
      metrics.test_pos_mm = eval.pos_mm_ee.median;
      metrics.test_rot_deg = eval.rot_deg_ee.median;
    }
    result.history.push_back(metrics);
    if (hooks.on_epoch) hooks.on_epoch(metrics);
    last_good = ckpt;
    if (hooks.on_checkpoint && config.checkpoint_every_updates == 0)
      hooks.on_checkpoint(ckpt);
  }

  result.checkpoint = ckpt;
  return result;
}

QuantileStats quantile_stats(std::vector<double> values) {
  if (values.empty()) throw InvalidInputError("no values to summarize");
  std::sort(values.begin(), values.end());
  auto quantile = [&](double q) {
    const double idx = q * static_cast<double>(values.size() - 1);
    const size_t lo = static_cast<size_t>(idx);
    const size_t hi = std::min(values.size() - 1, lo + 1);
    const double frac = idx - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
  };
  QuantileStats s;
  s.median = quantile(0.5);
  s.q25 = quantile(0.25);
  s.q75 = quantile(0.75);
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) /
           static_cast<double>(values.size());
  s.max = values.back();
  return s;
}

EvalSummary evaluate(const Checkpoint& ckpt, const Dataset& data, int jobs,
                     size_t max_samples) {
  if (!(data.spec == ckpt.arm))
    throw SpecMismatchError("dataset was generated for a different arm");
  const size_t n = max_samples > 0 ? std::min(max_samples, data.size()) : data.size();
  if (n == 0) throw InvalidInputError("empty dataset");
  const int n_joints = ckpt.arm.n_joints;

  Matrix pos_err(n, n_joints), rot_err(n, n_joints);
  parallel_for(n, jobs, [&](size_t i) {
    const EncodedSample sample = data.encode_sample(i);
    const SpikeTape tape = forward(sample.inputs, ckpt.weights, ckpt.cfg, ckpt.topo);
    for (int k = 0; k < n_joints; ++k) {
      const Eigen::RowVectorXd pred = window_prediction(tape.state.y, k);
      Pose predicted;
      predicted.p = pred.segment<3>(0).transpose() * ckpt.normalization_mm;
      predicted.q = Eigen::Quaterniond(pred[3], pred[4], pred[5], pred[6]).normalized();
      const PoseError err = pose_metrics(predicted, data.samples[i].joint_poses[k]);
      pos_err(i, k) = err.pos_mm;
      rot_err(i, k) = err.rot_deg;
    }
  });

  EvalSummary summary;
  summary.normalization_mm = ckpt.normalization_mm;
  for (int k = 0; k < n_joints; ++k) {
    std::vector<double> p(pos_err.col(k).data(), pos_err.col(k).data() + n);
    std::vector<double> r(rot_err.col(k).data(), rot_err.col(k).data() + n);
    summary.pos_mm_per_joint.push_back(quantile_stats(std::move(p)));
    summary.rot_deg_per_joint.push_back(quantile_stats(std::move(r)));
  }
  summary.pos_mm_ee = summary.pos_mm_per_joint.back();
  summary.rot_deg_ee = summary.rot_deg_per_joint.back();
  return summary;
}

}  // namespace strk
