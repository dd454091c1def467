// Experiment runner: dataset generation, forward-model training, motor
// inference benchmarking, and optimizer comparison. All outputs are CSV or
// the library's binary formats; plotting happens elsewhere.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "strk/config.hpp"
#include "strk/inference.hpp"
#include "strk/parallel.hpp"
#include "strk/serialize.hpp"
#include "strk/training.hpp"

namespace fs = std::filesystem;
using namespace strk;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitNumeric = 3;

void ensure_writable(const std::string& path, bool force) {
  if (!force && fs::exists(path))
    throw IoError("refusing to overwrite " + path + " (use --force)");
}

std::ofstream open_csv(const std::string& path, bool force) {
  ensure_writable(path, force);
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << std::setprecision(17);
  return out;
}

struct GenerateArgs {
  std::string config_path, out_path, csv_path, role = "train";
  long samples = -1;
  long seed = -1;
  bool force = false;
};

int cmd_generate(const GenerateArgs& args) {
  ExperimentConfig cfg = ExperimentConfig::load(args.config_path);
  size_t n_samples = cfg.dataset.samples;
  uint64_t seed = cfg.dataset.seed;
  if (args.role == "test") {
    n_samples = 10000;
    seed = cfg.dataset.seed + 1;  // disjoint stream from the training set
  } else if (args.role != "train") {
    throw InvalidInputError("--role must be train or test");
  }
  if (args.samples > 0) n_samples = static_cast<size_t>(args.samples);
  if (args.seed >= 0) seed = static_cast<uint64_t>(args.seed);

  ensure_writable(args.out_path, args.force);
  const Dataset ds = generate_dataset(cfg.arm, n_samples, seed, cfg.dataset.edge_probability);
  save_dataset(ds, args.out_path);

  double max_reach = 0.0;
  for (const ArmSample& s : ds.samples)
    max_reach = std::max(max_reach, s.joint_poses.back().p.norm());
  std::cout << "wrote " << args.out_path << "\n"
            << "  samples:            " << ds.size() << "\n"
            << "  seed:               " << seed << "\n"
            << "  normalization (mm): " << ds.normalization_mm << "\n"
            << "  max end-effector distance (mm): " << max_reach << "\n"
            << "  reach bound (mm):   " << cfg.arm.n_joints * cfg.arm.max_extension_mm()
            << "\n";
  if (!args.csv_path.empty()) {
    ensure_writable(args.csv_path, args.force);
    export_dataset_csv(ds, args.csv_path);
    std::cout << "  csv export:         " << args.csv_path << "\n";
  }
  return 0;
}

struct TrainArgs {
  std::string config_path, dataset_path, test_path, out_path, metrics_path;
  bool resume = false;
  bool force = false;
  int jobs = 0;
};

int cmd_train(const TrainArgs& args) {
  ExperimentConfig cfg = ExperimentConfig::load(args.config_path);
  cfg.train.jobs = args.jobs;

  const Dataset train_ds = load_dataset(args.dataset_path);
  if (!(train_ds.spec == cfg.arm))
    throw SpecMismatchError("dataset arm does not match config arm");
  std::optional<Dataset> test_ds;
  if (!args.test_path.empty()) {
    test_ds = load_dataset(args.test_path);
    if (!(test_ds->spec == cfg.arm))
      throw SpecMismatchError("test dataset arm does not match config arm");
  }

  std::optional<Checkpoint> resume_from;
  if (args.resume) {
    resume_from = load_checkpoint(args.out_path);
  } else {
    ensure_writable(args.out_path, args.force);
  }

  const std::string metrics_path =
      args.metrics_path.empty() ? args.out_path + ".metrics.csv" : args.metrics_path;
  std::ofstream metrics;
  if (args.resume && fs::exists(metrics_path)) {
    metrics.open(metrics_path, std::ios::app);
    if (!metrics) throw IoError("cannot append to " + metrics_path);
    metrics << std::setprecision(17);
  } else {
    metrics = open_csv(metrics_path, args.force);
    metrics << "update,epoch,lr,loss,mean_rate,test_pos_mm,test_rot_deg\n";
  }

  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochMetrics& m) {
    metrics << m.update << "," << m.epoch << "," << m.lr << "," << m.train_loss << ","
            << m.mean_rate << "," << m.test_pos_mm << "," << m.test_rot_deg << "\n";
    metrics.flush();
    std::cout << "epoch " << m.epoch << "  update " << m.update << "  loss "
              << m.train_loss << "  rate " << m.mean_rate;
    if (std::isfinite(m.test_pos_mm))
      std::cout << "  test_pos_mm " << m.test_pos_mm << "  test_rot_deg " << m.test_rot_deg;
    std::cout << std::endl;
  };
  hooks.on_checkpoint = [&](const Checkpoint& c) {
    const std::string tmp = args.out_path + ".part";
    save_checkpoint(c, tmp);
    fs::rename(tmp, args.out_path);
  };

  const TrainResult result = train(train_ds, test_ds ? &*test_ds : nullptr, cfg.train,
                                   hooks, resume_from ? &*resume_from : nullptr);
  save_checkpoint(result.checkpoint, args.out_path);
  if (result.diverged) {
    std::cerr << "training diverged; wrote last good checkpoint to " << args.out_path
              << std::endl;
    return kExitNumeric;
  }
  std::cout << "wrote " << args.out_path << " after " << result.checkpoint.update_count
            << " updates" << std::endl;
  return 0;
}

struct InferArgs {
  std::string config_path, checkpoint_path, target_file, out_dir = "inference_out";
  long targets = 100;
  long seed = 7;
  long iterations = -1;
  bool no_correction = false;
  bool force = false;
  int jobs = 0;
};

std::vector<InferenceTarget> read_target_file(const std::string& path, double gamma1,
                                              double gamma2, const ArmSpec& arm) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open target file: " + path);
  std::vector<InferenceTarget> targets;
  const double reach = arm.n_joints * arm.max_extension_mm();
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::array<double, 7> v;
    char comma;
    bool ok = true;
    for (int i = 0; i < 7 && ok; ++i) {
      if (!(row >> v[i])) ok = false;
      if (i < 6 && ok && !(row >> comma)) ok = false;
    }
    if (!ok) {
      if (line_no == 1) continue;  // header row
      throw FormatError(path + ": line " + std::to_string(line_no) +
                        " is not x,y,z,qw,qx,qy,qz");
    }
    InferenceTarget t;
    t.p_star = {v[0], v[1], v[2]};
    t.q_star = Eigen::Quaterniond(v[3], v[4], v[5], v[6]).normalized();
    t.gamma1 = gamma1;
    t.gamma2 = gamma2;
    if (t.p_star.norm() > reach)
      std::cerr << "warning: target on line " << line_no << " lies outside the arm's reach ("
                << t.p_star.norm() << " mm > " << reach << " mm); running anyway"
                << std::endl;
    targets.push_back(t);
  }
  return targets;
}

int cmd_infer(const InferArgs& args) {
  ExperimentConfig cfg = ExperimentConfig::load(args.config_path);
  const Checkpoint ckpt = load_checkpoint(args.checkpoint_path);
  if (!(ckpt.arm == cfg.arm))
    throw SpecMismatchError("checkpoint arm does not match config arm");

  InferenceOptions opts = cfg.infer;
  opts.eta0 = cfg.resolved_eta0();
  opts.use_correction = !args.no_correction;
  if (args.iterations > 0) opts.max_iterations = static_cast<int>(args.iterations);

  std::vector<InferenceTarget> targets;
  if (!args.target_file.empty())
    targets = read_target_file(args.target_file, cfg.gamma1, cfg.gamma2, cfg.arm);
  else
    targets = sample_reachable_targets(cfg.arm, static_cast<size_t>(args.targets),
                                       static_cast<uint64_t>(args.seed), cfg.gamma1,
                                       cfg.gamma2);
  if (targets.empty()) throw InvalidInputError("no targets to run");

  fs::create_directories(args.out_dir);
  const std::vector<InferenceRun> runs =
      run_inference_batch(targets, ckpt, cfg.arm, opts, args.jobs);

  auto summary = open_csv(args.out_dir + "/summary.csv", args.force);
  summary << "target,target_x_mm,target_y_mm,target_z_mm,final_pos_err_mm,final_rot_deg,"
             "iterations,early_stopped\n";
  for (size_t i = 0; i < runs.size(); ++i) {
    auto traj = open_csv(args.out_dir + "/run_" + std::to_string(i) + ".csv", args.force);
    traj << "iteration,pos_err_mm,rot_err_deg,eta\n";
    for (size_t t = 0; t < runs[i].history.size(); ++t) {
      const IterationRecord& r = runs[i].history[t];
      traj << t << "," << r.pos_err_mm << "," << r.rot_deg << "," << r.eta << "\n";
    }
    summary << i << "," << targets[i].p_star.x() << "," << targets[i].p_star.y() << ","
            << targets[i].p_star.z() << "," << runs[i].final_pos_err_mm << ","
            << runs[i].final_rot_deg << "," << runs[i].history.size() << ","
            << (runs[i].early_stopped ? 1 : 0) << "\n";
  }
  const std::vector<double> median = error_quantile_curve(runs, 0.5);
  auto curve = open_csv(args.out_dir + "/median_curve.csv", args.force);
  curve << "iteration,median_pos_err_mm\n";
  for (size_t t = 0; t < median.size(); ++t) curve << t << "," << median[t] << "\n";

  std::vector<double> finals;
  for (const InferenceRun& r : runs) finals.push_back(r.final_pos_err_mm);
  const QuantileStats stats = quantile_stats(std::move(finals));
  std::cout << "ran " << runs.size() << " targets; median final position error "
            << stats.median << " mm (q25 " << stats.q25 << ", q75 " << stats.q75 << ")"
            << std::endl;
  return 0;
}

struct EvaluateArgs {
  std::string checkpoint_path, dataset_path, out_path;
  bool force = false;
  int jobs = 0;
};

int cmd_evaluate(const EvaluateArgs& args) {
  const Checkpoint ckpt = load_checkpoint(args.checkpoint_path);
  const Dataset ds = load_dataset(args.dataset_path);
  const EvalSummary summary = evaluate(ckpt, ds, args.jobs);
  std::cout << "prediction error over " << ds.size() << " samples (median [q25, q75]):\n";
  for (size_t k = 0; k < summary.pos_mm_per_joint.size(); ++k) {
    const auto& p = summary.pos_mm_per_joint[k];
    const auto& r = summary.rot_deg_per_joint[k];
    std::cout << "  joint " << k + 1 << ": " << p.median << " mm [" << p.q25 << ", "
              << p.q75 << "]   " << r.median << " deg [" << r.q25 << ", " << r.q75 << "]\n";
  }
  std::cout << "  end-effector: " << summary.pos_mm_ee.median << " mm, "
            << summary.rot_deg_ee.median << " deg (normalized pos err "
            << summary.pos_mm_ee.median / summary.normalization_mm << ")" << std::endl;
  if (!args.out_path.empty()) {
    auto out = open_csv(args.out_path, args.force);
    out << "joint,pos_mm_median,pos_mm_q25,pos_mm_q75,rot_deg_median,rot_deg_q25,"
           "rot_deg_q75\n";
    for (size_t k = 0; k < summary.pos_mm_per_joint.size(); ++k) {
      const auto& p = summary.pos_mm_per_joint[k];
      const auto& r = summary.rot_deg_per_joint[k];
      out << k + 1 << "," << p.median << "," << p.q25 << "," << p.q75 << "," << r.median
          << "," << r.q25 << "," << r.q75 << "\n";
    }
  }
  return 0;
}

struct CompareArgs {
  std::string config_path, out_path = "optimizer_comparison.csv";
  std::vector<std::string> checkpoint_paths;
  long runs_per_opt = 250;
  long iterations = -1;
  long seed = 11;
  bool force = false;
  int jobs = 0;
};

int cmd_compare_optimizers(const CompareArgs& args) {
  ExperimentConfig cfg = ExperimentConfig::load(args.config_path);
  if (args.checkpoint_paths.empty()) throw InvalidInputError("need at least one checkpoint");
  if (args.checkpoint_paths.size() != 5)
    std::cerr << "warning: expected 5 independent forward models, got "
              << args.checkpoint_paths.size() << std::endl;

  std::vector<Checkpoint> models;
  for (const std::string& path : args.checkpoint_paths) {
    models.push_back(load_checkpoint(path));
    if (!(models.back().arm == cfg.arm))
      throw SpecMismatchError("checkpoint arm does not match config arm: " + path);
  }

  InferenceOptions base = cfg.infer;
  base.eta0 = cfg.resolved_eta0();
  if (args.iterations > 0) base.max_iterations = static_cast<int>(args.iterations);
  base.early_stop_patience = 0;  // full curves for every optimizer

  const std::vector<InferenceTarget> targets = sample_reachable_targets(
      cfg.arm, static_cast<size_t>(args.runs_per_opt), static_cast<uint64_t>(args.seed),
      cfg.gamma1, cfg.gamma2);

  auto out = open_csv(args.out_path, args.force);
  out << "optimizer,iteration,q25,median,q75\n";
  for (const OptimizerKind kind :
       {OptimizerKind::Adam, OptimizerKind::AmsGrad, OptimizerKind::SdMomentum,
        OptimizerKind::SdAmsGrad}) {
    InferenceOptions opts = base;
    opts.optimizer = kind;
    // Targets rotate across the independent models.
    std::vector<InferenceRun> runs(targets.size());
    parallel_for(targets.size(), args.jobs, [&](size_t i) {
      const Checkpoint& model = models[i % models.size()];
      runs[i] = run_inference(GearState::neutral(cfg.arm), targets[i], model, cfg.arm, opts);
    });
    const std::vector<double> q25 = error_quantile_curve(runs, 0.25);
    const std::vector<double> med = error_quantile_curve(runs, 0.5);
    const std::vector<double> q75 = error_quantile_curve(runs, 0.75);
    for (size_t t = 0; t < med.size(); ++t)
      out << to_string(kind) << "," << t << "," << q25[t] << "," << med[t] << ","
          << q75[t] << "\n";
    std::cout << to_string(kind) << ": median final " << med.back() << " mm" << std::endl;
  }
  std::cout << "wrote " << args.out_path << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spiking-network forward models and motor inference for modular trunk arms"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Generate a pose dataset");
  generate->add_option("--config", gen.config_path, "Experiment config file")->required();
  generate->add_option("--out", gen.out_path, "Output dataset path")->required();
  generate->add_option("--samples", gen.samples, "Sample count (overrides config/role)");
  generate->add_option("--seed", gen.seed, "Sampling seed (overrides config/role)");
  generate->add_option("--role", gen.role, "train or test (picks count and seed defaults)");
  generate->add_option("--csv", gen.csv_path, "Also export a CSV summary");
  generate->add_flag("--force", gen.force, "Overwrite existing outputs");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train the forward model");
  train_cmd->add_option("--config", tr.config_path, "Experiment config file")->required();
  train_cmd->add_option("--dataset", tr.dataset_path, "Training dataset")->required();
  train_cmd->add_option("--test", tr.test_path, "Test dataset for per-epoch evaluation");
  train_cmd->add_option("--out", tr.out_path, "Checkpoint output path")->required();
  train_cmd->add_option("--metrics", tr.metrics_path, "Metrics CSV (default <out>.metrics.csv)");
  train_cmd->add_flag("--resume", tr.resume, "Continue from the checkpoint at --out");
  train_cmd->add_flag("--force", tr.force, "Overwrite existing outputs");
  train_cmd->add_option("--jobs", tr.jobs, "Worker threads (0 = all cores)");

  InferArgs inf;
  auto* infer_cmd = app.add_subcommand("infer", "Run goal-directed inference");
  infer_cmd->add_option("--config", inf.config_path, "Experiment config file")->required();
  infer_cmd->add_option("--checkpoint", inf.checkpoint_path, "Trained model")->required();
  infer_cmd->add_option("--targets", inf.targets, "Number of random reachable targets");
  infer_cmd->add_option("--target-file", inf.target_file,
                        "CSV of targets: x_mm,y_mm,z_mm,qw,qx,qy,qz");
  infer_cmd->add_option("--out-dir", inf.out_dir, "Directory for trajectory CSVs");
  infer_cmd->add_option("--seed", inf.seed, "Target sampling seed");
  infer_cmd->add_option("--iterations", inf.iterations, "Iteration cap override");
  infer_cmd->add_flag("--no-correction", inf.no_correction,
                      "Disable feedback target correction (ablation)");
  infer_cmd->add_flag("--force", inf.force, "Overwrite existing outputs");
  infer_cmd->add_option("--jobs", inf.jobs, "Worker threads (0 = all cores)");

  EvaluateArgs ev;
  auto* eval_cmd = app.add_subcommand("evaluate", "Prediction accuracy on a dataset");
  eval_cmd->add_option("--checkpoint", ev.checkpoint_path, "Trained model")->required();
  eval_cmd->add_option("--dataset", ev.dataset_path, "Evaluation dataset")->required();
  eval_cmd->add_option("--out", ev.out_path, "Optional per-joint CSV");
  eval_cmd->add_flag("--force", ev.force, "Overwrite existing outputs");
  eval_cmd->add_option("--jobs", ev.jobs, "Worker threads (0 = all cores)");

  CompareArgs cmp;
  auto* cmp_cmd = app.add_subcommand("compare-optimizers",
                                     "Median inference curves per optimizer");
  cmp_cmd->add_option("--config", cmp.config_path, "Experiment config file")->required();
  cmp_cmd->add_option("--checkpoints", cmp.checkpoint_paths, "Trained models (ideally 5)")
      ->required()
      ->expected(-1);
  cmp_cmd->add_option("--runs-per-opt", cmp.runs_per_opt, "Inference runs per optimizer");
  cmp_cmd->add_option("--iterations", cmp.iterations, "Iteration cap override");
  cmp_cmd->add_option("--seed", cmp.seed, "Target sampling seed");
  cmp_cmd->add_option("--out", cmp.out_path, "Output CSV");
  cmp_cmd->add_flag("--force", cmp.force, "Overwrite existing outputs");
  cmp_cmd->add_option("--jobs", cmp.jobs, "Worker threads (0 = all cores)");

  try {
    app.parse(argc, argv);
    if (generate->parsed()) return cmd_generate(gen);
    if (train_cmd->parsed()) return cmd_train(tr);
    if (infer_cmd->parsed()) return cmd_infer(inf);
    if (eval_cmd->parsed()) return cmd_evaluate(ev);
    if (cmp_cmd->parsed()) return cmd_compare_optimizers(cmp);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << std::endl;
    return kExitNumeric;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << std::endl;
    return kExitIo;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitUsage;
  }
  return kExitUsage;
}
