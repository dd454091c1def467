#include "strk/config.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace strk {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

// Key/value store that remembers which keys were consumed so leftovers can
// be reported as typos.
class KeyValues {
 public:
  explicit KeyValues(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw InvalidInputError("config line " + std::to_string(line_no) +
                                ": expected key = value");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty()) throw InvalidInputError("config line " + std::to_string(line_no) +
                                               ": empty key");
      if (!entries_.emplace(key, value).second)
        throw InvalidInputError("duplicate config key: " + key);
    }
  }

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  template <typename T, typename Parse>
  void get(const std::string& key, T& out, Parse parse) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return;
    consumed_.insert(key);
    try {
      out = parse(it->second);
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      throw InvalidInputError("config key '" + key + "': cannot parse '" + it->second + "'");
    }
  }

  void check_all_consumed() const {
    for (const auto& [key, value] : entries_)
      if (!consumed_.count(key)) throw InvalidInputError("unknown config key: " + key);
  }

 private:
  std::map<std::string, std::string> entries_;
  std::set<std::string> consumed_;
};

double parse_double(const std::string& s) {
  size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw InvalidInputError("trailing characters");
  return v;
}

long parse_long(const std::string& s) {
  size_t pos = 0;
  const long v = std::stol(s, &pos);
  if (pos != s.size()) throw InvalidInputError("trailing characters");
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw InvalidInputError("expected true/false");
}

}  // namespace

ExperimentConfig ExperimentConfig::from_string(const std::string& text) {
  KeyValues kv(text);
  ExperimentConfig cfg;

  // The variant decides the geometry defaults, so resolve it before the
  // remaining arm keys.
  ArmVariant variant = ArmVariant::FourGeared;
  kv.get("arm.variant", variant, [](const std::string& v) {
    if (v == "three_geared") return ArmVariant::ThreeGeared;
    if (v == "four_geared") return ArmVariant::FourGeared;
    throw InvalidInputError("arm.variant must be three_geared or four_geared");
  });
  int n_joints = 10;
  kv.get("arm.n_joints", n_joints, [](const std::string& v) {
    return static_cast<int>(parse_long(v));
  });
  cfg.arm = variant == ArmVariant::ThreeGeared ? ArmSpec::three_geared(n_joints)
                                               : ArmSpec::four_geared(n_joints);
  kv.get("arm.tilt_max_deg", cfg.arm.tilt_max_deg, parse_double);
  kv.get("arm.stretch_max_mm", cfg.arm.stretch_max_mm, parse_double);
  kv.get("arm.base_height_mm", cfg.arm.base_height_mm, parse_double);
  kv.get("arm.gear_radius_mm", cfg.arm.gear_radius_mm, parse_double);
  cfg.arm.validate();

  kv.get("neuron.alpha", cfg.neuron.alpha, parse_double);
  kv.get("neuron.rho", cfg.neuron.rho, parse_double);
  kv.get("neuron.zeta", cfg.neuron.zeta, parse_double);
  kv.get("neuron.v_thr", cfg.neuron.v_thr, parse_double);
  kv.get("neuron.lambda_pd", cfg.neuron.lambda_pd, parse_double);
  cfg.neuron.validate();

  kv.get("dataset.samples", cfg.dataset.samples, [](const std::string& v) {
    const long n = parse_long(v);
    if (n < 1) throw InvalidInputError("dataset.samples must be >= 1");
    return static_cast<size_t>(n);
  });
  kv.get("dataset.seed", cfg.dataset.seed, [](const std::string& v) {
    return static_cast<uint64_t>(parse_long(v));
  });
  kv.get("dataset.edge_probability", cfg.dataset.edge_probability, parse_double);

  kv.get("net.n_hidden", cfg.train.n_hidden, [](const std::string& v) {
    return static_cast<int>(parse_long(v));
  });
  kv.get("net.n_alif", cfg.train.n_alif, [](const std::string& v) {
    return static_cast<int>(parse_long(v));
  });
  kv.get("net.zero_self_recurrence", cfg.train.zero_self_recurrence, parse_bool);

  kv.get("train.batch_size", cfg.train.batch_size, [](const std::string& v) {
    return static_cast<int>(parse_long(v));
  });
  kv.get("train.lr0", cfg.train.lr0, parse_double);
  kv.get("train.lr_decay_factor", cfg.train.lr_decay_factor, parse_double);
  kv.get("train.lr_decay_every", cfg.train.lr_decay_every, parse_long);
  kv.get("train.reg_factor", cfg.train.reg_factor, parse_double);
  kv.get("train.target_rate", cfg.train.target_rate, parse_double);
  kv.get("train.epochs", cfg.train.epochs, [](const std::string& v) {
    return static_cast<int>(parse_long(v));
  });
  kv.get("train.seed", cfg.train.seed, [](const std::string& v) {
    return static_cast<uint64_t>(parse_long(v));
  });
  kv.get("train.checkpoint_every", cfg.train.checkpoint_every_updates, parse_long);
  kv.get("train.test_eval_max", cfg.train.test_eval_max, [](const std::string& v) {
    return static_cast<size_t>(parse_long(v));
  });

  kv.get("infer.optimizer", cfg.infer.optimizer, [](const std::string& v) {
    return optimizer_kind_from_string(v);
  });
  if (kv.has("infer.eta0")) cfg.eta0_explicit = true;
  kv.get("infer.eta0", cfg.infer.eta0, parse_double);
  kv.get("infer.beta1", cfg.infer.beta1, parse_double);
  kv.get("infer.beta2", cfg.infer.beta2, parse_double);
  kv.get("infer.beta3", cfg.infer.beta3, parse_double);
  kv.get("infer.epsilon", cfg.infer.epsilon, parse_double);
  kv.get("infer.max_iterations", cfg.infer.max_iterations, [](const std::string& v) {
    return static_cast<int>(parse_long(v));
  });
  kv.get("infer.early_stop_tol_mm", cfg.infer.early_stop_tol_mm, parse_double);
  kv.get("infer.early_stop_patience", cfg.infer.early_stop_patience,
         [](const std::string& v) { return static_cast<int>(parse_long(v)); });
  kv.get("infer.gamma1", cfg.gamma1, parse_double);
  kv.get("infer.gamma2", cfg.gamma2, parse_double);

  // One master seed for commands that need several streams.
  uint64_t seed = 0;
  bool have_seed = kv.has("seed");
  kv.get("seed", seed, [](const std::string& v) {
    return static_cast<uint64_t>(parse_long(v));
  });
  if (have_seed) {
    if (!kv.has("dataset.seed")) cfg.dataset.seed = seed;
    if (!kv.has("train.seed")) cfg.train.seed = seed;
  }

  kv.check_all_consumed();
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return from_string(text.str());
}

double ExperimentConfig::resolved_eta0() const {
  if (eta0_explicit) return infer.eta0;
  return train.n_hidden >= 512 ? 0.01 : 0.1;
}

}  // namespace strk
