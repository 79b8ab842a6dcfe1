#include "egdiff/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "egdiff/io.hpp"

namespace egdiff {

namespace {

const std::set<std::string> kKnownKeys = {
    "kind",
    "seed",
    "data.dataset",
    "data.n",
    "energy.name",
    "energy.beta",
    "schedule.beta0",
    "schedule.beta1",
    "schedule.t_max",
    "schedule.t_min",
    "network.hidden",
    "network.activation",
    "network.time_embedding_dim",
    "prior_train.steps",
    "prior_train.batch_size",
    "prior_train.learning_rate",
    "prior_train.final_lr_fraction",
    "guidance_train.method",
    "guidance_train.steps",
    "guidance_train.learning_rate",
    "guidance_train.final_lr_fraction",
    "guidance_train.group_size",
    "guidance_train.groups_per_step",
    "guidance_train.batch_size",
    "sampler.steps",
    "sampler.method",
    "sampler.guidance_scale",
    "sampler.n_samples",
    "compare2d.betas",
    "compare2d.methods",
    "qgpo.episodes",
    "qgpo.mix",
    "qgpo.k",
    "qgpo.beta",
    "qgpo.beta_q",
    "qgpo.gamma",
    "qgpo.tau",
    "qgpo.double_q",
    "qgpo.behavior_steps",
    "qgpo.behavior_batch",
    "qgpo.behavior_lr",
    "qgpo.q_steps",
    "qgpo.q_batch",
    "qgpo.q_lr",
    "qgpo.guidance_steps",
    "qgpo.guidance_states_per_step",
    "qgpo.guidance_lr",
    "qgpo.support_sampler_steps",
    "qgpo.eval_episodes",
    "qgpo.eval_sampler_steps",
    "qgpo.scales",
    "oracle_grid.lo",
    "oracle_grid.hi",
    "oracle_grid.n",
    "oracle_grid.times",
    "io.prior_checkpoint",
    "io.guidance_checkpoint",
};

const std::set<std::string> kKinds = {"prior",     "guidance", "sample",
                                      "compare2d", "qgpo",     "oracle-grid"};

class Reader {
 public:
  explicit Reader(const TomlTable& table) : table_(table) {}

  bool has(const std::string& key) const { return table_.count(key) > 0; }

  const TomlValue* find(const std::string& key) const {
    auto it = table_.find(key);
    return it == table_.end() ? nullptr : &it->second;
  }

  template <typename T, typename Fn>
  void maybe(const std::string& key, T& out, Fn&& convert) const {
    if (const TomlValue* v = find(key)) {
      try {
        out = convert(*v);
      } catch (const TomlError& e) {
        throw ConfigError("config key '" + key + "': " + e.what());
      }
    }
  }

  void maybe_int(const std::string& key, int& out) const {
    maybe(key, out, [](const TomlValue& v) { return static_cast<int>(v.as_int()); });
  }
  void maybe_double(const std::string& key, double& out) const {
    maybe(key, out, [](const TomlValue& v) { return v.as_float(); });
  }
  void maybe_bool(const std::string& key, bool& out) const {
    maybe(key, out, [](const TomlValue& v) { return v.as_bool(); });
  }
  void maybe_string(const std::string& key, std::string& out) const {
    maybe(key, out, [](const TomlValue& v) { return v.as_string(); });
  }

 private:
  const TomlTable& table_;
};

}  // namespace

NetworkSpec RunConfig::network_spec() const {
  NetworkSpec spec;
  spec.hidden = hidden;
  spec.activation = activation;
  spec.time_embedding = TimeEmbedding::kSinusoidal;
  spec.time_embedding_dim = time_embedding_dim;
  return spec;
}

RunConfig RunConfig::from_text(const std::string& text,
                               std::optional<std::uint64_t> seed_override) {
  TomlTable table;
  try {
    table = parse_toml(text);
  } catch (const TomlError& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }

  for (const auto& [key, value] : table) {
    (void)value;
    if (!kKnownKeys.count(key)) {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }

  Reader reader(table);
  RunConfig cfg;

  if (!reader.has("kind")) throw ConfigError("config is missing 'kind'");
  reader.maybe_string("kind", cfg.kind);
  if (!kKinds.count(cfg.kind)) {
    throw ConfigError("unknown experiment kind '" + cfg.kind + "'");
  }
  if (!reader.has("seed") && !seed_override) {
    throw ConfigError("config is missing 'seed' (seeds must be explicit)");
  }
  long long seed = 0;
  reader.maybe("seed", seed, [](const TomlValue& v) { return v.as_int(); });
  cfg.seed = seed_override ? *seed_override : static_cast<std::uint64_t>(seed);

  reader.maybe_string("data.dataset", cfg.dataset);
  reader.maybe_int("data.n", cfg.data_n);
  if (cfg.data_n < 0) throw ConfigError("data.n must be >= 0");

  reader.maybe_string("energy.name", cfg.energy_name);
  reader.maybe_double("energy.beta", cfg.beta);
  if (!(cfg.beta >= 0.0)) {
    throw ConfigError("energy.beta must be >= 0 (inverse temperature)");
  }

  double b0 = 0.1, b1 = 20.0, tmax = 1.0, tmin = 1e-3;
  reader.maybe_double("schedule.beta0", b0);
  reader.maybe_double("schedule.beta1", b1);
  reader.maybe_double("schedule.t_max", tmax);
  reader.maybe_double("schedule.t_min", tmin);
  try {
    cfg.schedule = Schedule(b0, b1, tmax, tmin);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("bad schedule: ") + e.what());
  }

  if (const TomlValue* v = reader.find("network.hidden")) {
    cfg.hidden.clear();
    for (const TomlValue& h : v->as_array()) {
      cfg.hidden.push_back(static_cast<int>(h.as_int()));
      if (cfg.hidden.back() < 1) throw ConfigError("network.hidden widths >= 1");
    }
  }
  std::string act = "silu";
  reader.maybe_string("network.activation", act);
  if (act == "silu") cfg.activation = Activation::kSiLU;
  else if (act == "relu") cfg.activation = Activation::kReLU;
  else throw ConfigError("network.activation must be 'silu' or 'relu'");
  reader.maybe_int("network.time_embedding_dim", cfg.time_embedding_dim);

  reader.maybe_int("prior_train.steps", cfg.prior_train.steps);
  reader.maybe_int("prior_train.batch_size", cfg.prior_train.batch_size);
  reader.maybe_double("prior_train.learning_rate", cfg.prior_train.learning_rate);
  reader.maybe_double("prior_train.final_lr_fraction",
                      cfg.prior_train.final_lr_fraction);

  reader.maybe_string("guidance_train.method", cfg.guidance_method);
  reader.maybe_int("guidance_train.steps", cfg.guidance_train.steps);
  reader.maybe_double("guidance_train.learning_rate",
                      cfg.guidance_train.learning_rate);
  reader.maybe_double("guidance_train.final_lr_fraction",
                      cfg.guidance_train.final_lr_fraction);
  reader.maybe_int("guidance_train.group_size", cfg.guidance_train.group_size);
  reader.maybe_int("guidance_train.groups_per_step",
                   cfg.guidance_train.groups_per_step);
  reader.maybe_int("guidance_train.batch_size", cfg.guidance_train.batch_size);

  reader.maybe_int("sampler.steps", cfg.sampler.steps);
  std::string sm = "solver2";
  reader.maybe_string("sampler.method", sm);
  if (sm == "euler") cfg.sampler.method = SamplerMethod::kEuler;
  else if (sm == "solver2") cfg.sampler.method = SamplerMethod::kSolver2;
  else throw ConfigError("sampler.method must be 'euler' or 'solver2'");
  reader.maybe_double("sampler.guidance_scale", cfg.sampler.guidance_scale);
  reader.maybe_int("sampler.n_samples", cfg.n_samples);
  cfg.sampler.seed = cfg.seed;
  try {
    cfg.sampler.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("bad sampler config: ") + e.what());
  }

  if (const TomlValue* v = reader.find("compare2d.betas")) {
    cfg.betas = v->as_float_array();
    for (double b : cfg.betas) {
      if (!(b >= 0.0)) throw ConfigError("compare2d.betas must be >= 0");
    }
  }
  if (const TomlValue* v = reader.find("compare2d.methods")) {
    cfg.methods = v->as_string_array();
    for (const std::string& m : cfg.methods) {
      guidance_method_from_string(m);  // throws on unknown
    }
  }

  reader.maybe_int("qgpo.episodes", cfg.qgpo.episodes);
  reader.maybe_double("qgpo.mix", cfg.qgpo.mix);
  reader.maybe_int("qgpo.k", cfg.qgpo.k);
  reader.maybe_double("qgpo.beta", cfg.qgpo.beta);
  reader.maybe_double("qgpo.beta_q", cfg.qgpo.beta_q);
  reader.maybe_double("qgpo.gamma", cfg.qgpo.gamma);
  reader.maybe_double("qgpo.tau", cfg.qgpo.tau);
  reader.maybe_bool("qgpo.double_q", cfg.qgpo.double_q);
  reader.maybe_int("qgpo.behavior_steps", cfg.qgpo.behavior_steps);
  reader.maybe_int("qgpo.behavior_batch", cfg.qgpo.behavior_batch);
  reader.maybe_double("qgpo.behavior_lr", cfg.qgpo.behavior_lr);
  reader.maybe_int("qgpo.q_steps", cfg.qgpo.q_steps);
  reader.maybe_int("qgpo.q_batch", cfg.qgpo.q_batch);
  reader.maybe_double("qgpo.q_lr", cfg.qgpo.q_lr);
  reader.maybe_int("qgpo.guidance_steps", cfg.qgpo.guidance_steps);
  reader.maybe_int("qgpo.guidance_states_per_step",
                   cfg.qgpo.guidance_states_per_step);
  reader.maybe_double("qgpo.guidance_lr", cfg.qgpo.guidance_lr);
  reader.maybe_int("qgpo.support_sampler_steps", cfg.qgpo.support_sampler_steps);
  reader.maybe_int("qgpo.eval_episodes", cfg.qgpo.eval_episodes);
  reader.maybe_int("qgpo.eval_sampler_steps", cfg.qgpo.eval_sampler_steps);
  if (const TomlValue* v = reader.find("qgpo.scales")) {
    cfg.qgpo.scales = v->as_float_array();
  }
  if (!(cfg.qgpo.mix >= 0.0 && cfg.qgpo.mix <= 1.0)) {
    throw ConfigError("qgpo.mix must be in [0, 1]");
  }

  reader.maybe_double("oracle_grid.lo", cfg.oracle_grid.lo);
  reader.maybe_double("oracle_grid.hi", cfg.oracle_grid.hi);
  reader.maybe_int("oracle_grid.n", cfg.oracle_grid.grid_n);
  if (const TomlValue* v = reader.find("oracle_grid.times")) {
    cfg.oracle_grid.times = v->as_float_array();
  }

  reader.maybe_string("io.prior_checkpoint", cfg.prior_checkpoint);
  reader.maybe_string("io.guidance_checkpoint", cfg.guidance_checkpoint);

  // Hash the canonical content plus any seed override so reruns of the same
  // effective configuration share a fingerprint.
  std::ostringstream canon;
  canon << text << "\nseed=" << cfg.seed << "\n";
  cfg.config_hash = fnv1a_hex(canon.str());
  return cfg;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path,
                               std::optional<std::uint64_t> seed_override) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str(), seed_override);
}

}  // namespace egdiff
