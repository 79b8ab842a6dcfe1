#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "egdiff/guidance.hpp"
#include "egdiff/prior.hpp"
#include "egdiff/sampler.hpp"
#include "egdiff/schedule.hpp"
#include "egdiff/toml.hpp"

namespace egdiff {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct QgpoOptions {
  int episodes = 500;
  double mix = 0.5;
  int k = 16;
  double beta = 3.0;
  double beta_q = 1.0;
  double gamma = 0.95;
  double tau = 0.005;
  bool double_q = true;
  int behavior_steps = 12000;
  int behavior_batch = 256;
  double behavior_lr = 1e-3;
  int q_steps = 8000;
  int q_batch = 128;
  double q_lr = 3e-4;
  int guidance_steps = 6000;
  int guidance_states_per_step = 8;
  double guidance_lr = 1e-3;
  int support_sampler_steps = 15;
  int eval_episodes = 100;
  int eval_sampler_steps = 15;
  std::vector<double> scales{0.0, 1.0, 2.0, 3.0, 5.0, 8.0, 10.0};
};

struct OracleGridOptions {
  double lo = -4.0;
  double hi = 4.0;
  int grid_n = 41;
  std::vector<double> times{0.1, 0.5, 1.0};
};

/// One experiment description parsed from a TOML file. Unknown keys and
/// out-of-range values are rejected at parse time; seeds are always explicit.
struct RunConfig {
  std::string kind;  // prior | guidance | sample | compare2d | qgpo | oracle-grid
  std::uint64_t seed = 0;
  std::string config_hash;

  std::string dataset = "8gaussians";
  int data_n = 100000;

  std::string energy_name = "linear";
  double beta = 1.0;

  Schedule schedule{};

  std::vector<int> hidden{128, 128, 128};
  Activation activation = Activation::kSiLU;
  int time_embedding_dim = 16;

  PriorTrainOptions prior_train{};
  GuidanceTrainOptions guidance_train{};
  std::string guidance_method = "CEP";

  SamplerConfig sampler{};
  int n_samples = 4096;

  std::vector<double> betas{1.0, 10.0};
  std::vector<std::string> methods{"NONE", "CEP", "MSE", "EMSE", "DPS"};

  QgpoOptions qgpo{};
  OracleGridOptions oracle_grid{};

  std::string prior_checkpoint;
  std::string guidance_checkpoint;

  NetworkSpec network_spec() const;

  static RunConfig from_file(const std::filesystem::path& path,
                             std::optional<std::uint64_t> seed_override = {});
  static RunConfig from_text(const std::string& text,
                             std::optional<std::uint64_t> seed_override = {});
};

}  // namespace egdiff
