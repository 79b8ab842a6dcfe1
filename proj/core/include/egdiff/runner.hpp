#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "egdiff/config.hpp"

namespace egdiff {

/// One row of the compare2d table.
struct Compare2dRow {
  double beta = 0.0;
  std::string method;
  double mmd2 = 0.0;
  double hist_tv = 0.0;
  double mean_energy = 0.0;
  int n_samples = 0;
};

struct QgpoReport {
  double behavior_return = 0.0;  // guidance scale 0
  std::vector<std::pair<double, double>> returns_by_scale;  // (s, mean return)
  std::vector<double> std_errors;
  double best_scale = 0.0;
  double best_return = 0.0;
};

void run_train_prior(const RunConfig& cfg, const std::filesystem::path& out_dir);
void run_train_guidance(const RunConfig& cfg, const std::filesystem::path& out_dir);
void run_sample(const RunConfig& cfg, const std::filesystem::path& out_dir);
std::vector<Compare2dRow> run_compare2d(const RunConfig& cfg,
                                        const std::filesystem::path& out_dir);
QgpoReport run_qgpo(const RunConfig& cfg, const std::filesystem::path& out_dir);
void run_oracle_grid(const RunConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace egdiff
