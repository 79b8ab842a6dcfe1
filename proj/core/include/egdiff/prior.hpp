#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <vector>

#include "egdiff/net.hpp"
#include "egdiff/schedule.hpp"

namespace egdiff {

/// Loss curve and numerical counters recorded by the training loops.
struct TrainingLog {
  std::vector<double> loss_curve;
  long exp_clamps = 0;
};

/// Noise-prediction diffusion model; the network maps a perturbed point (and
/// optional condition) at time t to the predicted injected noise.
struct PriorModel {
  Network net;
  Schedule schedule;
  int data_dim = 0;
  int condition_dim = 0;

  /// Batched noise prediction at a shared time.
  Eigen::MatrixXd epsilon(const Eigen::MatrixXd& x_t, double t,
                          const Eigen::MatrixXd& c = {}) const;
  /// Batched noise prediction with one time per row.
  Eigen::MatrixXd epsilon(const Eigen::MatrixXd& x_t, const Eigen::VectorXd& t,
                          const Eigen::MatrixXd& c = {}) const;
};

struct PriorTrainOptions {
  int steps = 20000;
  int batch_size = 512;
  double learning_rate = 1e-4;
  double final_lr_fraction = 1.0;  // < 1 decays the rate linearly over training
};

/// Monte Carlo denoising loss over a batch: per sample, t ~ U(t_min, t_max)
/// and eps ~ N(0, I); loss = mean ||eps_hat(alpha x0 + sigma eps, t) - eps||^2.
double denoising_loss(const PriorModel& model, const Eigen::MatrixXd& x0,
                      const Eigen::MatrixXd& conditions, std::mt19937_64& rng);

/// Trains a noise-prediction model on the data (optionally conditioned on a
/// row-aligned condition matrix). Deterministic given the seed; throws
/// TrainingDivergence on a non-finite loss.
PriorModel train_prior(const Eigen::MatrixXd& x0,
                       const Eigen::MatrixXd& conditions,
                       const NetworkSpec& spec, const Schedule& schedule,
                       const PriorTrainOptions& opts, std::uint64_t seed,
                       TrainingLog* log = nullptr);

struct TrainingDivergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace egdiff
