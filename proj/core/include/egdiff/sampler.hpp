#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>

#include "egdiff/guidance.hpp"
#include "egdiff/prior.hpp"
#include "egdiff/schedule.hpp"

namespace egdiff {

enum class SamplerMethod { kEuler, kSolver2 };

struct SamplerConfig {
  int steps = 25;
  SamplerMethod method = SamplerMethod::kSolver2;
  double guidance_scale = 1.0;  // s >= 0
  std::uint64_t seed = 0;

  void validate() const;
};

/// Guided noise prediction eps~ = eps(x, t) + s * sigma_t * grad_x f(x, t).
/// kDps routes the gradient through dps_guidance_batch; kNone leaves eps
/// untouched.
Eigen::MatrixXd guided_epsilon(const PriorModel& prior,
                               const GuidanceModel& guidance,
                               const Eigen::MatrixXd& x_t, double t,
                               double guidance_scale,
                               const Eigen::MatrixXd& condition = {});

/// Guided noise prediction as a plain function of (batch, time); the
/// function-level entry points below let tests drive the solvers with exact
/// scores.
using EpsilonFn =
    std::function<Eigen::MatrixXd(const Eigen::MatrixXd& x, double t)>;

/// Integrates the probability-flow ODE
///   dx/dt = f(t) x + g^2(t) / (2 sigma_t) * eps~(x, t)
/// from t_max to t_min on a grid uniform in t, starting from N(0, I).
Eigen::MatrixXd euler_sample_fn(const Schedule& schedule, const EpsilonFn& eps,
                                int steps, int n_samples, int dim,
                                std::uint64_t seed);

/// Second-order midpoint exponential integrator on a grid uniform in log-SNR.
/// One step from t_a to t_b with h = lambda_b - lambda_a and midpoint
/// t_m = inverse_log_snr((lambda_a + lambda_b) / 2):
///   u  = (alpha_m / alpha_a) x - sigma_m (e^{h/2} - 1) eps~(x, t_a)
///   x' = (alpha_b / alpha_a) x - sigma_b (e^{h} - 1) eps~(u, t_m)
Eigen::MatrixXd solver2_sample_fn(const Schedule& schedule, const EpsilonFn& eps,
                                  int steps, int n_samples, int dim,
                                  std::uint64_t seed);

/// Model-level sampling; the guidance is applied at every solver sub-step.
/// condition may be empty, one broadcast row, or one row per sample.
Eigen::MatrixXd sample(const PriorModel& prior, const GuidanceModel& guidance,
                       const SamplerConfig& config, int n_samples,
                       const Eigen::MatrixXd& condition = {});

Eigen::MatrixXd euler_sample(const PriorModel& prior,
                             const GuidanceModel& guidance,
                             const SamplerConfig& config, int n_samples,
                             const Eigen::MatrixXd& condition = {});

Eigen::MatrixXd solver2_sample(const PriorModel& prior,
                               const GuidanceModel& guidance,
                               const SamplerConfig& config, int n_samples,
                               const Eigen::MatrixXd& condition = {});

/// Deterministic standard-normal draw used for the terminal state; exposed so
/// different solvers can start from identical noise.
Eigen::MatrixXd terminal_noise(int n_samples, int dim, std::uint64_t seed);

/// Same solvers started from a caller-provided terminal state.
Eigen::MatrixXd euler_sample_from(const Schedule& schedule, const EpsilonFn& eps,
                                  int steps, Eigen::MatrixXd x);
Eigen::MatrixXd solver2_sample_from(const Schedule& schedule,
                                    const EpsilonFn& eps, int steps,
                                    Eigen::MatrixXd x);

}  // namespace egdiff
