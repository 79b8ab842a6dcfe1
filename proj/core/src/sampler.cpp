#include "egdiff/sampler.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace egdiff {

void SamplerConfig::validate() const {
  if (steps < 1) throw std::invalid_argument("SamplerConfig: steps >= 1");
  if (!(guidance_scale >= 0.0)) {
    throw std::invalid_argument("SamplerConfig: guidance scale >= 0");
  }
}

Eigen::MatrixXd guided_epsilon(const PriorModel& prior,
                               const GuidanceModel& guidance,
                               const Eigen::MatrixXd& x_t, double t,
                               double guidance_scale,
                               const Eigen::MatrixXd& condition) {
  Eigen::MatrixXd eps = prior.epsilon(x_t, t, condition);
  if (guidance.method == GuidanceMethod::kNone || guidance_scale == 0.0) {
    return eps;
  }
  const double sigma = prior.schedule.alpha_sigma(t).second;
  Eigen::MatrixXd grad;
  if (guidance.method == GuidanceMethod::kDps) {
    grad = dps_guidance_batch(prior, guidance.energy, x_t, t, condition);
  } else {
    // Conditioned guidance heads see the same condition as the prior.
    const Eigen::MatrixXd& gcond =
        guidance.net.spec.condition_dim > 0 ? condition : Eigen::MatrixXd();
    grad = guidance.guidance_grad(x_t, t, gcond);
  }
  eps += guidance_scale * sigma * grad;
  return eps;
}

Eigen::MatrixXd terminal_noise(int n_samples, int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd x(n_samples, dim);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = gauss(rng);
  }
  return x;
}

Eigen::MatrixXd euler_sample_from(const Schedule& schedule, const EpsilonFn& eps,
                                  int steps, Eigen::MatrixXd x) {
  if (steps < 1) throw std::invalid_argument("euler_sample: steps >= 1");
  const double t_start = schedule.t_max();
  const double t_end = schedule.t_min();
  const double dt = (t_end - t_start) / steps;  // negative
  double t = t_start;
  for (int k = 0; k < steps; ++k) {
    const auto [f, g2] = schedule.drift_diffusion(t);
    const double sigma = schedule.alpha_sigma(t).second;
    const Eigen::MatrixXd e = eps(x, t);
    x += dt * (f * x + g2 / (2.0 * sigma) * e);
    if (!x.allFinite()) {
      throw std::runtime_error("euler_sample: non-finite state");
    }
    t = t_start + (k + 1) * dt;
  }
  return x;
}

Eigen::MatrixXd solver2_sample_from(const Schedule& schedule,
                                    const EpsilonFn& eps, int steps,
                                    Eigen::MatrixXd x) {
  if (steps < 1) throw std::invalid_argument("solver2_sample: steps >= 1");
  const double lam_start = schedule.log_snr(schedule.t_max());
  const double lam_end = schedule.log_snr(schedule.t_min());
  double t_a = schedule.t_max();
  for (int k = 0; k < steps; ++k) {
    const double lam_a = lam_start + (lam_end - lam_start) * k / steps;
    const double lam_b = lam_start + (lam_end - lam_start) * (k + 1) / steps;
    const double t_b =
        k + 1 == steps ? schedule.t_min() : schedule.inverse_log_snr(lam_b);
    const double t_m = schedule.inverse_log_snr(0.5 * (lam_a + lam_b));
    const double h = lam_b - lam_a;

    const auto [alpha_a, sigma_a] = schedule.alpha_sigma(t_a);
    const auto [alpha_m, sigma_m] = schedule.alpha_sigma(t_m);
    const auto [alpha_b, sigma_b] = schedule.alpha_sigma(t_b);
    (void)sigma_a;

    const Eigen::MatrixXd u =
        (alpha_m / alpha_a) * x - sigma_m * std::expm1(h / 2.0) * eps(x, t_a);
    x = (alpha_b / alpha_a) * x - sigma_b * std::expm1(h) * eps(u, t_m);
    if (!x.allFinite()) {
      throw std::runtime_error("solver2_sample: non-finite state");
    }
    t_a = t_b;
  }
  return x;
}

Eigen::MatrixXd euler_sample_fn(const Schedule& schedule, const EpsilonFn& eps,
                                int steps, int n_samples, int dim,
                                std::uint64_t seed) {
  return euler_sample_from(schedule, eps, steps,
                           terminal_noise(n_samples, dim, seed));
}

Eigen::MatrixXd solver2_sample_fn(const Schedule& schedule, const EpsilonFn& eps,
                                  int steps, int n_samples, int dim,
                                  std::uint64_t seed) {
  return solver2_sample_from(schedule, eps, steps,
                             terminal_noise(n_samples, dim, seed));
}

namespace {

EpsilonFn bind_models(const PriorModel& prior, const GuidanceModel& guidance,
                      double scale, const Eigen::MatrixXd& condition) {
  return [&prior, &guidance, scale, condition](const Eigen::MatrixXd& x,
                                               double t) {
    return guided_epsilon(prior, guidance, x, t, scale, condition);
  };
}

}  // namespace

Eigen::MatrixXd euler_sample(const PriorModel& prior,
                             const GuidanceModel& guidance,
                             const SamplerConfig& config, int n_samples,
                             const Eigen::MatrixXd& condition) {
  config.validate();
  return euler_sample_fn(
      prior.schedule,
      bind_models(prior, guidance, config.guidance_scale, condition),
      config.steps, n_samples, prior.data_dim, config.seed);
}

Eigen::MatrixXd solver2_sample(const PriorModel& prior,
                               const GuidanceModel& guidance,
                               const SamplerConfig& config, int n_samples,
                               const Eigen::MatrixXd& condition) {
  config.validate();
  return solver2_sample_fn(
      prior.schedule,
      bind_models(prior, guidance, config.guidance_scale, condition),
      config.steps, n_samples, prior.data_dim, config.seed);
}

Eigen::MatrixXd sample(const PriorModel& prior, const GuidanceModel& guidance,
                       const SamplerConfig& config, int n_samples,
                       const Eigen::MatrixXd& condition) {
  return config.method == SamplerMethod::kEuler
             ? euler_sample(prior, guidance, config, n_samples, condition)
             : solver2_sample(prior, guidance, config, n_samples, condition);
}

}  // namespace egdiff
