#pragma once

#include <Eigen/Dense>
#include <utility>

namespace egdiff {

/// Variance-preserving forward diffusion process with a linear noise rate.
///
/// The perturbation kernel is x_t = alpha(t) * x_0 + sigma(t) * eps with
///   log alpha(t) = -(beta1 - beta0)/4 * t^2 - beta0/2 * t
///   sigma(t)     = sqrt(1 - alpha(t)^2)
/// so alpha(t)^2 + sigma(t)^2 == 1 for all t.
///
/// Times used for training and sampling are clipped to [t_min, t_max];
/// t_min avoids the log-SNR singularity at t = 0.
class Schedule {
 public:
  explicit Schedule(double beta0 = 0.1, double beta1 = 20.0, double t_max = 1.0,
                    double t_min = 1e-3);

  double beta0() const { return beta0_; }
  double beta1() const { return beta1_; }
  double t_max() const { return t_max_; }
  double t_min() const { return t_min_; }

  double log_alpha(double t) const;

  /// (alpha(t), sigma(t)). Requires 0 <= t <= t_max.
  std::pair<double, double> alpha_sigma(double t) const;

  /// ODE coefficients (f(t), g^2(t)) with f = d log alpha / dt and
  /// g^2 = d sigma^2 / dt - 2 f sigma^2. Requires 0 <= t <= t_max.
  std::pair<double, double> drift_diffusion(double t) const;

  /// log(alpha(t) / sigma(t)); strictly decreasing. Requires 0 < t <= t_max.
  double log_snr(double t) const;

  /// Monotone inverse of log_snr on [t_min, t_max], found by bisection to
  /// |log_snr(t) - lambda| < 1e-10.
  double inverse_log_snr(double lambda) const;

  /// x_t = alpha(t) x0 + sigma(t) noise, elementwise.
  Eigen::VectorXd perturb(const Eigen::VectorXd& x0, double t,
                          const Eigen::VectorXd& noise) const;

  /// Batched perturbation with a shared time; rows are samples.
  Eigen::MatrixXd perturb(const Eigen::MatrixXd& x0, double t,
                          const Eigen::MatrixXd& noise) const;

  /// Batched perturbation with one time per row.
  Eigen::MatrixXd perturb(const Eigen::MatrixXd& x0, const Eigen::VectorXd& t,
                          const Eigen::MatrixXd& noise) const;

 private:
  void check_time(double t, double lower) const;

  double beta0_;
  double beta1_;
  double t_max_;
  double t_min_;
};

}  // namespace egdiff
