#include "egdiff/schedule.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace egdiff {

Schedule::Schedule(double beta0, double beta1, double t_max, double t_min)
    : beta0_(beta0), beta1_(beta1), t_max_(t_max), t_min_(t_min) {
  if (!(0.0 < beta0 && beta0 < beta1)) {
    throw std::invalid_argument("Schedule: requires 0 < beta0 < beta1");
  }
  if (!(t_max > 0.0)) {
    throw std::invalid_argument("Schedule: requires t_max > 0");
  }
  if (!(0.0 < t_min && t_min < t_max)) {
    throw std::invalid_argument("Schedule: requires 0 < t_min < t_max");
  }
}

void Schedule::check_time(double t, double lower) const {
  if (!(t >= lower && t <= t_max_)) {
    throw std::domain_error("Schedule: time " + std::to_string(t) +
                            " outside [" + std::to_string(lower) + ", " +
                            std::to_string(t_max_) + "]");
  }
}

double Schedule::log_alpha(double t) const {
  return -(beta1_ - beta0_) / 4.0 * t * t - beta0_ / 2.0 * t;
}

std::pair<double, double> Schedule::alpha_sigma(double t) const {
  check_time(t, 0.0);
  const double alpha = std::exp(log_alpha(t));
  // sqrt(1 - a^2) via expm1 keeps sigma accurate near t = 0.
  const double sigma = std::sqrt(-std::expm1(2.0 * log_alpha(t)));
  return {alpha, sigma};
}

std::pair<double, double> Schedule::drift_diffusion(double t) const {
  check_time(t, 0.0);
  const double f = -(beta0_ + (beta1_ - beta0_) * t) / 2.0;
  const double g2 = beta0_ + (beta1_ - beta0_) * t;
  return {f, g2};
}

double Schedule::log_snr(double t) const {
  if (t <= 0.0) {
    throw std::domain_error("Schedule::log_snr: undefined at t <= 0");
  }
  check_time(t, 0.0);
  const auto [alpha, sigma] = alpha_sigma(t);
  return std::log(alpha / sigma);
}

double Schedule::inverse_log_snr(double lambda) const {
  double lo = t_min_;
  double hi = t_max_;
  const double lam_lo = log_snr(hi);  // log_snr decreasing: smallest at t_max
  const double lam_hi = log_snr(lo);
  constexpr double kSlack = 1e-9;
  if (lambda < lam_lo - kSlack || lambda > lam_hi + kSlack) {
    throw std::domain_error("Schedule::inverse_log_snr: lambda outside range");
  }
  if (lambda >= lam_hi) return lo;
  if (lambda <= lam_lo) return hi;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double val = log_snr(mid);
    if (std::abs(val - lambda) < 1e-12) return mid;
    if (val > lambda) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-15) break;
  }
  return 0.5 * (lo + hi);
}

Eigen::VectorXd Schedule::perturb(const Eigen::VectorXd& x0, double t,
                                  const Eigen::VectorXd& noise) const {
  if (x0.size() != noise.size()) {
    throw std::invalid_argument("Schedule::perturb: x0/noise size mismatch");
  }
  const auto [alpha, sigma] = alpha_sigma(t);
  return alpha * x0 + sigma * noise;
}

Eigen::MatrixXd Schedule::perturb(const Eigen::MatrixXd& x0, double t,
                                  const Eigen::MatrixXd& noise) const {
  if (x0.rows() != noise.rows() || x0.cols() != noise.cols()) {
    throw std::invalid_argument("Schedule::perturb: x0/noise shape mismatch");
  }
  const auto [alpha, sigma] = alpha_sigma(t);
  return alpha * x0 + sigma * noise;
}

Eigen::MatrixXd Schedule::perturb(const Eigen::MatrixXd& x0,
                                  const Eigen::VectorXd& t,
                                  const Eigen::MatrixXd& noise) const {
  if (x0.rows() != noise.rows() || x0.cols() != noise.cols() ||
      t.size() != x0.rows()) {
    throw std::invalid_argument("Schedule::perturb: shape mismatch");
  }
  Eigen::MatrixXd out(x0.rows(), x0.cols());
  for (Eigen::Index i = 0; i < x0.rows(); ++i) {
    const auto [alpha, sigma] = alpha_sigma(t[i]);
    out.row(i) = alpha * x0.row(i) + sigma * noise.row(i);
  }
  return out;
}

}  // namespace egdiff
