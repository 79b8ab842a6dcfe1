#pragma once

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>

namespace egdiff {

/// A data-space energy E(x0) with inverse temperature beta >= 0; the target
/// distribution tilts the data density by exp(-beta * E). The gradient is
/// optional; when absent it falls back to central finite differences.
struct EnergySpec {
  std::function<double(const Eigen::VectorXd&)> energy;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
  double beta = 1.0;

  double value(const Eigen::VectorXd& x) const { return energy(x); }

  Eigen::VectorXd grad(const Eigen::VectorXd& x) const {
    if (gradient) return gradient(x);
    constexpr double h = 1e-6;
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd p = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      p[i] = x[i] + h;
      const double up = energy(p);
      p[i] = x[i] - h;
      const double dn = energy(p);
      p[i] = x[i];
      g[i] = (up - dn) / (2.0 * h);
    }
    return g;
  }

  void validate() const {
    if (!energy) throw std::invalid_argument("EnergySpec: missing energy function");
    if (!(beta >= 0.0)) throw std::invalid_argument("EnergySpec: beta must be >= 0");
  }
};

}  // namespace egdiff
