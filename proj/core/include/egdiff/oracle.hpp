#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "egdiff/energy.hpp"
#include "egdiff/schedule.hpp"

namespace egdiff {

/// A dataset viewed as a uniform mixture of point masses. With this prior the
/// intermediate energy, its gradient, and exact target samples are all
/// computable in closed form in O(N) per query, which makes the empirical
/// oracle the reference every learned component is checked against.
struct EmpiricalPrior {
  Eigen::MatrixXd atoms;  // N x d
};

class EmpiricalOracle {
 public:
  EmpiricalOracle(EmpiricalPrior prior, EnergySpec energy, Schedule schedule);

  /// Exact intermediate energy
  ///   E_t(x) = -log sum_i w_i(x) exp(-beta E(atom_i)),
  /// where w_i are the posterior atom weights under the perturbation kernel.
  /// Evaluated with log-sum-exp stabilization. t = 0 is answered by the
  /// nearest-atom limit of the collapsed posterior.
  double posterior_energy(const Eigen::VectorXd& x_t, double t) const;

  /// Analytic gradient of posterior_energy w.r.t. x_t. Requires t > 0.
  Eigen::VectorXd posterior_guidance(const Eigen::VectorXd& x_t, double t) const;

  /// Posterior mean of the scaled energy, sum_i w_i(x) * beta E(atom_i):
  /// the fixed point of squared-error energy regression.
  double posterior_energy_mse(const Eigen::VectorXd& x_t, double t) const;

  /// Posterior atom weights w_i(x); sums to 1.
  Eigen::VectorXd posterior_weights(const Eigen::VectorXd& x_t, double t) const;

  Eigen::MatrixXd resample_ground_truth(int n, std::uint64_t seed) const;

  const Eigen::MatrixXd& atoms() const { return prior_.atoms; }
  const Eigen::VectorXd& atom_energies() const { return atom_energies_; }
  double beta() const { return energy_.beta; }

 private:
  /// Log posterior kernel scores s_i = -||x - alpha atom_i||^2 / (2 sigma^2).
  Eigen::VectorXd kernel_scores(const Eigen::VectorXd& x_t, double alpha,
                                double sigma) const;
  Eigen::Index nearest_atom(const Eigen::VectorXd& x_t, double alpha) const;

  EmpiricalPrior prior_;
  EnergySpec energy_;
  Schedule schedule_;
  Eigen::VectorXd atom_energies_;  // E(atom_i), cached
  Eigen::VectorXd atom_sqnorms_;
};

/// Exact guidance for the Gaussian-linear setting (standard normal prior,
/// E(x) = c . x, beta = 1): grad E_t(x) = alpha_t * c, constant in x.
Eigen::VectorXd gaussian_linear_guidance(const Eigen::VectorXd& c, double t,
                                         const Schedule& schedule);

/// Self-normalized importance resampling of the dataset with weights
/// proportional to exp(-beta E(atom_i)); returns exact samples of the target
/// under the empirical-prior view.
Eigen::MatrixXd resample_ground_truth(const Eigen::MatrixXd& data,
                                      const EnergySpec& energy, int n,
                                      std::uint64_t seed);

}  // namespace egdiff
