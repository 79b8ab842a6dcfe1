#include "egdiff/oracle.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

namespace egdiff {

namespace {

double log_sum_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

}  // namespace

EmpiricalOracle::EmpiricalOracle(EmpiricalPrior prior, EnergySpec energy,
                                 Schedule schedule)
    : prior_(std::move(prior)),
      energy_(std::move(energy)),
      schedule_(schedule) {
  energy_.validate();
  if (prior_.atoms.rows() < 1) {
    throw std::invalid_argument("EmpiricalOracle: needs at least one atom");
  }
  if (!prior_.atoms.allFinite()) {
    throw std::invalid_argument("EmpiricalOracle: atoms must be finite");
  }
  atom_energies_.resize(prior_.atoms.rows());
  for (Eigen::Index i = 0; i < prior_.atoms.rows(); ++i) {
    atom_energies_[i] = energy_.value(prior_.atoms.row(i));
  }
  if (!atom_energies_.allFinite()) {
    throw std::invalid_argument("EmpiricalOracle: energy not finite on atoms");
  }
  atom_sqnorms_ = prior_.atoms.rowwise().squaredNorm();
}

Eigen::VectorXd EmpiricalOracle::kernel_scores(const Eigen::VectorXd& x_t,
                                               double alpha, double sigma) const {
  // s_i = -||x - alpha atom_i||^2 / (2 sigma^2), expanded so the atom term is
  // a single matrix-vector product.
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  Eigen::VectorXd s = 2.0 * alpha * (prior_.atoms * x_t);
  s.array() -= alpha * alpha * atom_sqnorms_.array() + x_t.squaredNorm();
  return inv2s2 * s;
}

Eigen::Index EmpiricalOracle::nearest_atom(const Eigen::VectorXd& x_t,
                                           double alpha) const {
  Eigen::VectorXd d = alpha * alpha * atom_sqnorms_ -
                      2.0 * alpha * (prior_.atoms * x_t);
  Eigen::Index best = 0;
  d.minCoeff(&best);
  return best;
}

Eigen::VectorXd EmpiricalOracle::posterior_weights(const Eigen::VectorXd& x_t,
                                                   double t) const {
  const auto [alpha, sigma] = schedule_.alpha_sigma(t);
  if (sigma <= 0.0) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(prior_.atoms.rows());
    w[nearest_atom(x_t, alpha)] = 1.0;
    return w;
  }
  Eigen::VectorXd s = kernel_scores(x_t, alpha, sigma);
  s.array() -= log_sum_exp(s);
  return s.array().exp();
}

double EmpiricalOracle::posterior_energy(const Eigen::VectorXd& x_t,
                                         double t) const {
  const double beta = energy_.beta;
  const auto [alpha, sigma] = schedule_.alpha_sigma(t);
  if (sigma <= 0.0) {
    return beta * atom_energies_[nearest_atom(x_t, alpha)];
  }
  const Eigen::VectorXd s = kernel_scores(x_t, alpha, sigma);
  const Eigen::VectorXd u = s - beta * atom_energies_;
  return -(log_sum_exp(u) - log_sum_exp(s));
}

Eigen::VectorXd EmpiricalOracle::posterior_guidance(const Eigen::VectorXd& x_t,
                                                    double t) const {
  if (!(t > 0.0)) {
    throw std::domain_error("posterior_guidance: requires t > 0");
  }
  const double beta = energy_.beta;
  const auto [alpha, sigma] = schedule_.alpha_sigma(t);
  const double inv_s2 = 1.0 / (sigma * sigma);

  Eigen::VectorXd s = kernel_scores(x_t, alpha, sigma);
  Eigen::VectorXd u = s - beta * atom_energies_;
  s.array() -= log_sum_exp(s);
  u.array() -= log_sum_exp(u);
  const Eigen::VectorXd ps = s.array().exp();  // posterior weights
  const Eigen::VectorXd pu = u.array().exp();  // energy-tilted weights

  // grad E_t = sum_i (pu_i - ps_i) * (x - alpha atom_i) / sigma^2; the x term
  // vanishes because both weight vectors sum to 1.
  const Eigen::VectorXd d = pu - ps;
  return inv_s2 * (d.sum() * x_t - alpha * (prior_.atoms.transpose() * d));
}

double EmpiricalOracle::posterior_energy_mse(const Eigen::VectorXd& x_t,
                                             double t) const {
  const Eigen::VectorXd w = posterior_weights(x_t, t);
  return energy_.beta * w.dot(atom_energies_);
}

Eigen::MatrixXd EmpiricalOracle::resample_ground_truth(int n,
                                                       std::uint64_t seed) const {
  return egdiff::resample_ground_truth(prior_.atoms, energy_, n, seed);
}

Eigen::VectorXd gaussian_linear_guidance(const Eigen::VectorXd& c, double t,
                                         const Schedule& schedule) {
  return schedule.alpha_sigma(t).first * c;
}

Eigen::MatrixXd resample_ground_truth(const Eigen::MatrixXd& data,
                                      const EnergySpec& energy, int n,
                                      std::uint64_t seed) {
  energy.validate();
  if (n < 0) throw std::invalid_argument("resample_ground_truth: n < 0");
  Eigen::VectorXd log_w(data.rows());
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    log_w[i] = -energy.beta * energy.value(data.row(i));
  }
  log_w.array() -= log_w.maxCoeff();
  std::vector<double> w(log_w.data(), log_w.data() + log_w.size());
  for (double& v : w) v = std::exp(v);

  std::mt19937_64 rng(seed);
  std::discrete_distribution<Eigen::Index> pick(w.begin(), w.end());
  Eigen::MatrixXd out(n, data.cols());
  for (int i = 0; i < n; ++i) {
    out.row(i) = data.row(pick(rng));
  }
  return out;
}

}  // namespace egdiff
