#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "egdiff/energy.hpp"

namespace egdiff {

/// A 2-D point set with optional per-point energies and class labels.
struct Dataset2D {
  Eigen::MatrixXd points;     // N x 2
  Eigen::VectorXd energies;   // size 0 when absent
  std::vector<int> labels;    // empty when absent

  int size() const { return static_cast<int>(points.rows()); }
  bool has_energies() const { return energies.size() == points.rows() && size() > 0; }
  bool has_labels() const { return static_cast<int>(labels.size()) == size() && size() > 0; }
};

struct MetricReport {
  double mmd2 = 0.0;
  double hist_tv = 0.0;
  double mean_energy = 0.0;
  int n_samples = 0;
};

/// Standard toy generators scaled to roughly [-4, 4]^2. Names:
/// 8gaussians, swissroll, 2spirals, moons, rings, gaussian_linear.
/// Component-structured sets (8gaussians, 2spirals, moons, rings) carry
/// integer labels.
Dataset2D make_dataset(std::string_view name, int n, std::uint64_t seed);

/// Number of label classes a named dataset produces (0 if unlabeled).
int dataset_class_count(std::string_view name);

/// Cluster centers of the 8gaussians generator, one row per component.
Eigen::MatrixXd eight_gaussian_centers();

/// Built-in smooth energies with closed-form gradients. Names and forms:
///   linear:          E(x) = x1
///   quadratic_bowl:  E(x) = 0.5 * ||x - (2, 2)||^2
///   half_plane_soft: E(x) = log(1 + exp(2 * x1))
///   ring_distance:   E(x) = (||x|| - 2.5)^2
EnergySpec builtin_energy(std::string_view name, double beta = 1.0);

/// Linear energy E(x) = c . x with an explicit direction.
EnergySpec linear_energy(const Eigen::Vector2d& c, double beta = 1.0);

/// Fills ds.energies from the spec's data-space energy (unscaled by beta).
void attach_energy(Dataset2D& ds, const EnergySpec& energy);

/// Median pairwise distance of the pooled sample (the bandwidth heuristic);
/// large pools are strided down to at most 2048 points.
double median_heuristic_bandwidth(const Eigen::MatrixXd& a,
                                  const Eigen::MatrixXd& b);

/// Biased V-statistic squared maximum mean discrepancy with the Gaussian
/// kernel exp(-||x-y||^2 / (2 bw^2)). bandwidth <= 0 selects the median
/// heuristic.
double mmd2(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
            double bandwidth = 0.0);

/// Total-variation distance between normalized 2-D histograms on a shared
/// grid covering both samples.
double hist_divergence(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                       int bins = 40);

/// Mean data-space energy over the sample; errors on an empty sample.
double mean_energy(const Eigen::MatrixXd& sample, const EnergySpec& energy);

}  // namespace egdiff
