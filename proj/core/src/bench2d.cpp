#include "egdiff/bench2d.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace egdiff {

namespace {

constexpr double kPi = std::numbers::pi;

Eigen::Vector2d gaussian2(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  const double a = n(rng);
  const double b = n(rng);
  return {a, b};
}

Dataset2D make_8gaussians(int n, std::mt19937_64& rng) {
  const Eigen::MatrixXd centers = eight_gaussian_centers();
  std::uniform_int_distribution<int> comp(0, 7);
  Dataset2D ds;
  ds.points.resize(n, 2);
  ds.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    const int k = comp(rng);
    ds.points.row(i) = centers.row(k) + 0.3 * gaussian2(rng).transpose();
    ds.labels[i] = k;
  }
  return ds;
}

Dataset2D make_swissroll(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.05);
  Dataset2D ds;
  ds.points.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    const double phi = 1.5 * kPi * (1.0 + 2.0 * u(rng));
    const double r = phi / (4.5 * kPi) * 4.0;
    ds.points(i, 0) = r * std::cos(phi) + noise(rng);
    ds.points(i, 1) = r * std::sin(phi) + noise(rng);
  }
  return ds;
}

Dataset2D make_2spirals(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.1);
  std::bernoulli_distribution arm(0.5);
  Dataset2D ds;
  ds.points.resize(n, 2);
  ds.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    const double phi = 3.0 * kPi * std::sqrt(u(rng));
    const double r = phi / (3.0 * kPi) * 3.6;
    const int k = arm(rng) ? 1 : 0;
    const double sign = k == 0 ? 1.0 : -1.0;
    ds.points(i, 0) = sign * r * std::cos(phi) + noise(rng);
    ds.points(i, 1) = sign * r * std::sin(phi) + noise(rng);
    ds.labels[i] = k;
  }
  return ds;
}

Dataset2D make_moons(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ang(0.0, kPi);
  std::normal_distribution<double> noise(0.0, 0.1);
  std::bernoulli_distribution which(0.5);
  Dataset2D ds;
  ds.points.resize(n, 2);
  ds.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    const double a = ang(rng);
    const int k = which(rng) ? 1 : 0;
    Eigen::Vector2d p;
    if (k == 0) {
      p = {std::cos(a), std::sin(a)};
    } else {
      p = {1.0 - std::cos(a), 0.5 - std::sin(a)};
    }
    // center the pair of arcs and widen to roughly [-4, 4]
    p -= Eigen::Vector2d(0.5, 0.25);
    p *= 2.5;
    p += Eigen::Vector2d(noise(rng), noise(rng));
    ds.points.row(i) = p.transpose();
    ds.labels[i] = k;
  }
  return ds;
}

Dataset2D make_rings(int n, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> ring(0, 3);
  std::uniform_real_distribution<double> ang(0.0, 2.0 * kPi);
  std::normal_distribution<double> noise(0.0, 0.08);
  Dataset2D ds;
  ds.points.resize(n, 2);
  ds.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    const int k = ring(rng);
    const double r = 1.0 + k;
    const double a = ang(rng);
    ds.points(i, 0) = r * std::cos(a) + noise(rng);
    ds.points(i, 1) = r * std::sin(a) + noise(rng);
    ds.labels[i] = k;
  }
  return ds;
}

Dataset2D make_gaussian(int n, std::mt19937_64& rng) {
  Dataset2D ds;
  ds.points.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    ds.points.row(i) = gaussian2(rng).transpose();
  }
  return ds;
}

}  // namespace

Eigen::MatrixXd eight_gaussian_centers() {
  Eigen::MatrixXd centers(8, 2);
  for (int k = 0; k < 8; ++k) {
    const double a = 2.0 * kPi * k / 8.0;
    centers(k, 0) = 3.0 * std::cos(a);
    centers(k, 1) = 3.0 * std::sin(a);
  }
  return centers;
}

Dataset2D make_dataset(std::string_view name, int n, std::uint64_t seed) {
  if (n < 0) throw std::invalid_argument("make_dataset: n < 0");
  std::mt19937_64 rng(seed);
  if (n == 0) {
    Dataset2D ds;
    ds.points.resize(0, 2);
    return ds;
  }
  if (name == "8gaussians") return make_8gaussians(n, rng);
  if (name == "swissroll") return make_swissroll(n, rng);
  if (name == "2spirals") return make_2spirals(n, rng);
  if (name == "moons") return make_moons(n, rng);
  if (name == "rings") return make_rings(n, rng);
  if (name == "gaussian_linear") return make_gaussian(n, rng);
  throw std::invalid_argument("make_dataset: unknown dataset '" +
                              std::string(name) + "'");
}

int dataset_class_count(std::string_view name) {
  if (name == "8gaussians") return 8;
  if (name == "2spirals" || name == "moons") return 2;
  if (name == "rings") return 4;
  if (name == "swissroll" || name == "gaussian_linear") return 0;
  throw std::invalid_argument("dataset_class_count: unknown dataset '" +
                              std::string(name) + "'");
}

EnergySpec linear_energy(const Eigen::Vector2d& c, double beta) {
  EnergySpec spec;
  spec.energy = [c](const Eigen::VectorXd& x) { return c.dot(x.head<2>()); };
  spec.gradient = [c](const Eigen::VectorXd& x) {
    (void)x;
    return Eigen::VectorXd(c);
  };
  spec.beta = beta;
  return spec;
}

EnergySpec builtin_energy(std::string_view name, double beta) {
  EnergySpec spec;
  spec.beta = beta;
  if (name == "linear") {
    return linear_energy(Eigen::Vector2d(1.0, 0.0), beta);
  }
  if (name == "quadratic_bowl") {
    const Eigen::Vector2d center(2.0, 2.0);
    spec.energy = [center](const Eigen::VectorXd& x) {
      return 0.5 * (x.head<2>() - center).squaredNorm();
    };
    spec.gradient = [center](const Eigen::VectorXd& x) {
      return Eigen::VectorXd(x.head<2>() - center);
    };
    return spec;
  }
  if (name == "half_plane_soft") {
    constexpr double k = 2.0;
    spec.energy = [](const Eigen::VectorXd& x) {
      const double z = k * x[0];
      // softplus without overflow
      return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    };
    spec.gradient = [](const Eigen::VectorXd& x) {
      Eigen::VectorXd g = Eigen::VectorXd::Zero(2);
      g[0] = k / (1.0 + std::exp(-k * x[0]));
      return g;
    };
    return spec;
  }
  if (name == "ring_distance") {
    constexpr double r0 = 2.5;
    spec.energy = [](const Eigen::VectorXd& x) {
      const double r = x.head<2>().norm();
      return (r - r0) * (r - r0);
    };
    spec.gradient = [](const Eigen::VectorXd& x) {
      const double r = x.head<2>().norm();
      if (r < 1e-12) return Eigen::VectorXd(Eigen::Vector2d::Zero());
      return Eigen::VectorXd(2.0 * (r - r0) / r * x.head<2>());
    };
    return spec;
  }
  throw std::invalid_argument("builtin_energy: unknown energy '" +
                              std::string(name) + "'");
}

void attach_energy(Dataset2D& ds, const EnergySpec& energy) {
  energy.validate();
  ds.energies.resize(ds.points.rows());
  for (Eigen::Index i = 0; i < ds.points.rows(); ++i) {
    ds.energies[i] = energy.value(ds.points.row(i));
  }
}

double median_heuristic_bandwidth(const Eigen::MatrixXd& a,
                                  const Eigen::MatrixXd& b) {
  const Eigen::Index total = a.rows() + b.rows();
  if (total < 2) {
    throw std::invalid_argument("median_heuristic_bandwidth: too few points");
  }
  constexpr Eigen::Index kCap = 2048;
  const Eigen::Index stride = total > kCap ? (total + kCap - 1) / kCap : 1;
  std::vector<Eigen::RowVectorXd> pool;
  for (Eigen::Index i = 0; i < a.rows(); i += stride) pool.push_back(a.row(i));
  for (Eigen::Index i = 0; i < b.rows(); i += stride) pool.push_back(b.row(i));

  std::vector<double> dists;
  dists.reserve(pool.size() * (pool.size() - 1) / 2);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    for (std::size_t j = i + 1; j < pool.size(); ++j) {
      dists.push_back((pool[i] - pool[j]).norm());
    }
  }
  auto mid = dists.begin() + dists.size() / 2;
  std::nth_element(dists.begin(), mid, dists.end());
  const double med = *mid;
  return med > 0.0 ? med : 1.0;
}

namespace {

double kernel_mean(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                   double inv2bw2) {
  // mean_{ij} exp(-||x_i - y_j||^2 / (2 bw^2)) via the expanded Gram matrix
  const Eigen::VectorXd xn = x.rowwise().squaredNorm();
  const Eigen::VectorXd yn = y.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = -2.0 * (x * y.transpose());
  d2.colwise() += xn;
  d2.rowwise() += yn.transpose();
  return (-inv2bw2 * d2.array()).exp().mean();
}

}  // namespace

double mmd2(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
            double bandwidth) {
  if (a.rows() == 0 || b.rows() == 0) {
    throw std::invalid_argument("mmd2: empty sample");
  }
  const double bw = bandwidth > 0.0 ? bandwidth : median_heuristic_bandwidth(a, b);
  const double inv2bw2 = 1.0 / (2.0 * bw * bw);
  return kernel_mean(a, a, inv2bw2) + kernel_mean(b, b, inv2bw2) -
         2.0 * kernel_mean(a, b, inv2bw2);
}

double hist_divergence(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                       int bins) {
  if (a.rows() == 0 || b.rows() == 0) {
    throw std::invalid_argument("hist_divergence: empty sample");
  }
  if (bins < 1) throw std::invalid_argument("hist_divergence: bins < 1");
  Eigen::Vector2d lo = a.colwise().minCoeff().cwiseMin(b.colwise().minCoeff());
  Eigen::Vector2d hi = a.colwise().maxCoeff().cwiseMax(b.colwise().maxCoeff());
  // widen degenerate axes so every point falls in a bin
  for (int k = 0; k < 2; ++k) {
    if (hi[k] - lo[k] < 1e-12) {
      lo[k] -= 0.5;
      hi[k] += 0.5;
    }
  }
  const auto fill = [&](const Eigen::MatrixXd& pts) {
    Eigen::VectorXd h = Eigen::VectorXd::Zero(bins * bins);
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
      int bx = static_cast<int>((pts(i, 0) - lo[0]) / (hi[0] - lo[0]) * bins);
      int by = static_cast<int>((pts(i, 1) - lo[1]) / (hi[1] - lo[1]) * bins);
      bx = std::clamp(bx, 0, bins - 1);
      by = std::clamp(by, 0, bins - 1);
      h[bx * bins + by] += 1.0;
    }
    return Eigen::VectorXd(h / h.sum());
  };
  return 0.5 * (fill(a) - fill(b)).cwiseAbs().sum();
}

double mean_energy(const Eigen::MatrixXd& sample, const EnergySpec& energy) {
  if (sample.rows() == 0) {
    throw std::invalid_argument("mean_energy: empty sample");
  }
  double acc = 0.0;
  for (Eigen::Index i = 0; i < sample.rows(); ++i) {
    acc += energy.value(sample.row(i));
  }
  return acc / static_cast<double>(sample.rows());
}

}  // namespace egdiff
