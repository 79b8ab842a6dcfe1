// Acceptance suite: one self-contained check per criterion, each printing a
// single [PASS]/[FAIL] line. Heavy artifacts (the benchmark corpus, the
// trained prior, trained guidance models) are built once and shared.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <vector>

#include "egdiff/bench2d.hpp"
#include "egdiff/guidance.hpp"
#include "egdiff/net.hpp"
#include "egdiff/oracle.hpp"
#include "egdiff/prior.hpp"
#include "egdiff/qgpo.hpp"
#include "egdiff/sampler.hpp"
#include "egdiff/schedule.hpp"

using namespace egdiff;

namespace {

const Schedule kSched;

Eigen::MatrixXd randn(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = gauss(rng);
  }
  return m;
}

double angle_between(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double denom = a.norm() * b.norm();
  if (denom < 1e-12) return 0.0;
  return std::acos(std::clamp(a.dot(b) / denom, -1.0, 1.0));
}

// ---------------------------------------------------------------------------
// shared heavyweight artifacts

struct Shared {
  Dataset2D eight;  // the benchmark corpus, 1e5 points
  std::optional<PriorModel> prior8;
  std::map<std::string, GuidanceModel> guidance;

  Shared() { eight = make_dataset("8gaussians", 100000, 101); }

  NetworkSpec desk_net() const {
    NetworkSpec spec;
    spec.hidden = {128, 128, 128};
    spec.time_embedding = TimeEmbedding::kSinusoidal;
    spec.time_embedding_dim = 16;
    return spec;
  }

  const PriorModel& prior() {
    if (!prior8) {
      std::cerr << "  [shared] training the 8gaussians prior...\n";
      PriorTrainOptions opts;
      opts.steps = 20000;
      opts.batch_size = 512;
      opts.learning_rate = 1e-3;
      opts.final_lr_fraction = 0.05;
      prior8 = train_prior(eight.points, {}, desk_net(), kSched, opts, 337);
    }
    return *prior8;
  }

  const GuidanceModel& energy_guidance(GuidanceMethod method, double beta) {
    std::ostringstream key;
    key << to_string(method) << "/" << beta;
    auto it = guidance.find(key.str());
    if (it != guidance.end()) return it->second;

    const EnergySpec energy = builtin_energy("linear", beta);
    if (method == GuidanceMethod::kDps) {
      GuidanceModel model;
      model.method = GuidanceMethod::kDps;
      model.beta = beta;
      model.schedule = kSched;
      model.energy = energy;
      return guidance.emplace(key.str(), std::move(model)).first->second;
    }
    std::cerr << "  [shared] training " << key.str() << " guidance...\n";
    GuidanceTrainOptions opts;
    opts.steps = 12000;
    opts.group_size = 64;
    opts.groups_per_step = 8;
    opts.learning_rate = 1e-3;
    opts.final_lr_fraction = 0.05;
    GuidanceModel model = train_guidance(method, eight.points, energy,
                                         desk_net(), kSched, opts, 353);
    return guidance.emplace(key.str(), std::move(model)).first->second;
  }
};

Shared& shared() {
  static Shared ctx;
  return ctx;
}

// ---------------------------------------------------------------------------
// criterion 1: exact guidance matches finite differences of the exact energy

bool criterion1(std::ostream& out) {
  const std::vector<std::string> datasets{"8gaussians", "swissroll", "2spirals"};
  struct Probe {
    std::string name;
    EnergySpec spec;
  };
  std::vector<Probe> energies;
  energies.push_back({"linear", builtin_energy("linear", 1.0)});
  energies.push_back({"quadratic_bowl", builtin_energy("quadratic_bowl", 2.5)});
  energies.push_back({"half_plane_soft", builtin_energy("half_plane_soft", 0.7)});
  energies.push_back({"ring_distance", builtin_energy("ring_distance", 3.0)});
  energies.push_back({"linear_y", linear_energy({0.0, 1.0}, 1.5)});

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> tdist(0.01, 1.0);
  double worst = 0.0;
  for (const std::string& ds_name : datasets) {
    const Dataset2D ds = make_dataset(ds_name, 2000, 17);
    std::uniform_int_distribution<Eigen::Index> pick(0, ds.points.rows() - 1);
    for (const Probe& probe : energies) {
      const EmpiricalOracle oracle(EmpiricalPrior{ds.points}, probe.spec, kSched);
      for (int rep = 0; rep < 20; ++rep) {
        // random marginal points: a data point pushed through the kernel
        const double t = tdist(rng);
        const Eigen::VectorXd x0 = ds.points.row(pick(rng));
        const Eigen::VectorXd noise = randn(1, 2, rng).row(0);
        const Eigen::VectorXd x = kSched.perturb(x0, t, noise);
        const Eigen::VectorXd g = oracle.posterior_guidance(x, t);
        Eigen::VectorXd fd(2);
        Eigen::VectorXd p = x;
        const double h = 1e-5;  // balances truncation against roundoff here
        for (int i = 0; i < 2; ++i) {
          p[i] = x[i] + h;
          const double up = oracle.posterior_energy(p, t);
          p[i] = x[i] - h;
          const double dn = oracle.posterior_energy(p, t);
          p[i] = x[i];
          fd[i] = (up - dn) / (2 * h);
        }
        worst = std::max(worst, (g - fd).norm() / std::max(fd.norm(), 1e-10));
      }
    }
  }
  out << "max relative error " << worst << " over 300 probes";
  return worst < 1e-6;
}

// ---------------------------------------------------------------------------
// criterion 2: trained guidance matches the oracles

bool criterion2(std::ostream& out) {
  std::mt19937_64 rng(23);
  const Eigen::MatrixXd normal_data = randn(100000, 2, rng);
  const Eigen::Vector2d c(1.0, 0.0);
  const EnergySpec lin = linear_energy(c, 1.0);

  NetworkSpec spec;
  spec.hidden = {128, 128};
  spec.time_embedding = TimeEmbedding::kSinusoidal;
  spec.time_embedding_dim = 16;

  GuidanceTrainOptions opts;
  opts.steps = 6000;
  opts.group_size = 64;
  opts.groups_per_step = 8;
  opts.batch_size = 512;
  opts.learning_rate = 1e-3;
  opts.final_lr_fraction = 0.05;

  std::cerr << "  [c2] training gaussian-linear CEP and MSE models...\n";
  const GuidanceModel cep = train_guidance(GuidanceMethod::kCep, normal_data,
                                           lin, spec, kSched, opts, 29);
  const GuidanceModel mse = train_guidance(GuidanceMethod::kMse, normal_data,
                                           lin, spec, kSched, opts, 31);

  const auto mean_cosine = [&](const GuidanceModel& model) {
    double acc = 0.0;
    int n = 0;
    for (double t = 0.1; t <= 0.9 + 1e-9; t += 0.1) {
      const Eigen::VectorXd exact = gaussian_linear_guidance(c, t, kSched);
      for (int rep = 0; rep < 20; ++rep) {
        const Eigen::MatrixXd x = randn(1, 2, rng);
        const Eigen::VectorXd g = model.guidance_grad(x, t).row(0);
        acc += g.dot(exact) / (std::max(g.norm(), 1e-12) * exact.norm());
        ++n;
      }
    }
    return acc / n;
  };
  const double cos_cep = mean_cosine(cep);
  const double cos_mse = mean_cosine(mse);

  // 8gaussians + quadratic bowl at beta = 10: angular error against the
  // empirical-posterior oracle, CEP vs MSE
  const EnergySpec bowl = builtin_energy("quadratic_bowl", 10.0);
  GuidanceTrainOptions bowl_opts = opts;
  bowl_opts.steps = 12000;
  std::cerr << "  [c2] training bowl CEP and MSE models...\n";
  const GuidanceModel cep_bowl =
      train_guidance(GuidanceMethod::kCepSelfNorm, shared().eight.points, bowl,
                     shared().desk_net(), kSched, bowl_opts, 37);
  const GuidanceModel mse_bowl =
      train_guidance(GuidanceMethod::kMse, shared().eight.points, bowl,
                     shared().desk_net(), kSched, bowl_opts, 41);
  const EmpiricalOracle oracle(EmpiricalPrior{shared().eight.points}, bowl,
                               kSched);

  double cep_angle = 0.0, mse_angle = 0.0;
  int n_probes = 0;
  std::uniform_int_distribution<Eigen::Index> pick(0, shared().eight.points.rows() - 1);
  for (double t = 0.1; t <= 0.9 + 1e-9; t += 0.2) {
    for (int rep = 0; rep < 100; ++rep) {
      const Eigen::VectorXd x0 = shared().eight.points.row(pick(rng));
      const Eigen::VectorXd noise = randn(1, 2, rng).row(0);
      const Eigen::VectorXd x_t = kSched.perturb(x0, t, noise);
      const Eigen::VectorXd ref = oracle.posterior_guidance(x_t, t);
      cep_angle += angle_between(cep_bowl.guidance_grad(x_t.transpose(), t).row(0), ref);
      mse_angle += angle_between(mse_bowl.guidance_grad(x_t.transpose(), t).row(0), ref);
      ++n_probes;
    }
  }
  cep_angle /= n_probes;
  mse_angle /= n_probes;

  out << "gaussian-linear cosine: CEP " << cos_cep << ", MSE " << cos_mse
      << "; bowl angular error: CEP " << cep_angle << " rad, MSE " << mse_angle
      << " rad";
  return cos_cep > 0.95 && cos_mse > 0.95 && cep_angle < mse_angle;
}

// ---------------------------------------------------------------------------
// criterion 3: sample-quality ordering CEP < MSE < DPS on the tilted corpus

bool criterion3(std::ostream& out) {
  const PriorModel& prior = shared().prior();
  const int n = 4096;
  SamplerConfig cfg;
  cfg.steps = 25;
  cfg.method = SamplerMethod::kSolver2;
  cfg.guidance_scale = 1.0;
  cfg.seed = 4242;

  std::map<double, std::map<std::string, double>> table;
  for (double beta : {1.0, 10.0}) {
    const EnergySpec energy = builtin_energy("linear", beta);
    const Eigen::MatrixXd truth =
        resample_ground_truth(shared().eight.points, energy, n, 505);
    const double bw = median_heuristic_bandwidth(truth, truth);

    for (GuidanceMethod method :
         {GuidanceMethod::kCepSelfNorm, GuidanceMethod::kMse, GuidanceMethod::kDps}) {
      const GuidanceModel& guidance = shared().energy_guidance(method, beta);
      const Eigen::MatrixXd samples = solver2_sample(prior, guidance, cfg, n);
      table[beta][to_string(method)] = mmd2(samples, truth, bw);
    }
  }

  const double cep1 = table[1.0]["CEP_SELF_NORM"];
  const double mse1 = table[1.0]["MSE"];
  const double cep10 = table[10.0]["CEP_SELF_NORM"];
  const double mse10 = table[10.0]["MSE"];
  const double dps10 = table[10.0]["DPS"];

  out << "mmd2 beta=10: CEP " << cep10 << " MSE " << mse10 << " DPS " << dps10
      << "; beta=1: CEP " << cep1 << " MSE " << mse1;
  return cep10 < mse10 && mse10 < dps10 && cep1 <= 1.2 * mse1;
}

// ---------------------------------------------------------------------------
// criterion 4: exact-energy vs posterior-mean inequality is one-sided

bool criterion4(std::ostream& out) {
  const Dataset2D ds = make_dataset("8gaussians", 5000, 43);
  std::mt19937_64 rng(47);
  std::uniform_real_distribution<double> tdist(1e-3, 1.0);
  std::uniform_real_distribution<double> bdist(0.1, 10.0);
  std::uniform_int_distribution<Eigen::Index> pick(0, ds.points.rows() - 1);

  int violations = 0;
  double max_gap_at_zero = 0.0;
  for (int rep = 0; rep < 10000; ++rep) {
    EnergySpec energy = builtin_energy(
        rep % 2 == 0 ? "linear" : "quadratic_bowl", bdist(rng));
    const EmpiricalOracle oracle(EmpiricalPrior{ds.points}, energy, kSched);
    const Eigen::VectorXd x0 = ds.points.row(pick(rng));
    const Eigen::VectorXd noise = randn(1, 2, rng).row(0);
    const double t = tdist(rng);
    const Eigen::VectorXd x_t = kSched.perturb(x0, t, noise);
    // realized direction: -log E[exp(-Z)] <= E[Z]
    if (oracle.posterior_energy(x_t, t) >
        oracle.posterior_energy_mse(x_t, t) + 1e-10) {
      ++violations;
    }
    if (rep < 500) {
      // near t = 0 both collapse to the same atom value
      const double t0 = 1e-6;
      const Eigen::VectorXd x_small = kSched.perturb(x0, t0, noise);
      max_gap_at_zero = std::max(
          max_gap_at_zero, std::abs(oracle.posterior_energy(x_small, t0) -
                                    oracle.posterior_energy_mse(x_small, t0)));
    }
  }
  out << violations << " violations in 10000 queries; max gap at t=1e-6 "
      << max_gap_at_zero;
  return violations == 0 && max_gap_at_zero < 1e-4;
}

// ---------------------------------------------------------------------------
// criterion 5: network gradients match finite differences

bool criterion5(std::ostream& out) {
  std::mt19937_64 rng(53);
  double worst_param = 0.0, worst_input = 0.0;

  for (Activation act : {Activation::kSiLU, Activation::kReLU}) {
    for (TimeEmbedding te : {TimeEmbedding::kNone, TimeEmbedding::kConcatScalar,
                             TimeEmbedding::kSinusoidal}) {
      for (int cond : {0, 3}) {
        for (int outd : {1, 2}) {
          NetworkSpec spec;
          spec.input_dim = 2;
          spec.output_dim = outd;
          spec.hidden = {10, 6};
          spec.activation = act;
          spec.time_embedding = te;
          spec.time_embedding_dim = 8;
          spec.condition_dim = cond;
          const Network net = init_network(spec, 59);

          const int batch = 3;
          Eigen::VectorXd t;
          if (te != TimeEmbedding::kNone) {
            t.resize(batch);
            t << 0.2, 0.5, 0.8;
          }
          // keep pre-activations away from the ReLU kink so the central
          // difference does not straddle it
          Eigen::MatrixXd x, c;
          for (int attempt = 0; attempt < 100; ++attempt) {
            x = randn(batch, 2, rng);
            if (cond > 0) c = randn(batch, cond, rng);
            ForwardTrace trace;
            forward_batch(net, x, t, c, &trace);
            double min_pre = 1e300;
            for (const Eigen::MatrixXd& pre : trace.pre) {
              min_pre = std::min(min_pre, pre.cwiseAbs().minCoeff());
            }
            if (act != Activation::kReLU || min_pre > 1e-3) break;
          }
          const Eigen::MatrixXd w = randn(batch, outd, rng);

          const Eigen::VectorXd grad = grad_params(net, [&](LossTape& tape) {
            const Eigen::MatrixXd& y = tape.eval(x, t, c);
            tape.seed(0, 2.0 * w.cwiseProduct(y));
            return w.cwiseProduct(y.cwiseProduct(y)).sum();
          });
          const double h = 1e-5;
          Network probe = net;
          for (Eigen::Index i = 0; i < net.params.size(); ++i) {
            probe.params[i] = net.params[i] + h;
            const Eigen::MatrixXd yu = forward_batch(probe, x, t, c);
            probe.params[i] = net.params[i] - h;
            const Eigen::MatrixXd yd = forward_batch(probe, x, t, c);
            probe.params[i] = net.params[i];
            const double fd = (w.cwiseProduct(yu.cwiseProduct(yu)).sum() -
                               w.cwiseProduct(yd.cwiseProduct(yd)).sum()) /
                              (2 * h);
            const double scale =
                std::max({std::abs(grad[i]), std::abs(fd), 1e-6});
            worst_param = std::max(worst_param, std::abs(grad[i] - fd) / scale);
          }

          if (outd == 1) {
            const Eigen::VectorXd xin = x.row(0);
            std::optional<double> t0;
            if (te != TimeEmbedding::kNone) t0 = 0.2;
            Eigen::VectorXd c0;
            if (cond > 0) c0 = c.row(0);
            const Eigen::VectorXd gi = grad_input(net, xin, t0, c0);
            Eigen::VectorXd p = xin;
            for (Eigen::Index i = 0; i < xin.size(); ++i) {
              p[i] = xin[i] + h;
              const double up = forward(net, p, t0, c0)[0];
              p[i] = xin[i] - h;
              const double dn = forward(net, p, t0, c0)[0];
              p[i] = xin[i];
              const double fd = (up - dn) / (2 * h);
              const double scale = std::max({std::abs(gi[i]), std::abs(fd), 1e-6});
              worst_input = std::max(worst_input, std::abs(gi[i] - fd) / scale);
            }
          }
        }
      }
    }
  }
  out << "max relative error: params " << worst_param << ", inputs "
      << worst_input;
  return worst_param < 1e-4 && worst_input < 1e-4;
}

// ---------------------------------------------------------------------------
// criterion 6: samplers recover the exact standard-normal flow

bool criterion6(std::ostream& out) {
  const EpsilonFn eps = [](const Eigen::MatrixXd& x, double t) {
    return Eigen::MatrixXd(kSched.alpha_sigma(t).second * x);
  };
  const int n = 10000;
  const Eigen::MatrixXd samples = euler_sample_fn(kSched, eps, 1000, n, 2, 61);
  const Eigen::RowVectorXd mean = samples.colwise().mean();
  const Eigen::MatrixXd centered = samples.rowwise() - mean;
  const Eigen::Matrix2d cov = centered.transpose() * centered / (n - 1.0);

  const Eigen::MatrixXd start = terminal_noise(n, 2, 67);
  const Eigen::MatrixXd fine = euler_sample_from(kSched, eps, 2000, start);
  const Eigen::MatrixXd coarse = solver2_sample_from(kSched, eps, 25, start);
  const double mean_dist = (fine - coarse).rowwise().norm().mean();

  const bool pass = mean.cwiseAbs().maxCoeff() < 0.05 &&
                    std::abs(cov(0, 0) - 1.0) < 0.1 &&
                    std::abs(cov(1, 1) - 1.0) < 0.1 &&
                    std::abs(cov(0, 1)) < 0.1 && mean_dist < 0.02;
  out << "mean [" << mean[0] << ", " << mean[1] << "], cov diag [" << cov(0, 0)
      << ", " << cov(1, 1) << "], solver gap " << mean_dist;
  return pass;
}

// ---------------------------------------------------------------------------
// criterion 7: guided policy beats behavior cloning on the point-goal task

bool criterion7(std::ostream& out) {
  PointGoalEnv env;
  const TransitionDataset dataset = generate_behavior_dataset(env, 500, 0.5, 71);

  std::cerr << "  [c7] behavior model...\n";
  NetworkSpec spec;
  spec.hidden = {128, 128, 128};
  spec.time_embedding = TimeEmbedding::kSinusoidal;
  spec.time_embedding_dim = 16;
  PriorTrainOptions bopts;
  bopts.steps = 12000;
  bopts.batch_size = 256;
  bopts.learning_rate = 1e-3;
  bopts.final_lr_fraction = 0.05;
  const PriorModel behavior =
      train_behavior_policy(dataset, spec, kSched, bopts, 73);

  std::cerr << "  [c7] support actions...\n";
  SamplerConfig support_cfg;
  support_cfg.steps = 15;
  support_cfg.seed = 79;
  const SupportActionSet support =
      generate_support_actions(behavior, dataset.states, 16, support_cfg);

  std::cerr << "  [c7] action evaluation model...\n";
  QTrainOptions qopts;
  qopts.steps = 8000;
  qopts.batch_size = 128;
  qopts.learning_rate = 3e-4;
  qopts.gamma = env.discount;
  const QModel q = train_q(dataset, support, qopts, 83);

  std::cerr << "  [c7] energy model...\n";
  QgpoGuidanceTrainOptions gopts;
  gopts.steps = 6000;
  gopts.states_per_step = 8;
  gopts.beta = 3.0;
  const GuidanceModel guidance =
      train_qgpo_guidance(dataset, support, q, kSched, gopts, 89);

  const PolicyEvalResult base =
      evaluate_policy(env, behavior, guidance, 0.0, 100, 97);
  double best_return = -1e18, best_se = 0.0, best_s = 0.0;
  std::ostringstream sweep;
  for (double s : {1.0, 2.0, 3.0, 5.0, 8.0, 10.0}) {
    const PolicyEvalResult r = evaluate_policy(env, behavior, guidance, s, 100, 97);
    sweep << " s=" << s << ":" << r.mean_return;
    if (r.mean_return > best_return) {
      best_return = r.mean_return;
      best_se = r.std_error;
      best_s = s;
    }
  }
  const double margin = 2.0 * std::sqrt(base.std_error * base.std_error +
                                        best_se * best_se);
  out << "behavior " << base.mean_return << " +- " << base.std_error
      << "; best s=" << best_s << " return " << best_return << " +- " << best_se
      << " (margin needed " << margin << ");" << sweep.str();
  return best_return > base.mean_return + margin;
}

// ---------------------------------------------------------------------------
// criterion 8: conditional contrastive vs classifier guidance

bool criterion8(std::ostream& out) {
  const Dataset2D labeled = make_dataset("8gaussians", 50000, 103);
  const PriorModel& prior = shared().prior();
  const Eigen::MatrixXd centers = eight_gaussian_centers();

  NetworkSpec spec = shared().desk_net();
  spec.hidden = {128, 128};

  GuidanceTrainOptions cond_opts;
  cond_opts.steps = 4000;
  cond_opts.group_size = 32;  // the pair grid is K^2 evaluations per step
  cond_opts.learning_rate = 1e-3;
  cond_opts.final_lr_fraction = 0.05;
  std::cerr << "  [c8] training paired contrastive guidance...\n";
  const GuidanceModel cond = train_conditional_guidance(
      GuidanceMethod::kCepCond, labeled.points, labeled.labels, 8, spec, kSched,
      cond_opts, 107);

  GuidanceTrainOptions clf_opts = cond_opts;
  clf_opts.steps = 8000;
  clf_opts.group_size = 64;
  std::cerr << "  [c8] training classifier guidance...\n";
  const GuidanceModel clf = train_conditional_guidance(
      GuidanceMethod::kClassifier, labeled.points, labeled.labels, 8, spec,
      kSched, clf_opts, 109);

  SamplerConfig cfg;
  cfg.steps = 25;
  cfg.guidance_scale = 1.0;

  const auto purity = [&](const GuidanceModel& model, int cls,
                          std::uint64_t seed) {
    SamplerConfig c = cfg;
    c.seed = seed;
    const Eigen::MatrixXd cond_row = one_hot(cls, 8);
    const Eigen::MatrixXd samples = solver2_sample(prior, model, c, 512, cond_row);
    int hits = 0;
    for (Eigen::Index i = 0; i < samples.rows(); ++i) {
      Eigen::Index nearest = 0;
      (centers.rowwise() - samples.row(i)).rowwise().squaredNorm().minCoeff(&nearest);
      if (nearest == cls) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(samples.rows());
  };

  double min_cond = 1.0, min_clf = 1.0, mean_cond = 0.0, mean_clf = 0.0;
  for (int cls = 0; cls < 8; ++cls) {
    const double pc = purity(cond, cls, 1000 + cls);
    const double pf = purity(clf, cls, 1000 + cls);
    min_cond = std::min(min_cond, pc);
    min_clf = std::min(min_clf, pf);
    mean_cond += pc / 8;
    mean_clf += pf / 8;
  }
  out << "purity: contrastive min " << min_cond << " mean " << mean_cond
      << "; classifier min " << min_clf << " mean " << mean_clf
      << "; mean gap " << std::abs(mean_cond - mean_clf);
  return min_cond > 0.9 && min_clf > 0.9 &&
         std::abs(mean_cond - mean_clf) < 0.05;
}

// ---------------------------------------------------------------------------
// criterion 9: contrastive loss identities

bool criterion9(std::ostream& out) {
  std::mt19937_64 rng(113);
  const Eigen::MatrixXd x0 = randn(12, 2, rng);
  const Eigen::MatrixXd noise = randn(12, 2, rng);
  const EnergySpec energy = builtin_energy("ring_distance", 2.0);

  NetworkSpec spec;
  spec.input_dim = 2;
  spec.output_dim = 1;
  spec.hidden = {24, 24};
  spec.time_embedding = TimeEmbedding::kSinusoidal;
  spec.time_embedding_dim = 8;
  Network net = init_network(spec, 127);

  const double base_cep = cep_loss(net, kSched, x0, energy, 0.4, noise);
  const double base_norm = cep_self_norm_loss(net, kSched, x0, energy, 0.4, noise);
  Eigen::VectorXd times(12);
  for (int i = 0; i < 12; ++i) times[i] = 0.05 + 0.08 * i;
  const double base_multi = cep_multi_t_loss(net, kSched, x0, energy, times, noise);

  NetworkSpec cspec = spec;
  cspec.condition_dim = 4;
  Network cnet = init_network(cspec, 131);
  Eigen::MatrixXd conds(12, 4);
  for (int i = 0; i < 12; ++i) conds.row(i) = one_hot(i % 4, 4);
  const double base_cond =
      cep_conditional_loss(cnet, kSched, x0, conds, 0.4, noise);

  // in-support variant through a Q model
  NetworkSpec qspec;
  qspec.input_dim = 4;
  qspec.output_dim = 1;
  qspec.hidden = {12, 12};
  qspec.activation = Activation::kReLU;
  QModel q;
  q.online1 = init_network(qspec, 137);
  q.online2 = init_network(qspec, 139);
  q.target1 = q.online1;
  q.target2 = q.online2;
  NetworkSpec sspec = spec;
  sspec.condition_dim = 2;
  Network snet = init_network(sspec, 149);
  const Eigen::Vector2d state(0.3, -0.7);
  const double base_support =
      in_support_cep_loss(snet, kSched, state, x0, q, 3.0, 0.4, noise);

  net.params[net.params.size() - 1] += 11.5;
  cnet.params[cnet.params.size() - 1] -= 6.25;
  snet.params[snet.params.size() - 1] += 2.5;
  double worst_shift = 0.0;
  worst_shift = std::max(
      worst_shift,
      std::abs(cep_loss(net, kSched, x0, energy, 0.4, noise) - base_cep));
  worst_shift = std::max(
      worst_shift,
      std::abs(cep_self_norm_loss(net, kSched, x0, energy, 0.4, noise) -
               base_norm));
  worst_shift = std::max(
      worst_shift,
      std::abs(cep_multi_t_loss(net, kSched, x0, energy, times, noise) -
               base_multi));
  worst_shift = std::max(
      worst_shift,
      std::abs(cep_conditional_loss(cnet, kSched, x0, conds, 0.4, noise) -
               base_cond));
  worst_shift = std::max(
      worst_shift,
      std::abs(in_support_cep_loss(snet, kSched, state, x0, q, 3.0, 0.4, noise) -
               base_support));

  // multi-time collapse onto the shared-time loss
  net.params[net.params.size() - 1] -= 11.5;  // back to the base parameters
  const Eigen::VectorXd same = Eigen::VectorXd::Constant(12, 0.37);
  const double collapse_gap =
      std::abs(cep_multi_t_loss(net, kSched, x0, energy, same, noise) -
               cep_loss(net, kSched, x0, energy, 0.37, noise));

  // the in-support loss is exactly the adapter composition
  snet.params[snet.params.size() - 1] -= 2.5;
  EnergySpec adapter;
  adapter.beta = 3.0;
  adapter.energy = [&](const Eigen::VectorXd& a) {
    return -q.value(state, a.head<2>());
  };
  const double direct =
      in_support_cep_loss(snet, kSched, state, x0, q, 3.0, 0.4, noise);
  const double composed = cep_self_norm_loss(snet, kSched, x0, adapter, 0.4,
                                             noise, state.transpose());
  const bool adapter_exact = direct == composed;

  out << "max shift drift " << worst_shift << ", multi-t collapse gap "
      << collapse_gap << ", adapter exact: " << (adapter_exact ? "yes" : "no");
  return worst_shift < 1e-12 && collapse_gap < 1e-12 && adapter_exact;
}

struct Criterion {
  int id;
  const char* name;
  std::function<bool(std::ostream&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<Criterion> criteria{
      {1, "exact guidance matches finite differences of the exact energy", criterion1},
      {4, "exact-energy vs posterior-mean inequality is one-sided", criterion4},
      {5, "network gradients match finite differences", criterion5},
      {9, "contrastive loss identities", criterion9},
      {6, "samplers recover the exact standard-normal flow", criterion6},
      {2, "trained guidance matches the oracles", criterion2},
      {3, "sample-quality ordering CEP < MSE < DPS", criterion3},
      {8, "conditional contrastive vs classifier guidance", criterion8},
      {7, "guided policy beats behavior cloning", criterion7},
  };

  std::vector<int> only;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
      only.push_back(std::atoi(argv[++i]));
    }
  }

  int failures = 0;
  for (const Criterion& c : criteria) {
    if (!only.empty() &&
        std::find(only.begin(), only.end(), c.id) == only.end()) {
      continue;
    }
    const auto start = std::chrono::steady_clock::now();
    std::ostringstream detail;
    bool ok = false;
    try {
      ok = c.run(detail);
    } catch (const std::exception& e) {
      detail << "exception: " << e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << c.id << ": "
              << c.name << " -- " << detail.str() << " (" << secs << "s)"
              << std::endl;
    if (!ok) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
