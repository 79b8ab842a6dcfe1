#include "egdiff/guidance.hpp"

#include <cmath>
#include <stdexcept>

namespace egdiff {

std::string to_string(GuidanceMethod m) {
  switch (m) {
    case GuidanceMethod::kNone: return "NONE";
    case GuidanceMethod::kCep: return "CEP";
    case GuidanceMethod::kCepSelfNorm: return "CEP_SELF_NORM";
    case GuidanceMethod::kCepMultiT: return "CEP_MULTI_T";
    case GuidanceMethod::kCepCond: return "CEP_COND";
    case GuidanceMethod::kClassifier: return "CLASSIFIER";
    case GuidanceMethod::kMse: return "MSE";
    case GuidanceMethod::kEmse: return "EMSE";
    case GuidanceMethod::kDps: return "DPS";
  }
  return "NONE";
}

GuidanceMethod guidance_method_from_string(const std::string& name) {
  if (name == "NONE") return GuidanceMethod::kNone;
  if (name == "CEP") return GuidanceMethod::kCep;
  if (name == "CEP_SELF_NORM") return GuidanceMethod::kCepSelfNorm;
  if (name == "CEP_MULTI_T") return GuidanceMethod::kCepMultiT;
  if (name == "CEP_COND") return GuidanceMethod::kCepCond;
  if (name == "CLASSIFIER") return GuidanceMethod::kClassifier;
  if (name == "MSE") return GuidanceMethod::kMse;
  if (name == "EMSE") return GuidanceMethod::kEmse;
  if (name == "DPS") return GuidanceMethod::kDps;
  throw std::invalid_argument("unknown guidance method '" + name + "'");
}

namespace {

constexpr double kExpClamp = 30.0;

double clamped_exp(double arg, NumericsCounters* counters) {
  if (arg > kExpClamp || arg < -kExpClamp) {
    if (counters) counters->exp_clamps += 1;
    arg = std::clamp(arg, -kExpClamp, kExpClamp);
  }
  return std::exp(arg);
}

double log_sum_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

Eigen::VectorXd softmax(const Eigen::VectorXd& v) {
  Eigen::VectorXd p = (v.array() - v.maxCoeff()).exp();
  return p / p.sum();
}

struct GroupLoss {
  double value = 0.0;
  Eigen::VectorXd df;  // gradient w.r.t. the raw network outputs f
};

/// Cross entropy of the group softmax of -f against (possibly unnormalized)
/// nonnegative labels: value = -sum_i w_i log softmax_i(-f).
GroupLoss soft_cross_entropy(const Eigen::VectorXd& f,
                             const Eigen::VectorXd& labels) {
  const Eigen::VectorXd logits = -f;
  const double lse = log_sum_exp(logits);
  GroupLoss out;
  out.value = labels.sum() * lse - labels.dot(logits);
  // d value / d logits = -w + (sum w) softmax(logits); f = -logits.
  const Eigen::VectorXd p = softmax(logits);
  out.df = labels - labels.sum() * p;
  return out;
}

Eigen::VectorXd cep_labels(const Eigen::MatrixXd& x0, const EnergySpec& energy,
                           bool self_normalized, NumericsCounters* counters) {
  Eigen::VectorXd scaled(x0.rows());
  for (Eigen::Index i = 0; i < x0.rows(); ++i) {
    scaled[i] = -energy.beta * energy.value(x0.row(i));
  }
  if (self_normalized) {
    return softmax(scaled);
  }
  Eigen::VectorXd w(scaled.size());
  for (Eigen::Index i = 0; i < scaled.size(); ++i) {
    w[i] = clamped_exp(scaled[i], counters);
  }
  return w;
}

void require_group(const Eigen::MatrixXd& x0, const Eigen::MatrixXd& noise) {
  if (x0.rows() <= 1) {
    throw std::invalid_argument("contrastive loss: needs a group of K > 1");
  }
  if (noise.rows() != x0.rows() || noise.cols() != x0.cols()) {
    throw std::invalid_argument("contrastive loss: noise shape mismatch");
  }
}

Eigen::VectorXd constant_times(double t, Eigen::Index n) {
  return Eigen::VectorXd::Constant(n, t);
}

struct RegressionLoss {
  double value = 0.0;
  Eigen::VectorXd df;
};

RegressionLoss mse_core(const Eigen::VectorXd& f, const Eigen::VectorXd& target) {
  RegressionLoss out;
  const Eigen::VectorXd r = f - target;
  const double n = static_cast<double>(f.size());
  out.value = r.squaredNorm() / n;
  out.df = 2.0 / n * r;
  return out;
}

RegressionLoss emse_core(const Eigen::VectorXd& f, const Eigen::VectorXd& target,
                         NumericsCounters* counters) {
  RegressionLoss out;
  const double n = static_cast<double>(f.size());
  out.df.resize(f.size());
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    const bool f_clamped = f[i] > kExpClamp || f[i] < -kExpClamp;
    const double ef = clamped_exp(f[i], counters);
    const double et = clamped_exp(target[i], counters);
    const double r = ef - et;
    out.value += r * r / n;
    out.df[i] = f_clamped ? 0.0 : 2.0 / n * r * ef;
  }
  return out;
}

Eigen::VectorXd scaled_energies(const Eigen::MatrixXd& x0,
                                const EnergySpec& energy) {
  Eigen::VectorXd e(x0.rows());
  for (Eigen::Index i = 0; i < x0.rows(); ++i) {
    e[i] = energy.beta * energy.value(x0.row(i));
  }
  return e;
}

}  // namespace

std::pair<double, Eigen::VectorXd> contrastive_loss_on_outputs(
    const Eigen::VectorXd& f, const Eigen::VectorXd& labels) {
  const GroupLoss gl = soft_cross_entropy(f, labels);
  return {gl.value, gl.df};
}

double cep_loss(const Network& net, const Schedule& schedule,
                const Eigen::MatrixXd& x0, const EnergySpec& energy, double t,
                const Eigen::MatrixXd& noise, const Eigen::MatrixXd& condition,
                NumericsCounters* counters) {
  require_group(x0, noise);
  energy.validate();
  const Eigen::MatrixXd x_t = schedule.perturb(x0, t, noise);
  const Eigen::VectorXd f =
      forward_batch(net, x_t, constant_times(t, x0.rows()), condition).col(0);
  return soft_cross_entropy(f, cep_labels(x0, energy, false, counters)).value;
}

double cep_self_norm_loss(const Network& net, const Schedule& schedule,
                          const Eigen::MatrixXd& x0, const EnergySpec& energy,
                          double t, const Eigen::MatrixXd& noise,
                          const Eigen::MatrixXd& condition) {
  require_group(x0, noise);
  energy.validate();
  const Eigen::MatrixXd x_t = schedule.perturb(x0, t, noise);
  const Eigen::VectorXd f =
      forward_batch(net, x_t, constant_times(t, x0.rows()), condition).col(0);
  return soft_cross_entropy(f, cep_labels(x0, energy, true, nullptr)).value;
}

double cep_multi_t_loss(const Network& net, const Schedule& schedule,
                        const Eigen::MatrixXd& x0, const EnergySpec& energy,
                        const Eigen::VectorXd& t, const Eigen::MatrixXd& noise,
                        const Eigen::MatrixXd& condition,
                        NumericsCounters* counters) {
  require_group(x0, noise);
  energy.validate();
  if (t.size() != x0.rows()) {
    throw std::invalid_argument("cep_multi_t_loss: one time per sample");
  }
  const Eigen::MatrixXd x_t = schedule.perturb(x0, t, noise);
  const Eigen::VectorXd f = forward_batch(net, x_t, t, condition).col(0);
  return soft_cross_entropy(f, cep_labels(x0, energy, false, counters)).value;
}

double cep_conditional_loss(const Network& net, const Schedule& schedule,
                            const Eigen::MatrixXd& x0,
                            const Eigen::MatrixXd& conditions, double t,
                            const Eigen::MatrixXd& noise) {
  require_group(x0, noise);
  if (conditions.rows() != x0.rows()) {
    throw std::invalid_argument("cep_conditional_loss: needs paired conditions");
  }
  const Eigen::Index k = x0.rows();
  const Eigen::MatrixXd x_t = schedule.perturb(x0, t, noise);

  // All (condition i, data j) pairs, i major.
  Eigen::MatrixXd xs(k * k, x0.cols());
  Eigen::MatrixXd cs(k * k, conditions.cols());
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      xs.row(i * k + j) = x_t.row(j);
      cs.row(i * k + j) = conditions.row(i);
    }
  }
  const Eigen::VectorXd f =
      forward_batch(net, xs, constant_times(t, k * k), cs).col(0);

  double loss = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    const Eigen::VectorXd logits = -f.segment(i * k, k);
    loss += log_sum_exp(logits) - logits[i];
  }
  return loss;
}

double classifier_loss(const Network& net, const Schedule& schedule,
                       const Eigen::MatrixXd& x0, const std::vector<int>& labels,
                       int num_classes, double t, const Eigen::MatrixXd& noise) {
  if (x0.rows() == 0) throw std::invalid_argument("classifier_loss: empty batch");
  if (static_cast<Eigen::Index>(labels.size()) != x0.rows()) {
    throw std::invalid_argument("classifier_loss: labels size mismatch");
  }
  for (int c : labels) {
    if (c < 0 || c >= num_classes) {
      throw std::invalid_argument("classifier_loss: class id out of range");
    }
  }
  const Eigen::Index k = x0.rows();
  const Eigen::MatrixXd x_t = schedule.perturb(x0, t, noise);

  Eigen::MatrixXd xs(k * num_classes, x0.cols());
  Eigen::MatrixXd cs(k * num_classes, num_classes);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (int j = 0; j < num_classes; ++j) {
      xs.row(i * num_classes + j) = x_t.row(i);
      cs.row(i * num_classes + j) = one_hot(j, num_classes);
    }
  }
  const Eigen::VectorXd f =
      forward_batch(net, xs, constant_times(t, k * num_classes), cs).col(0);

  double loss = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    const Eigen::VectorXd logits = -f.segment(i * num_classes, num_classes);
    loss += log_sum_exp(logits) - logits[labels[i]];
  }
  return loss / static_cast<double>(k);
}

double mse_loss(const Network& net, const Schedule& schedule,
                const Eigen::MatrixXd& x0, const EnergySpec& energy,
                const Eigen::VectorXd& t, const Eigen::MatrixXd& noise) {
  if (x0.rows() == 0) throw std::invalid_argument("mse_loss: empty batch");
  energy.validate();
  const Eigen::MatrixXd x_t = schedule.perturb(x0, t, noise);
  const Eigen::VectorXd f = forward_batch(net, x_t, t, {}).col(0);
  return mse_core(f, scaled_energies(x0, energy)).value;
}

double mse_loss(const Network& net, const Schedule& schedule,
                const Eigen::MatrixXd& x0, const EnergySpec& energy, double t,
                const Eigen::MatrixXd& noise) {
  return mse_loss(net, schedule, x0, energy, constant_times(t, x0.rows()), noise);
}

double emse_loss(const Network& net, const Schedule& schedule,
                 const Eigen::MatrixXd& x0, const EnergySpec& energy,
                 const Eigen::VectorXd& t, const Eigen::MatrixXd& noise,
                 NumericsCounters* counters) {
  if (x0.rows() == 0) throw std::invalid_argument("emse_loss: empty batch");
  energy.validate();
  const Eigen::MatrixXd x_t = schedule.perturb(x0, t, noise);
  const Eigen::VectorXd f = forward_batch(net, x_t, t, {}).col(0);
  return emse_core(f, scaled_energies(x0, energy), counters).value;
}

double emse_loss(const Network& net, const Schedule& schedule,
                 const Eigen::MatrixXd& x0, const EnergySpec& energy, double t,
                 const Eigen::MatrixXd& noise, NumericsCounters* counters) {
  return emse_loss(net, schedule, x0, energy, constant_times(t, x0.rows()),
                   noise, counters);
}

std::pair<double, Eigen::VectorXd> dps_energy_and_grad(
    const PriorModel& prior, const EnergySpec& energy,
    const Eigen::VectorXd& x_t, double t) {
  energy.validate();
  const auto [alpha, sigma] = prior.schedule.alpha_sigma(t);

  ForwardTrace trace;
  Eigen::VectorXd tv(1);
  tv[0] = t;
  const Eigen::MatrixXd eps =
      forward_batch(prior.net, x_t.transpose(), tv, {}, &trace);
  const Eigen::VectorXd x_hat =
      (x_t - sigma * eps.row(0).transpose()) / alpha;

  const double value = energy.beta * energy.value(x_hat);
  const Eigen::VectorXd de = energy.grad(x_hat);

  Eigen::VectorXd scratch = Eigen::VectorXd::Zero(prior.net.params.size());
  const Eigen::MatrixXd deps_dx =
      backward_batch(prior.net, trace, de.transpose(), scratch);
  const Eigen::VectorXd grad =
      energy.beta / alpha * (de - sigma * deps_dx.row(0).transpose());
  return {value, grad};
}

Eigen::MatrixXd dps_guidance_batch(const PriorModel& prior,
                                   const EnergySpec& energy,
                                   const Eigen::MatrixXd& x_t, double t,
                                   const Eigen::MatrixXd& condition) {
  energy.validate();
  const auto [alpha, sigma] = prior.schedule.alpha_sigma(t);

  ForwardTrace trace;
  Eigen::VectorXd tv(1);
  tv[0] = t;
  const Eigen::MatrixXd eps = forward_batch(prior.net, x_t, tv, condition, &trace);
  const Eigen::MatrixXd x_hat = (x_t - sigma * eps) / alpha;

  Eigen::MatrixXd de(x_t.rows(), x_t.cols());
  for (Eigen::Index i = 0; i < x_t.rows(); ++i) {
    de.row(i) = energy.grad(x_hat.row(i)).transpose();
  }
  Eigen::VectorXd scratch = Eigen::VectorXd::Zero(prior.net.params.size());
  const Eigen::MatrixXd deps_dx = backward_batch(prior.net, trace, de, scratch);
  return energy.beta / alpha * (de - sigma * deps_dx);
}

Eigen::RowVectorXd one_hot(int label, int num_classes) {
  Eigen::RowVectorXd v = Eigen::RowVectorXd::Zero(num_classes);
  v[label] = 1.0;
  return v;
}

Eigen::MatrixXd GuidanceModel::guidance_grad(const Eigen::MatrixXd& x_t,
                                             double t,
                                             const Eigen::MatrixXd& condition) const {
  switch (method) {
    case GuidanceMethod::kNone:
      return Eigen::MatrixXd::Zero(x_t.rows(), x_t.cols());
    case GuidanceMethod::kDps:
      throw std::logic_error(
          "GuidanceModel: DPS guidance needs the prior; use dps_guidance_batch");
    case GuidanceMethod::kClassifier: {
      // Gradient of f(x, c, t) + log sum_j exp(-f(x, c_j, t)) at the
      // requested class (condition rows are one-hot classes).
      const Eigen::Index rows = x_t.rows();
      Eigen::VectorXd tv(1);
      tv[0] = t;
      std::vector<ForwardTrace> traces(num_classes);
      Eigen::MatrixXd logits(rows, num_classes);
      for (int j = 0; j < num_classes; ++j) {
        const Eigen::MatrixXd cj = one_hot(j, num_classes);
        logits.col(j) =
            -forward_batch(net, x_t, tv, cj, &traces[j]).col(0);
      }
      Eigen::MatrixXd p(rows, num_classes);
      for (Eigen::Index i = 0; i < rows; ++i) {
        p.row(i) = softmax(logits.row(i).transpose()).transpose();
      }
      Eigen::MatrixXd requested = condition;
      if (requested.rows() == 1 && rows > 1) {
        requested = condition.replicate(rows, 1);
      }
      Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(rows, x_t.cols());
      Eigen::VectorXd scratch = Eigen::VectorXd::Zero(net.params.size());
      for (int j = 0; j < num_classes; ++j) {
        const Eigen::MatrixXd dy = requested.col(j) - p.col(j);
        grad += backward_batch(net, traces[j], dy, scratch);
      }
      return grad;
    }
    default:
      return grad_input_batch(net, x_t, t, condition);
  }
}

namespace {

NetworkSpec guidance_net_spec(const NetworkSpec& base, int input_dim,
                              int condition_dim) {
  NetworkSpec spec = base;
  spec.input_dim = input_dim;
  spec.output_dim = 1;
  spec.condition_dim = condition_dim;
  if (spec.time_embedding == TimeEmbedding::kNone) {
    spec.time_embedding = TimeEmbedding::kSinusoidal;
  }
  return spec;
}

}  // namespace

GuidanceModel train_guidance(GuidanceMethod method, const Eigen::MatrixXd& data,
                             const EnergySpec& energy, const NetworkSpec& spec,
                             const Schedule& schedule,
                             const GuidanceTrainOptions& opts,
                             std::uint64_t seed, TrainingLog* log) {
  switch (method) {
    case GuidanceMethod::kCep:
    case GuidanceMethod::kCepSelfNorm:
    case GuidanceMethod::kCepMultiT:
    case GuidanceMethod::kMse:
    case GuidanceMethod::kEmse:
      break;
    default:
      throw std::invalid_argument("train_guidance: method '" + to_string(method) +
                                  "' is not trained from an energy");
  }
  energy.validate();
  if (data.rows() < 2) throw std::invalid_argument("train_guidance: empty dataset");

  GuidanceModel model;
  model.method = method;
  model.beta = energy.beta;
  model.schedule = schedule;
  model.net = init_network(
      guidance_net_spec(spec, static_cast<int>(data.cols()), 0), seed);

  OptimizerState opt = make_optimizer(model.net, opts.learning_rate);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_int_distribution<Eigen::Index> pick(0, data.rows() - 1);
  std::uniform_real_distribution<double> tdist(schedule.t_min(), schedule.t_max());
  std::normal_distribution<double> gauss(0.0, 1.0);

  const bool contrastive = method == GuidanceMethod::kCep ||
                           method == GuidanceMethod::kCepSelfNorm ||
                           method == GuidanceMethod::kCepMultiT;
  const int k = opts.group_size;
  const int groups = opts.groups_per_step;
  const int rows = contrastive ? k * groups
                               : std::min<int>(opts.batch_size,
                                               static_cast<int>(data.rows()));

  NumericsCounters counters;
  Eigen::MatrixXd bx(rows, data.cols());
  Eigen::MatrixXd bn(rows, data.cols());
  Eigen::VectorXd bt(rows);

  for (int step = 0; step < opts.steps; ++step) {
    if (opts.final_lr_fraction < 1.0) {
      const double frac = static_cast<double>(step) / std::max(1, opts.steps - 1);
      opt.learning_rate =
          opts.learning_rate *
          (1.0 - (1.0 - opts.final_lr_fraction) * frac);
    }
    for (int i = 0; i < rows; ++i) {
      bx.row(i) = data.row(pick(rng));
      for (Eigen::Index j = 0; j < data.cols(); ++j) bn(i, j) = gauss(rng);
    }
    if (contrastive && method != GuidanceMethod::kCepMultiT) {
      for (int g = 0; g < groups; ++g) {
        const double tg = tdist(rng);
        bt.segment(g * k, k).setConstant(tg);
      }
    } else {
      for (int i = 0; i < rows; ++i) bt[i] = tdist(rng);
    }
    const Eigen::MatrixXd x_t = schedule.perturb(bx, bt, bn);

    double loss_value = 0.0;
    try {
      const Eigen::VectorXd grad = grad_params(
          model.net,
          [&](LossTape& tape) {
            const Eigen::VectorXd f = tape.eval(x_t, bt).col(0);
            Eigen::VectorXd df(rows);
            double loss = 0.0;
            if (contrastive) {
              for (int g = 0; g < groups; ++g) {
                const Eigen::VectorXd labels =
                    cep_labels(bx.middleRows(g * k, k), energy,
                               method == GuidanceMethod::kCepSelfNorm, &counters);
                const GroupLoss gl = soft_cross_entropy(f.segment(g * k, k), labels);
                loss += gl.value / groups;
                df.segment(g * k, k) = gl.df / groups;
              }
            } else {
              const Eigen::VectorXd target = scaled_energies(bx, energy);
              const RegressionLoss rl = method == GuidanceMethod::kMse
                                            ? mse_core(f, target)
                                            : emse_core(f, target, &counters);
              loss = rl.value;
              df = rl.df;
            }
            tape.seed(0, df);
            return loss;
          },
          &loss_value);
      adam_step(model.net, opt, grad);
    } catch (const std::runtime_error& e) {
      throw TrainingDivergence("train_guidance: diverged at step " +
                               std::to_string(step) + " (" + e.what() + ")");
    }
    if (log) log->loss_curve.push_back(loss_value);
  }
  if (log) log->exp_clamps = counters.exp_clamps;
  return model;
}

GuidanceModel train_conditional_guidance(
    GuidanceMethod method, const Eigen::MatrixXd& data,
    const std::vector<int>& labels, int num_classes, const NetworkSpec& spec,
    const Schedule& schedule, const GuidanceTrainOptions& opts,
    std::uint64_t seed, TrainingLog* log) {
  if (method != GuidanceMethod::kCepCond &&
      method != GuidanceMethod::kClassifier) {
    throw std::invalid_argument(
        "train_conditional_guidance: method must be CEP_COND or CLASSIFIER");
  }
  if (data.rows() < 2 || static_cast<Eigen::Index>(labels.size()) != data.rows()) {
    throw std::invalid_argument("train_conditional_guidance: bad labeled data");
  }

  GuidanceModel model;
  model.method = method;
  model.beta = 1.0;
  model.schedule = schedule;
  model.num_classes = num_classes;
  model.net = init_network(
      guidance_net_spec(spec, static_cast<int>(data.cols()), num_classes), seed);

  OptimizerState opt = make_optimizer(model.net, opts.learning_rate);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_int_distribution<Eigen::Index> pick(0, data.rows() - 1);
  std::uniform_real_distribution<double> tdist(schedule.t_min(), schedule.t_max());
  std::normal_distribution<double> gauss(0.0, 1.0);

  const int k = opts.group_size;
  Eigen::MatrixXd bx(k, data.cols());
  Eigen::MatrixXd bn(k, data.cols());
  std::vector<int> bl(k);

  for (int step = 0; step < opts.steps; ++step) {
    for (int i = 0; i < k; ++i) {
      const Eigen::Index idx = pick(rng);
      bx.row(i) = data.row(idx);
      bl[i] = labels[idx];
      for (Eigen::Index j = 0; j < data.cols(); ++j) bn(i, j) = gauss(rng);
    }
    const double t = tdist(rng);
    const Eigen::MatrixXd x_t = schedule.perturb(bx, t, bn);

    double loss_value = 0.0;
    Eigen::VectorXd grad;
    if (method == GuidanceMethod::kCepCond) {
      // (condition i, data j) pair grid, i major; per-pair gradient
      // d/df(i,j) = softmax_j(-f(i,.))_j - [i == j].
      Eigen::MatrixXd xs(k * k, data.cols());
      Eigen::MatrixXd cs(k * k, num_classes);
      for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
          xs.row(i * k + j) = x_t.row(j);
          cs.row(i * k + j) = one_hot(bl[i], num_classes);
        }
      }
      grad = grad_params(
          model.net,
          [&](LossTape& tape) {
            const Eigen::VectorXd f =
                tape.eval(xs, constant_times(t, k * k), cs).col(0);
            double loss = 0.0;
            Eigen::VectorXd df(k * k);
            for (int i = 0; i < k; ++i) {
              const Eigen::VectorXd logits = -f.segment(i * k, k);
              loss += log_sum_exp(logits) - logits[i];
              // d loss / d f = one_hot(i) - softmax(logits)
              Eigen::VectorXd g = -softmax(logits);
              g[i] += 1.0;
              df.segment(i * k, k) = g;
            }
            tape.seed(0, df);
            return loss;
          },
          &loss_value);
    } else {
      Eigen::MatrixXd xs(k * num_classes, data.cols());
      Eigen::MatrixXd cs(k * num_classes, num_classes);
      for (int i = 0; i < k; ++i) {
        for (int j = 0; j < num_classes; ++j) {
          xs.row(i * num_classes + j) = x_t.row(i);
          cs.row(i * num_classes + j) = one_hot(j, num_classes);
        }
      }
      grad = grad_params(
          model.net,
          [&](LossTape& tape) {
            const Eigen::VectorXd f =
                tape.eval(xs, constant_times(t, k * num_classes), cs).col(0);
            double loss = 0.0;
            Eigen::VectorXd df(k * num_classes);
            for (int i = 0; i < k; ++i) {
              const Eigen::VectorXd logits = -f.segment(i * num_classes, num_classes);
              loss += (log_sum_exp(logits) - logits[bl[i]]) / k;
              Eigen::VectorXd g = -softmax(logits);
              g[bl[i]] += 1.0;
              df.segment(i * num_classes, num_classes) = g / k;
            }
            tape.seed(0, df);
            return loss;
          },
          &loss_value);
    }
    if (!std::isfinite(loss_value)) {
      throw TrainingDivergence("train_conditional_guidance: non-finite loss");
    }
    try {
      adam_step(model.net, opt, grad);
    } catch (const std::runtime_error& e) {
      throw TrainingDivergence(std::string("train_conditional_guidance: ") +
                               e.what());
    }
    if (log) log->loss_curve.push_back(loss_value);
  }
  return model;
}

}  // namespace egdiff
