#include "egdiff/prior.hpp"

#include <cmath>
#include <stdexcept>

namespace egdiff {

Eigen::MatrixXd PriorModel::epsilon(const Eigen::MatrixXd& x_t, double t,
                                    const Eigen::MatrixXd& c) const {
  Eigen::VectorXd tv(1);
  tv[0] = t;
  return forward_batch(net, x_t, tv, c);
}

Eigen::MatrixXd PriorModel::epsilon(const Eigen::MatrixXd& x_t,
                                    const Eigen::VectorXd& t,
                                    const Eigen::MatrixXd& c) const {
  return forward_batch(net, x_t, t, c);
}

namespace {

struct DenoisingBatch {
  Eigen::MatrixXd x_t;
  Eigen::MatrixXd eps;
  Eigen::VectorXd t;
};

DenoisingBatch perturb_batch(const Schedule& schedule, const Eigen::MatrixXd& x0,
                             std::mt19937_64& rng) {
  std::uniform_real_distribution<double> tdist(schedule.t_min(), schedule.t_max());
  std::normal_distribution<double> gauss(0.0, 1.0);
  DenoisingBatch b;
  b.eps.resize(x0.rows(), x0.cols());
  b.t.resize(x0.rows());
  for (Eigen::Index i = 0; i < x0.rows(); ++i) {
    b.t[i] = tdist(rng);
    for (Eigen::Index j = 0; j < x0.cols(); ++j) b.eps(i, j) = gauss(rng);
  }
  b.x_t = schedule.perturb(x0, b.t, b.eps);
  return b;
}

}  // namespace

double denoising_loss(const PriorModel& model, const Eigen::MatrixXd& x0,
                      const Eigen::MatrixXd& conditions, std::mt19937_64& rng) {
  if (x0.rows() == 0) throw std::invalid_argument("denoising_loss: empty batch");
  const DenoisingBatch b = perturb_batch(model.schedule, x0, rng);
  const Eigen::MatrixXd pred = model.epsilon(b.x_t, b.t, conditions);
  return (pred - b.eps).rowwise().squaredNorm().mean();
}

PriorModel train_prior(const Eigen::MatrixXd& x0,
                       const Eigen::MatrixXd& conditions,
                       const NetworkSpec& spec, const Schedule& schedule,
                       const PriorTrainOptions& opts, std::uint64_t seed,
                       TrainingLog* log) {
  if (x0.rows() == 0) throw std::invalid_argument("train_prior: empty dataset");
  const bool conditioned = conditions.rows() > 0;
  if (conditioned && conditions.rows() != x0.rows()) {
    throw std::invalid_argument("train_prior: condition rows mismatch");
  }
  NetworkSpec net_spec = spec;
  net_spec.input_dim = static_cast<int>(x0.cols());
  net_spec.output_dim = static_cast<int>(x0.cols());
  net_spec.condition_dim = conditioned ? static_cast<int>(conditions.cols()) : 0;
  if (net_spec.time_embedding == TimeEmbedding::kNone) {
    net_spec.time_embedding = TimeEmbedding::kSinusoidal;
  }

  PriorModel model{init_network(net_spec, seed), schedule,
                   static_cast<int>(x0.cols()), net_spec.condition_dim};
  OptimizerState opt = make_optimizer(model.net, opts.learning_rate);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_int_distribution<Eigen::Index> pick(0, x0.rows() - 1);

  const int batch = std::min<int>(opts.batch_size, static_cast<int>(x0.rows()));
  Eigen::MatrixXd bx(batch, x0.cols());
  Eigen::MatrixXd bc;
  if (conditioned) bc.resize(batch, conditions.cols());

  for (int step = 0; step < opts.steps; ++step) {
    if (opts.final_lr_fraction < 1.0) {
      const double frac = static_cast<double>(step) / std::max(1, opts.steps - 1);
      opt.learning_rate =
          opts.learning_rate * (1.0 - (1.0 - opts.final_lr_fraction) * frac);
    }
    for (int i = 0; i < batch; ++i) {
      const Eigen::Index idx = pick(rng);
      bx.row(i) = x0.row(idx);
      if (conditioned) bc.row(i) = conditions.row(idx);
    }
    const DenoisingBatch pb = perturb_batch(schedule, bx, rng);

    double loss_value = 0.0;
    try {
      const Eigen::VectorXd grad = grad_params(
          model.net,
          [&](LossTape& tape) {
            const Eigen::MatrixXd& pred = tape.eval(pb.x_t, pb.t, bc);
            const Eigen::MatrixXd resid = pred - pb.eps;
            const double loss = resid.rowwise().squaredNorm().mean();
            tape.seed(0, 2.0 / static_cast<double>(batch) * resid);
            return loss;
          },
          &loss_value);
      adam_step(model.net, opt, grad);
    } catch (const std::runtime_error& e) {
      throw TrainingDivergence("train_prior: diverged at step " +
                               std::to_string(step) + " (" + e.what() + ")");
    }
    if (log) log->loss_curve.push_back(loss_value);
  }
  return model;
}

}  // namespace egdiff
