#include "egdiff/qgpo.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace egdiff {

namespace {

Eigen::VectorXd softmax(const Eigen::VectorXd& v) {
  Eigen::VectorXd p = (v.array() - v.maxCoeff()).exp();
  return p / p.sum();
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Eigen::MatrixXd concat_sa(const Eigen::MatrixXd& s, const Eigen::MatrixXd& a) {
  Eigen::MatrixXd x(s.rows(), s.cols() + a.cols());
  x << s, a;
  return x;
}

}  // namespace

Eigen::Vector2d PointGoalEnv::clamp_state(const Eigen::Vector2d& s) const {
  return s.cwiseMax(-state_bound).cwiseMin(state_bound);
}

Eigen::Vector2d PointGoalEnv::clamp_action(const Eigen::Vector2d& a) const {
  return a.cwiseMax(-action_bound).cwiseMin(action_bound);
}

Eigen::Vector2d PointGoalEnv::step(const Eigen::Vector2d& s,
                                   const Eigen::Vector2d& a) const {
  return clamp_state(s + step_size * clamp_action(a));
}

double PointGoalEnv::reward(const Eigen::Vector2d& s,
                            const Eigen::Vector2d& a) const {
  return -(step(s, a) - goal).norm();
}

bool PointGoalEnv::at_goal(const Eigen::Vector2d& s) const {
  return (s - goal).norm() < goal_tolerance;
}

Eigen::Vector2d PointGoalEnv::sample_start(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> u(-state_bound, state_bound);
  const double x = u(rng);
  const double y = u(rng);
  return {x, y};
}

Transition TransitionDataset::transition(int i) const {
  const Row& row = rows.at(i);
  return Transition{states.row(row.s), row.a, row.r, states.row(row.s_next),
                    row.done};
}

Eigen::VectorXd TransitionDataset::rewards() const {
  Eigen::VectorXd r(size());
  for (int i = 0; i < size(); ++i) r[i] = rows[i].r;
  return r;
}

TransitionDataset generate_behavior_dataset(const PointGoalEnv& env,
                                            int n_episodes, double mix,
                                            std::uint64_t seed,
                                            double noise_std) {
  if (!(mix >= 0.0 && mix <= 1.0)) {
    throw std::invalid_argument("generate_behavior_dataset: mix in [0, 1]");
  }
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution use_greedy(mix);
  std::uniform_real_distribution<double> ua(-env.action_bound, env.action_bound);
  std::normal_distribution<double> gauss(0.0, 1.0);

  TransitionDataset ds;
  std::vector<Eigen::Vector2d> states;
  for (int ep = 0; ep < n_episodes; ++ep) {
    Eigen::Vector2d s = env.sample_start(rng);
    states.push_back(s);
    int s_idx = static_cast<int>(states.size()) - 1;
    for (int step = 0; step < env.horizon; ++step) {
      Eigen::Vector2d a;
      if (use_greedy(rng)) {
        Eigen::Vector2d dir = env.goal - s;
        const double norm = dir.norm();
        if (norm > 1e-12) dir /= norm;
        a = dir + noise_std * Eigen::Vector2d(gauss(rng), gauss(rng));
      } else {
        const double ax = ua(rng);
        const double ay = ua(rng);
        a = {ax, ay};
      }
      a = env.clamp_action(a);
      const Eigen::Vector2d s_next = env.step(s, a);
      const double r = -(s_next - env.goal).norm();
      const bool done = env.at_goal(s_next);
      states.push_back(s_next);
      const int next_idx = static_cast<int>(states.size()) - 1;
      ds.rows.push_back({s_idx, next_idx, a, r, done});
      s = s_next;
      s_idx = next_idx;
      if (done) break;
    }
  }
  ds.states.resize(static_cast<Eigen::Index>(states.size()), 2);
  for (std::size_t i = 0; i < states.size(); ++i) {
    ds.states.row(static_cast<Eigen::Index>(i)) = states[i].transpose();
  }
  return ds;
}

double rollout_return_from(const PointGoalEnv& env, const PolicyFn& policy,
                           Eigen::Vector2d s0, std::mt19937_64& rng) {
  double total = 0.0;
  Eigen::Vector2d s = std::move(s0);
  for (int step = 0; step < env.horizon; ++step) {
    const Eigen::Vector2d a = env.clamp_action(policy(s, rng));
    total += env.reward(s, a);
    s = env.step(s, a);
    if (env.at_goal(s)) break;
  }
  return total;
}

PriorModel train_behavior_policy(const TransitionDataset& dataset,
                                 const NetworkSpec& spec,
                                 const Schedule& schedule,
                                 const PriorTrainOptions& opts,
                                 std::uint64_t seed, TrainingLog* log) {
  if (dataset.size() == 0) {
    throw std::invalid_argument("train_behavior_policy: empty dataset");
  }
  Eigen::MatrixXd actions(dataset.size(), 2);
  Eigen::MatrixXd conditions(dataset.size(), 2);
  for (int i = 0; i < dataset.size(); ++i) {
    actions.row(i) = dataset.rows[i].a.transpose();
    conditions.row(i) = dataset.states.row(dataset.rows[i].s);
  }
  return train_prior(actions, conditions, spec, schedule, opts, seed, log);
}

SupportActionSet generate_support_actions(const PriorModel& behavior,
                                          const Eigen::MatrixXd& states, int k,
                                          const SamplerConfig& config,
                                          double action_bound) {
  if (k < 1) throw std::invalid_argument("generate_support_actions: k >= 1");
  const Eigen::Index n = states.rows();
  Eigen::MatrixXd cond(n * k, states.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    cond.middleRows(i * k, k).rowwise() = states.row(i);
  }
  const auto eps = [&](const Eigen::MatrixXd& x, double t) {
    return behavior.epsilon(x, t, cond);
  };
  Eigen::MatrixXd all = solver2_sample_from(
      behavior.schedule, eps, config.steps,
      terminal_noise(static_cast<int>(n) * k, behavior.data_dim, config.seed));
  all = all.cwiseMax(-action_bound).cwiseMin(action_bound);

  SupportActionSet support;
  support.actions.reserve(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    support.actions.push_back(all.middleRows(i * k, k));
  }
  return support;
}

double QModel::value(const Eigen::Vector2d& s, const Eigen::Vector2d& a) const {
  return value_batch(s.transpose(), a.transpose())[0];
}

Eigen::VectorXd QModel::value_batch(const Eigen::MatrixXd& s,
                                    const Eigen::MatrixXd& a) const {
  const Eigen::MatrixXd x = concat_sa(s, a);
  Eigen::VectorXd v = forward_batch(online1, x).col(0);
  if (double_q) {
    v = v.cwiseMin(forward_batch(online2, x).col(0));
  }
  return v;
}

Eigen::VectorXd QModel::target_value_batch(const Eigen::MatrixXd& s,
                                           const Eigen::MatrixXd& a) const {
  const Eigen::MatrixXd x = concat_sa(s, a);
  Eigen::VectorXd v = forward_batch(target1, x).col(0);
  if (double_q) {
    v = v.cwiseMin(forward_batch(target2, x).col(0));
  }
  return v;
}

double softmax_q_target(const QModel& q, const Transition& transition,
                        const Eigen::MatrixXd& support_next, double gamma) {
  if (transition.done) return transition.r;
  if (support_next.rows() < 1) {
    throw std::invalid_argument("softmax_q_target: empty support");
  }
  const Eigen::MatrixXd s_rep =
      transition.s_next.transpose().replicate(support_next.rows(), 1);
  const Eigen::VectorXd v = q.target_value_batch(s_rep, support_next);
  const Eigen::VectorXd w = softmax(q.beta_q * v);
  return transition.r + gamma * w.dot(v);
}

QModel train_q(const TransitionDataset& dataset, const SupportActionSet& support,
               const QTrainOptions& opts, std::uint64_t seed, TrainingLog* log) {
  if (dataset.size() == 0) throw std::invalid_argument("train_q: empty dataset");
  if (support.actions.size() != static_cast<std::size_t>(dataset.states.rows())) {
    throw std::invalid_argument("train_q: support does not cover all states");
  }
  const int k = support.k();

  // Rescale rewards to unit standard deviation over the dataset.
  Eigen::VectorXd r = dataset.rewards();
  const double mean = r.mean();
  const double stdev =
      std::sqrt((r.array() - mean).square().sum() / std::max(1, dataset.size() - 1));
  const double scale = stdev > 1e-12 ? stdev : 1.0;
  r /= scale;

  NetworkSpec qspec;
  qspec.input_dim = 4;
  qspec.output_dim = 1;
  qspec.hidden = opts.hidden;
  qspec.activation = Activation::kReLU;
  qspec.time_embedding = TimeEmbedding::kNone;

  QModel q;
  q.beta_q = opts.beta_q;
  q.double_q = opts.double_q;
  q.reward_scale = scale;
  q.online1 = init_network(qspec, seed);
  q.online2 = init_network(qspec, mix_seed(seed, 1));
  q.target1 = q.online1;
  q.target2 = q.online2;

  OptimizerState opt1 = make_optimizer(q.online1, opts.learning_rate);
  OptimizerState opt2 = make_optimizer(q.online2, opts.learning_rate);
  std::mt19937_64 rng(mix_seed(seed, 2));
  std::uniform_int_distribution<int> pick(0, dataset.size() - 1);

  const int batch = std::min(opts.batch_size, dataset.size());
  Eigen::MatrixXd bs(batch, 2), ba(batch, 2);
  Eigen::MatrixXd ns(batch * k, 2), na(batch * k, 2);
  Eigen::VectorXd br(batch);
  std::vector<bool> bdone(batch);

  for (int step = 0; step < opts.steps; ++step) {
    for (int i = 0; i < batch; ++i) {
      const int idx = pick(rng);
      const TransitionDataset::Row& row = dataset.rows[idx];
      bs.row(i) = dataset.states.row(row.s);
      ba.row(i) = row.a.transpose();
      br[i] = r[idx];
      bdone[i] = row.done;
      ns.middleRows(i * k, k).rowwise() = dataset.states.row(row.s_next);
      na.middleRows(i * k, k) = support.actions[row.s_next];
    }

    // Bootstrapped targets from the target networks; no gradient flows back.
    const Eigen::VectorXd next_v = q.target_value_batch(ns, na);
    Eigen::VectorXd y(batch);
    for (int i = 0; i < batch; ++i) {
      if (bdone[i]) {
        y[i] = br[i];
        continue;
      }
      const Eigen::VectorXd seg = next_v.segment(i * k, k);
      const Eigen::VectorXd w = softmax(q.beta_q * seg);
      y[i] = br[i] + opts.gamma * w.dot(seg);
    }

    const Eigen::MatrixXd x = concat_sa(bs, ba);
    double loss_total = 0.0;
    const auto fit = [&](Network& net, OptimizerState& opt_state) {
      double loss = 0.0;
      const Eigen::VectorXd grad = grad_params(
          net,
          [&](LossTape& tape) {
            const Eigen::VectorXd pred = tape.eval(x).col(0);
            const Eigen::VectorXd resid = pred - y;
            tape.seed(0, 2.0 / batch * resid);
            return resid.squaredNorm() / batch;
          },
          &loss);
      adam_step(net, opt_state, grad);
      return loss;
    };
    loss_total += fit(q.online1, opt1);
    if (q.double_q) loss_total += fit(q.online2, opt2);
    if (!std::isfinite(loss_total)) {
      throw TrainingDivergence("train_q: non-finite loss");
    }
    polyak_update(q.target1, q.online1, opts.tau);
    if (q.double_q) polyak_update(q.target2, q.online2, opts.tau);
    if (log) log->loss_curve.push_back(loss_total);
  }
  return q;
}

double in_support_cep_loss(const Network& guidance_net, const Schedule& schedule,
                           const Eigen::Vector2d& state,
                           const Eigen::MatrixXd& support_actions,
                           const QModel& q, double beta, double t,
                           const Eigen::MatrixXd& noise) {
  EnergySpec adapter;
  adapter.beta = beta;
  adapter.energy = [&q, state](const Eigen::VectorXd& a) {
    return -q.value(state, a.head<2>());
  };
  return cep_self_norm_loss(guidance_net, schedule, support_actions, adapter, t,
                            noise, state.transpose());
}

GuidanceModel train_qgpo_guidance(const TransitionDataset& dataset,
                                  const SupportActionSet& support,
                                  const QModel& q, const Schedule& schedule,
                                  const QgpoGuidanceTrainOptions& opts,
                                  std::uint64_t seed, TrainingLog* log) {
  if (support.actions.empty()) {
    throw std::invalid_argument("train_qgpo_guidance: empty support");
  }
  const int k = support.k();
  const int groups = opts.states_per_step;
  const Eigen::Index n_states = dataset.states.rows();

  NetworkSpec spec;
  spec.input_dim = 2;
  spec.output_dim = 1;
  spec.hidden = opts.hidden;
  spec.activation = Activation::kSiLU;
  spec.time_embedding = TimeEmbedding::kSinusoidal;
  spec.condition_dim = 2;

  GuidanceModel model;
  model.method = GuidanceMethod::kCepSelfNorm;
  model.beta = opts.beta;
  model.schedule = schedule;
  model.net = init_network(spec, seed);

  OptimizerState opt = make_optimizer(model.net, opts.learning_rate);
  std::mt19937_64 rng(mix_seed(seed, 3));
  std::uniform_int_distribution<Eigen::Index> pick(0, n_states - 1);
  std::uniform_real_distribution<double> tdist(schedule.t_min(), schedule.t_max());
  std::normal_distribution<double> gauss(0.0, 1.0);

  const int rows = groups * k;
  Eigen::MatrixXd a0(rows, 2), cond(rows, 2), noise(rows, 2);
  Eigen::VectorXd bt(rows);
  Eigen::VectorXd all_labels(rows);

  for (int step = 0; step < opts.steps; ++step) {
    for (int g = 0; g < groups; ++g) {
      const Eigen::Index sidx = pick(rng);
      a0.middleRows(g * k, k) = support.actions[sidx];
      cond.middleRows(g * k, k).rowwise() = dataset.states.row(sidx);
      bt.segment(g * k, k).setConstant(tdist(rng));
      for (int i = 0; i < k; ++i) {
        noise(g * k + i, 0) = gauss(rng);
        noise(g * k + i, 1) = gauss(rng);
      }
    }
    // Soft labels from the action evaluation model.
    const Eigen::VectorXd qv = q.value_batch(cond, a0);
    for (int g = 0; g < groups; ++g) {
      all_labels.segment(g * k, k) = softmax(opts.beta * qv.segment(g * k, k));
    }
    const Eigen::MatrixXd a_t = schedule.perturb(a0, bt, noise);

    double loss_value = 0.0;
    const Eigen::VectorXd grad = grad_params(
        model.net,
        [&](LossTape& tape) {
          const Eigen::VectorXd f = tape.eval(a_t, bt, cond).col(0);
          double loss = 0.0;
          Eigen::VectorXd df(rows);
          for (int g = 0; g < groups; ++g) {
            const auto [value, dfg] = contrastive_loss_on_outputs(
                f.segment(g * k, k), all_labels.segment(g * k, k));
            loss += value / groups;
            df.segment(g * k, k) = dfg / groups;
          }
          tape.seed(0, df);
          return loss;
        },
        &loss_value);
    if (!std::isfinite(loss_value)) {
      throw TrainingDivergence("train_qgpo_guidance: non-finite loss");
    }
    adam_step(model.net, opt, grad);
    if (log) log->loss_curve.push_back(loss_value);
  }
  return model;
}

PolicyEvalResult evaluate_policy(const PointGoalEnv& env,
                                 const PriorModel& behavior,
                                 const GuidanceModel& guidance,
                                 double guidance_scale, int episodes,
                                 std::uint64_t seed, int sampler_steps) {
  if (episodes < 1) throw std::invalid_argument("evaluate_policy: episodes >= 1");

  std::vector<std::mt19937_64> rngs;
  rngs.reserve(episodes);
  std::vector<Eigen::Vector2d> state(episodes);
  std::vector<double> ret(episodes, 0.0);
  std::vector<bool> active(episodes, true);
  for (int e = 0; e < episodes; ++e) {
    rngs.emplace_back(mix_seed(seed, static_cast<std::uint64_t>(e)));
    state[e] = env.sample_start(rngs[e]);
  }

  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int step = 0; step < env.horizon; ++step) {
    std::vector<int> idx;
    for (int e = 0; e < episodes; ++e) {
      if (active[e]) idx.push_back(e);
    }
    if (idx.empty()) break;
    const int b = static_cast<int>(idx.size());

    Eigen::MatrixXd x(b, 2), cond(b, 2);
    for (int i = 0; i < b; ++i) {
      x(i, 0) = gauss(rngs[idx[i]]);
      x(i, 1) = gauss(rngs[idx[i]]);
      cond.row(i) = state[idx[i]].transpose();
    }
    const auto eps = [&](const Eigen::MatrixXd& xt, double t) {
      return guided_epsilon(behavior, guidance, xt, t, guidance_scale, cond);
    };
    Eigen::MatrixXd actions =
        solver2_sample_from(behavior.schedule, eps, sampler_steps, std::move(x));
    actions = actions.cwiseMax(-env.action_bound).cwiseMin(env.action_bound);

    for (int i = 0; i < b; ++i) {
      const int e = idx[i];
      const Eigen::Vector2d a = actions.row(i).transpose();
      ret[e] += env.reward(state[e], a);
      state[e] = env.step(state[e], a);
      if (env.at_goal(state[e])) active[e] = false;
    }
  }

  PolicyEvalResult result;
  result.episodes = episodes;
  result.returns = ret;
  double mean = 0.0;
  for (double v : ret) mean += v;
  mean /= episodes;
  double var = 0.0;
  for (double v : ret) var += (v - mean) * (v - mean);
  var /= std::max(1, episodes - 1);
  result.mean_return = mean;
  result.std_return = std::sqrt(var);
  result.std_error = result.std_return / std::sqrt(static_cast<double>(episodes));
  return result;
}

}  // namespace egdiff
