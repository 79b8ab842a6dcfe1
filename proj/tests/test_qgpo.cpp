#include <doctest.h>

#include <cmath>
#include <random>

#include "egdiff/qgpo.hpp"
#include "test_helpers.hpp"

using namespace egdiff;
using test::random_matrix;

namespace {

const Schedule kSched;

QModel tiny_q(std::uint64_t seed, double beta_q = 1.0, bool double_q = true) {
  QTrainOptions opts;
  opts.hidden = {16, 16};
  NetworkSpec spec;
  spec.input_dim = 4;
  spec.output_dim = 1;
  spec.hidden = opts.hidden;
  spec.activation = Activation::kReLU;
  QModel q;
  q.beta_q = beta_q;
  q.double_q = double_q;
  q.online1 = init_network(spec, seed);
  q.online2 = init_network(spec, seed + 1);
  q.target1 = q.online1;
  q.target2 = q.online2;
  return q;
}

}  // namespace

TEST_CASE("environment dynamics and rewards") {
  PointGoalEnv env;
  const Eigen::Vector2d s(3.9, 0.0);
  const Eigen::Vector2d a(1.0, 0.0);
  // clamped at the state boundary
  CHECK(env.step(s, a)[0] == doctest::Approx(4.0));
  // oversized actions are clipped before stepping
  CHECK(env.step({0.0, 0.0}, {10.0, 0.0})[0] == doctest::Approx(0.5));
  CHECK(env.reward({1.5, 2.0}, {1.0, 0.0}) == doctest::Approx(0.0));
  CHECK(env.at_goal({2.1, 2.1}));
  CHECK(!env.at_goal({1.0, 1.0}));
}

TEST_CASE("behavior dataset respects the dynamics and the mix") {
  PointGoalEnv env;
  const TransitionDataset ds = generate_behavior_dataset(env, 50, 0.5, 3);
  CHECK(ds.size() > 0);
  for (int i = 0; i < ds.size(); ++i) {
    const Transition tr = ds.transition(i);
    CHECK((env.step(tr.s, tr.a) - tr.s_next).norm() < 1e-12);
    CHECK(tr.r == doctest::Approx(-(tr.s_next - env.goal).norm()));
    CHECK(tr.a.cwiseAbs().maxCoeff() <= env.action_bound + 1e-12);
    CHECK(tr.done == env.at_goal(tr.s_next));
  }

  // determinism
  const TransitionDataset ds2 = generate_behavior_dataset(env, 50, 0.5, 3);
  CHECK(ds.states == ds2.states);

  CHECK_THROWS_AS(generate_behavior_dataset(env, 5, 1.5, 0),
                  std::invalid_argument);
}

TEST_CASE("mixture endpoints bracket the greedy policy") {
  PointGoalEnv env;
  // uniform-random baseline return, estimated by rollouts
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ua(-1.0, 1.0);
  const PolicyFn uniform_policy = [&ua](const Eigen::Vector2d&,
                                        std::mt19937_64& r) {
    return Eigen::Vector2d(ua(r), ua(r));
  };
  double uniform_mean = 0.0;
  const int episodes = 400;
  for (int e = 0; e < episodes; ++e) {
    uniform_mean +=
        rollout_return_from(env, uniform_policy, env.sample_start(rng), rng);
  }
  uniform_mean /= episodes;

  // the mix=0 dataset matches the uniform baseline
  const TransitionDataset ds = generate_behavior_dataset(env, 400, 0.0, 7);
  double ds_mean = 0.0;
  int count = 0;
  double episode_return = 0.0;
  for (int i = 0; i < ds.size(); ++i) {
    episode_return += ds.rows[i].r;
    const bool last = i + 1 == ds.size() ||
                      ds.rows[i + 1].s != ds.rows[i].s_next || ds.rows[i].done;
    if (last) {
      ds_mean += episode_return;
      episode_return = 0.0;
      ++count;
    }
  }
  ds_mean /= count;
  CHECK(std::abs(ds_mean - uniform_mean) < 2.0);

  // noiseless greedy from (-2, -2): hand-simulated deterministic rollout
  const PolicyFn greedy = [&env](const Eigen::Vector2d& s, std::mt19937_64&) {
    Eigen::Vector2d dir = env.goal - s;
    if (dir.norm() > 1e-12) dir /= dir.norm();
    return dir;
  };
  std::mt19937_64 greedy_rng(9);
  const double greedy_return =
      rollout_return_from(env, greedy, {-2.0, -2.0}, greedy_rng);
  // distance 4*sqrt(2) closes at 0.5 per step; returns sum the remaining
  // distances 4sqrt(2)-0.5k until the goal ball is reached
  double expect = 0.0;
  double dist = std::sqrt(32.0);
  while (dist - 0.5 >= env.goal_tolerance) {
    dist -= 0.5;
    expect -= dist;
  }
  dist -= 0.5;
  expect -= dist;  // final step lands inside the ball
  CHECK(greedy_return == doctest::Approx(expect).epsilon(1e-9));
  CHECK(greedy_return > ds_mean);
}

TEST_CASE("softmax targets") {
  const QModel q = tiny_q(11, 0.0);
  Transition tr;
  tr.s = {0.0, 0.0};
  tr.a = {0.1, 0.1};
  tr.r = -1.0;
  tr.s_next = {0.5, 0.5};
  tr.done = false;

  SUBCASE("a single candidate ignores beta_q") {
    Eigen::MatrixXd support(1, 2);
    support << 0.2, -0.3;
    const double v = q.target_value_batch(
        tr.s_next.transpose(), support.row(0))(0);
    CHECK(softmax_q_target(q, tr, support, 0.9) ==
          doctest::Approx(-1.0 + 0.9 * v).epsilon(1e-12));
  }

  SUBCASE("terminal transitions bootstrap nothing") {
    Transition done = tr;
    done.done = true;
    Eigen::MatrixXd support = Eigen::MatrixXd::Zero(4, 2);
    CHECK(softmax_q_target(q, done, support, 0.9) == -1.0);
  }

  SUBCASE("beta_q zero weights candidates uniformly") {
    // directly on a synthetic pair of values via a crafted support: use the
    // real net but verify against the uniform average of its own values
    Eigen::MatrixXd support(2, 2);
    support << 0.4, 0.0, -0.2, 0.6;
    const Eigen::MatrixXd s_rep = tr.s_next.transpose().replicate(2, 1);
    const Eigen::VectorXd v = q.target_value_batch(s_rep, support);
    CHECK(softmax_q_target(q, tr, support, 0.9) ==
          doctest::Approx(-1.0 + 0.9 * v.mean()).epsilon(1e-12));
  }

  SUBCASE("large beta_q approaches the max") {
    QModel sharp = tiny_q(11, 1000.0);
    Eigen::MatrixXd support(2, 2);
    support << 0.4, 0.0, -0.2, 0.6;
    const Eigen::MatrixXd s_rep = tr.s_next.transpose().replicate(2, 1);
    const Eigen::VectorXd v = sharp.target_value_batch(s_rep, support);
    CHECK(softmax_q_target(sharp, tr, support, 0.9) ==
          doctest::Approx(-1.0 + 0.9 * v.maxCoeff()).epsilon(1e-3));
  }
}

TEST_CASE("gamma zero reduces q-learning to reward regression"
          * doctest::timeout(300)) {
  PointGoalEnv env;
  const TransitionDataset ds = generate_behavior_dataset(env, 100, 0.5, 13);

  // any support works; gamma = 0 never looks at it
  SupportActionSet support;
  support.actions.assign(ds.states.rows(), Eigen::MatrixXd::Zero(4, 2));

  QTrainOptions opts;
  opts.steps = 3000;
  opts.batch_size = 256;
  opts.learning_rate = 1e-3;
  opts.gamma = 0.0;
  opts.hidden = {64, 64};
  TrainingLog log;
  const QModel q = train_q(ds, support, opts, 17, &log);
  CHECK(log.loss_curve.back() < log.loss_curve.front());

  double sq = 0.0;
  const int probe = std::min(400, ds.size());
  for (int i = 0; i < probe; ++i) {
    const Transition tr = ds.transition(i);
    const double pred = q.value(tr.s, tr.a);
    const double target = tr.r / q.reward_scale;
    sq += (pred - target) * (pred - target);
  }
  CHECK(std::sqrt(sq / probe) < 0.1);
}

TEST_CASE("target networks move only through polyak averaging") {
  PointGoalEnv env;
  const TransitionDataset ds = generate_behavior_dataset(env, 10, 0.5, 19);
  SupportActionSet support;
  support.actions.assign(ds.states.rows(), Eigen::MatrixXd::Zero(2, 2));

  QTrainOptions opts;
  opts.steps = 5;
  opts.batch_size = 32;
  opts.tau = 0.0;  // frozen targets
  opts.hidden = {16, 16};
  const QModel q = train_q(ds, support, opts, 23);

  // after training with tau = 0 the targets are still the initial copies
  const QModel fresh = tiny_q(23);
  (void)fresh;
  QTrainOptions one = opts;
  one.steps = 0;
  const QModel init_only = train_q(ds, support, one, 23);
  CHECK(q.target1.params == init_only.target1.params);
  CHECK(q.target2.params == init_only.target2.params);
  // while the online nets did move
  CHECK(q.online1.params != init_only.online1.params);
}

TEST_CASE("in-support loss equals the self-normalized loss via the adapter") {
  const QModel q = tiny_q(29);
  const Eigen::Vector2d state(0.5, -1.0);
  std::mt19937_64 rng(31);
  const Eigen::MatrixXd actions = 0.5 * random_matrix(6, 2, rng);
  const Eigen::MatrixXd noise = random_matrix(6, 2, rng);

  NetworkSpec gspec;
  gspec.input_dim = 2;
  gspec.output_dim = 1;
  gspec.hidden = {16};
  gspec.time_embedding = TimeEmbedding::kSinusoidal;
  gspec.condition_dim = 2;
  const Network f = init_network(gspec, 37);

  const double beta = 3.0;
  const double direct =
      in_support_cep_loss(f, kSched, state, actions, q, beta, 0.4, noise);

  EnergySpec adapter;
  adapter.beta = beta;
  adapter.energy = [&](const Eigen::VectorXd& a) {
    return -q.value(state, a.head<2>());
  };
  const double via_adapter = cep_self_norm_loss(f, kSched, actions, adapter, 0.4,
                                                noise, state.transpose());
  CHECK(direct == via_adapter);

  // equal Q values make the labels uniform: loss at f == 0 equals log K
  Network zero_f = f;
  zero_f.params.setZero();
  QModel flat = tiny_q(41);
  flat.online1.params.setZero();
  flat.online2.params.setZero();
  CHECK(in_support_cep_loss(zero_f, kSched, state, actions, flat, beta, 0.4,
                            noise) == doctest::Approx(std::log(6.0)));

  // shift invariance carries over
  Network shifted = f;
  shifted.params[shifted.params.size() - 1] += 3.7;
  CHECK(std::abs(in_support_cep_loss(shifted, kSched, state, actions, q, beta,
                                     0.4, noise) -
                 direct) < 1e-12);
}

TEST_CASE("support generation covers every state within the action box"
          * doctest::timeout(600)) {
  PointGoalEnv env;
  const TransitionDataset ds = generate_behavior_dataset(env, 5, 0.5, 43);

  NetworkSpec spec;
  spec.hidden = {32, 32};
  spec.time_embedding = TimeEmbedding::kSinusoidal;
  spec.time_embedding_dim = 8;
  PriorTrainOptions opts;
  opts.steps = 300;
  opts.batch_size = 64;
  const PriorModel behavior = train_behavior_policy(ds, spec, kSched, opts, 47);

  SamplerConfig cfg;
  cfg.steps = 15;
  cfg.seed = 53;
  const SupportActionSet support =
      generate_support_actions(behavior, ds.states, 4, cfg);
  CHECK(support.actions.size() == static_cast<std::size_t>(ds.states.rows()));
  CHECK(support.k() == 4);
  for (const Eigen::MatrixXd& acts : support.actions) {
    CHECK(acts.rows() == 4);
    CHECK(acts.cwiseAbs().maxCoeff() <= env.action_bound + 1e-12);
  }

  const SupportActionSet again =
      generate_support_actions(behavior, ds.states, 4, cfg);
  for (std::size_t i = 0; i < support.actions.size(); ++i) {
    CHECK(support.actions[i] == again.actions[i]);
  }
}

TEST_CASE("policy evaluation is deterministic given seeds"
          * doctest::timeout(600)) {
  PointGoalEnv env;
  const TransitionDataset ds = generate_behavior_dataset(env, 5, 0.8, 59);
  NetworkSpec spec;
  spec.hidden = {32, 32};
  spec.time_embedding = TimeEmbedding::kSinusoidal;
  spec.time_embedding_dim = 8;
  PriorTrainOptions opts;
  opts.steps = 300;
  opts.batch_size = 64;
  const PriorModel behavior = train_behavior_policy(ds, spec, kSched, opts, 61);

  const PolicyEvalResult a =
      evaluate_policy(env, behavior, GuidanceModel{}, 0.0, 8, 67, 10);
  const PolicyEvalResult b =
      evaluate_policy(env, behavior, GuidanceModel{}, 0.0, 8, 67, 10);
  CHECK(a.returns == b.returns);
  CHECK(a.episodes == 8);
  CHECK(a.std_error == doctest::Approx(a.std_return / std::sqrt(8.0)));
}
