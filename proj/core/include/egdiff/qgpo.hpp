#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "egdiff/guidance.hpp"
#include "egdiff/net.hpp"
#include "egdiff/prior.hpp"
#include "egdiff/sampler.hpp"
#include "egdiff/schedule.hpp"

namespace egdiff {

/// Deterministic point-to-goal task on the plane: states in [-4, 4]^2,
/// actions in [-1, 1]^2, dynamics s' = clamp(s + 0.5 a), reward -||s' - goal||.
/// Episodes end when the goal is reached (within tolerance) or at the horizon.
struct PointGoalEnv {
  Eigen::Vector2d goal{2.0, 2.0};
  double step_size = 0.5;
  int horizon = 20;
  double discount = 0.95;
  double state_bound = 4.0;
  double action_bound = 1.0;
  double goal_tolerance = 0.25;

  Eigen::Vector2d clamp_state(const Eigen::Vector2d& s) const;
  Eigen::Vector2d clamp_action(const Eigen::Vector2d& a) const;
  Eigen::Vector2d step(const Eigen::Vector2d& s, const Eigen::Vector2d& a) const;
  double reward(const Eigen::Vector2d& s, const Eigen::Vector2d& a) const;
  bool at_goal(const Eigen::Vector2d& s) const;
  Eigen::Vector2d sample_start(std::mt19937_64& rng) const;
};

struct Transition {
  Eigen::Vector2d s;
  Eigen::Vector2d a;
  double r = 0.0;
  Eigen::Vector2d s_next;
  bool done = false;
};

/// Offline tuples plus the visited-state table used for support generation;
/// transitions reference states by index so s' of one step and s of the next
/// share an entry.
struct TransitionDataset {
  Eigen::MatrixXd states;  // V x 2
  struct Row {
    int s = 0;
    int s_next = 0;
    Eigen::Vector2d a;
    double r = 0.0;
    bool done = false;
  };
  std::vector<Row> rows;

  int size() const { return static_cast<int>(rows.size()); }
  Transition transition(int i) const;
  Eigen::VectorXd rewards() const;
};

/// K behavior-policy actions per dataset state, aligned with
/// TransitionDataset::states rows; all actions are clipped to the action box.
struct SupportActionSet {
  std::vector<Eigen::MatrixXd> actions;  // per state: K x 2
  int k() const {
    return actions.empty() ? 0 : static_cast<int>(actions.front().rows());
  }
};

/// Twin action-evaluation networks with their slow-moving targets. Q nets map
/// the concatenated (s, a) to a scalar; with double_q, values are min over
/// the pair.
struct QModel {
  Network online1, online2;
  Network target1, target2;
  double beta_q = 1.0;
  bool double_q = true;
  double reward_scale = 1.0;  // dataset rewards were divided by this

  double value(const Eigen::Vector2d& s, const Eigen::Vector2d& a) const;
  Eigen::VectorXd value_batch(const Eigen::MatrixXd& s,
                              const Eigen::MatrixXd& a) const;
  Eigen::VectorXd target_value_batch(const Eigen::MatrixXd& s,
                                     const Eigen::MatrixXd& a) const;
};

/// Behavior policy: with probability mix a noisy step toward the goal,
/// a = clip(unit(goal - s) + N(0, noise_std^2 I)); otherwise uniform in the
/// action box. Deterministic given the seed.
TransitionDataset generate_behavior_dataset(const PointGoalEnv& env,
                                            int n_episodes, double mix,
                                            std::uint64_t seed,
                                            double noise_std = 0.3);

using PolicyFn =
    std::function<Eigen::Vector2d(const Eigen::Vector2d& s, std::mt19937_64& rng)>;

/// Undiscounted return of one episode from a given start state.
double rollout_return_from(const PointGoalEnv& env, const PolicyFn& policy,
                           Eigen::Vector2d s0, std::mt19937_64& rng);

/// Trains a state-conditioned noise-prediction model of the behavior policy.
PriorModel train_behavior_policy(const TransitionDataset& dataset,
                                 const NetworkSpec& spec,
                                 const Schedule& schedule,
                                 const PriorTrainOptions& opts,
                                 std::uint64_t seed, TrainingLog* log = nullptr);

/// K actions per state sampled from the behavior model, clipped to the box.
SupportActionSet generate_support_actions(const PriorModel& behavior,
                                          const Eigen::MatrixXd& states, int k,
                                          const SamplerConfig& config,
                                          double action_bound = 1.0);

/// Bellman target with the in-support softmax value estimate:
///   r + gamma * sum_j softmax_j(beta_q Q_target(s', a'_j)) Q_target(s', a'_j);
/// terminal transitions use r alone. Uses target networks only.
double softmax_q_target(const QModel& q, const Transition& transition,
                        const Eigen::MatrixXd& support_next, double gamma);

struct QTrainOptions {
  int steps = 8000;
  int batch_size = 128;
  double learning_rate = 3e-4;
  double tau = 0.005;       // target-network averaging rate
  double gamma = 0.95;
  double beta_q = 1.0;
  bool double_q = true;
  std::vector<int> hidden{128, 128, 128};
};

/// Fitted Q iteration against softmax_q_target with soft target updates.
/// Dataset rewards are rescaled to unit standard deviation before training;
/// the scale is recorded on the returned model.
QModel train_q(const TransitionDataset& dataset, const SupportActionSet& support,
               const QTrainOptions& opts, std::uint64_t seed,
               TrainingLog* log = nullptr);

/// Self-normalized contrastive loss over the K support actions of one state,
/// with labels softmax(beta Q(s, a_hat_i)). Exactly the energy-method loss
/// under the adapter E = -Q.
double in_support_cep_loss(const Network& guidance_net, const Schedule& schedule,
                           const Eigen::Vector2d& state,
                           const Eigen::MatrixXd& support_actions,
                           const QModel& q, double beta, double t,
                           const Eigen::MatrixXd& noise);

struct QgpoGuidanceTrainOptions {
  int steps = 6000;
  double learning_rate = 1e-3;
  int states_per_step = 8;
  double beta = 3.0;
  std::vector<int> hidden{128, 128, 128};
};

/// Trains the state-conditioned intermediate-energy model over support
/// actions; the returned model's gradient steers sampling toward high-Q
/// actions when used with the guided sampler.
GuidanceModel train_qgpo_guidance(const TransitionDataset& dataset,
                                  const SupportActionSet& support,
                                  const QModel& q, const Schedule& schedule,
                                  const QgpoGuidanceTrainOptions& opts,
                                  std::uint64_t seed, TrainingLog* log = nullptr);

struct PolicyEvalResult {
  double mean_return = 0.0;
  double std_return = 0.0;
  double std_error = 0.0;
  int episodes = 0;
  std::vector<double> returns;
};

/// Evaluates the guided policy: at each decision step one action is sampled
/// with the second-order solver (15 steps) and clipped to the box. Episodes
/// use per-episode seeds and run in lockstep so the per-step network
/// evaluations batch across episodes.
PolicyEvalResult evaluate_policy(const PointGoalEnv& env,
                                 const PriorModel& behavior,
                                 const GuidanceModel& guidance,
                                 double guidance_scale, int episodes,
                                 std::uint64_t seed, int sampler_steps = 15);

}  // namespace egdiff
