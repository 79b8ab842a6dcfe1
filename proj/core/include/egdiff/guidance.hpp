#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "egdiff/energy.hpp"
#include "egdiff/net.hpp"
#include "egdiff/prior.hpp"
#include "egdiff/schedule.hpp"

namespace egdiff {

enum class GuidanceMethod {
  kNone,
  kCep,
  kCepSelfNorm,
  kCepMultiT,
  kCepCond,
  kClassifier,
  kMse,
  kEmse,
  kDps,
};

std::string to_string(GuidanceMethod m);
GuidanceMethod guidance_method_from_string(const std::string& name);

/// Counts of exp-argument clamps applied by the numerically fragile losses.
struct NumericsCounters {
  long exp_clamps = 0;
};

/// A trained (or training-free) intermediate-energy model f(x, t[, c]).
/// Convention: f approximates the scaled intermediate energy of the target
/// p ~ q exp(-beta E); the guided score subtracts grad f. kDps carries the
/// data-space energy instead of a network; kNone carries nothing.
struct GuidanceModel {
  Network net;
  GuidanceMethod method = GuidanceMethod::kNone;
  double beta = 1.0;
  Schedule schedule;
  EnergySpec energy;    // kDps only
  int num_classes = 0;  // kClassifier / kCepCond

  bool has_net() const {
    return method != GuidanceMethod::kNone && method != GuidanceMethod::kDps;
  }

  /// grad_x f at a shared time for a batch (rows are samples). Conditioned
  /// methods take the condition rows (one row broadcasts). For kClassifier the
  /// gradient is of the per-class negative log-posterior, which includes the
  /// normalizer over classes. kDps must go through dps_energy_and_grad with a
  /// prior and is rejected here.
  Eigen::MatrixXd guidance_grad(const Eigen::MatrixXd& x_t, double t,
                                const Eigen::MatrixXd& condition = {}) const;
};

/// Cross entropy of the group softmax of -f against nonnegative soft labels:
/// value = -sum_i w_i log softmax_i(-f), plus its gradient w.r.t. f. The
/// building block shared by every contrastive loss.
std::pair<double, Eigen::VectorXd> contrastive_loss_on_outputs(
    const Eigen::VectorXd& f, const Eigen::VectorXd& labels);

/// Contrastive energy prediction over one contrast group at a shared time:
/// soft labels exp(-beta E(x0_i)) against the group softmax of -f. exp
/// arguments are clamped to [-30, 30]; clamps are counted.
double cep_loss(const Network& net, const Schedule& schedule,
                const Eigen::MatrixXd& x0, const EnergySpec& energy, double t,
                const Eigen::MatrixXd& noise,
                const Eigen::MatrixXd& condition = {},
                NumericsCounters* counters = nullptr);

/// As cep_loss with labels normalized within the group (they sum to one).
double cep_self_norm_loss(const Network& net, const Schedule& schedule,
                          const Eigen::MatrixXd& x0, const EnergySpec& energy,
                          double t, const Eigen::MatrixXd& noise,
                          const Eigen::MatrixXd& condition = {});

/// CEP with one time per group member.
double cep_multi_t_loss(const Network& net, const Schedule& schedule,
                        const Eigen::MatrixXd& x0, const EnergySpec& energy,
                        const Eigen::VectorXd& t, const Eigen::MatrixXd& noise,
                        const Eigen::MatrixXd& condition = {},
                        NumericsCounters* counters = nullptr);

/// Paired-data contrastive loss: for each pair i, the i-th data point is
/// scored against all group members under its own condition.
double cep_conditional_loss(const Network& net, const Schedule& schedule,
                            const Eigen::MatrixXd& x0,
                            const Eigen::MatrixXd& conditions, double t,
                            const Eigen::MatrixXd& noise);

/// Per-sample cross entropy over M class logits, logits_j = -f(x_t, c_j, t);
/// mean over the batch.
double classifier_loss(const Network& net, const Schedule& schedule,
                       const Eigen::MatrixXd& x0, const std::vector<int>& labels,
                       int num_classes, double t, const Eigen::MatrixXd& noise);

/// Squared-error regression of f onto the scaled data-space energy.
double mse_loss(const Network& net, const Schedule& schedule,
                const Eigen::MatrixXd& x0, const EnergySpec& energy,
                const Eigen::VectorXd& t, const Eigen::MatrixXd& noise);
double mse_loss(const Network& net, const Schedule& schedule,
                const Eigen::MatrixXd& x0, const EnergySpec& energy, double t,
                const Eigen::MatrixXd& noise);

/// Exponential-space regression; exp arguments are clamped to [-30, 30] and
/// clamps are counted.
double emse_loss(const Network& net, const Schedule& schedule,
                 const Eigen::MatrixXd& x0, const EnergySpec& energy,
                 const Eigen::VectorXd& t, const Eigen::MatrixXd& noise,
                 NumericsCounters* counters = nullptr);
double emse_loss(const Network& net, const Schedule& schedule,
                 const Eigen::MatrixXd& x0, const EnergySpec& energy, double t,
                 const Eigen::MatrixXd& noise,
                 NumericsCounters* counters = nullptr);

/// Training-free guidance at the data-prediction point
/// x_hat = (x_t - sigma eps(x_t, t)) / alpha: returns beta * E(x_hat) and its
/// gradient w.r.t. x_t, differentiating through both E and the noise model.
/// Near t = t_max, 1/alpha amplifies the prediction error of eps.
std::pair<double, Eigen::VectorXd> dps_energy_and_grad(
    const PriorModel& prior, const EnergySpec& energy,
    const Eigen::VectorXd& x_t, double t);

/// Batched DPS gradient (rows are samples, shared time).
Eigen::MatrixXd dps_guidance_batch(const PriorModel& prior,
                                   const EnergySpec& energy,
                                   const Eigen::MatrixXd& x_t, double t,
                                   const Eigen::MatrixXd& condition = {});

struct GuidanceTrainOptions {
  int steps = 3000;
  double learning_rate = 1e-3;
  double final_lr_fraction = 1.0;  // < 1 decays the rate linearly over training
  int group_size = 64;     // K, contrast group size
  int groups_per_step = 4; // CEP-family group count per gradient step
  int batch_size = 256;    // regression-family batch
};

/// Trains an energy-method guidance model (kCep, kCepSelfNorm, kCepMultiT,
/// kMse, kEmse) on a dataset. Deterministic given the seed.
GuidanceModel train_guidance(GuidanceMethod method, const Eigen::MatrixXd& data,
                             const EnergySpec& energy, const NetworkSpec& spec,
                             const Schedule& schedule,
                             const GuidanceTrainOptions& opts,
                             std::uint64_t seed, TrainingLog* log = nullptr);

/// Trains a condition-method guidance model (kCepCond, kClassifier) on
/// labeled data; conditions are one-hot encoded classes.
GuidanceModel train_conditional_guidance(
    GuidanceMethod method, const Eigen::MatrixXd& data,
    const std::vector<int>& labels, int num_classes, const NetworkSpec& spec,
    const Schedule& schedule, const GuidanceTrainOptions& opts,
    std::uint64_t seed, TrainingLog* log = nullptr);

/// One-hot row vector for a class id.
Eigen::RowVectorXd one_hot(int label, int num_classes);

}  // namespace egdiff
