#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace egdiff {

enum class Activation { kSiLU, kReLU };
enum class TimeEmbedding { kNone, kConcatScalar, kSinusoidal };

/// Fully connected network shape. The raw input x may be extended with a
/// time embedding and a raw condition vector before the first layer:
///   stacked input = [x, embed(t), c].
struct NetworkSpec {
  int input_dim = 0;
  int output_dim = 0;
  std::vector<int> hidden;
  Activation activation = Activation::kSiLU;
  TimeEmbedding time_embedding = TimeEmbedding::kNone;
  int time_embedding_dim = 16;  // sinusoidal only; must be even
  int condition_dim = 0;

  /// Width of the stacked input fed to the first layer.
  int embedded_input_dim() const;
  std::size_t param_count() const;
  void validate() const;
};

/// A network is its spec plus a flat parameter vector. Layout per layer:
/// weight matrix W (output x input, row-major) followed by the bias.
struct Network {
  NetworkSpec spec;
  Eigen::VectorXd params;
};

/// Deterministic initialization: weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)),
/// biases zero.
Network init_network(const NetworkSpec& spec, std::uint64_t seed);

/// Sinusoidal features [sin(2^k pi t), cos(2^k pi t)], bounded in [-1, 1].
Eigen::VectorXd sinusoidal_embedding(double t, int dim);

/// Cached activations from a forward pass, consumed by backward_batch.
struct ForwardTrace {
  Eigen::MatrixXd input;               // stacked input, rows are samples
  std::vector<Eigen::MatrixXd> pre;    // pre-activations per hidden layer
  std::vector<Eigen::MatrixXd> post;   // activations per hidden layer
};

/// Batched forward pass; rows of x are samples. t must have one entry per row
/// when the spec embeds time (a single entry broadcasts); c must be
/// rows x condition_dim when the spec has a condition.
Eigen::MatrixXd forward_batch(const Network& net, const Eigen::MatrixXd& x,
                              const Eigen::VectorXd& t = {},
                              const Eigen::MatrixXd& c = {},
                              ForwardTrace* trace = nullptr);

/// Reverse pass for a scalar loss with gradient dy w.r.t. the forward output.
/// Accumulates the parameter gradient into param_grad (size param_count) and
/// returns the loss gradient w.r.t. the raw input x (time/condition columns
/// are dropped).
Eigen::MatrixXd backward_batch(const Network& net, const ForwardTrace& trace,
                               const Eigen::MatrixXd& dy,
                               Eigen::VectorXd& param_grad);

/// Single-sample conveniences.
Eigen::VectorXd forward(const Network& net, const Eigen::VectorXd& x,
                        std::optional<double> t = {},
                        const Eigen::VectorXd& c = {});

/// Gradient of the scalar output w.r.t. x. Requires output_dim == 1.
Eigen::VectorXd grad_input(const Network& net, const Eigen::VectorXd& x,
                           std::optional<double> t = {},
                           const Eigen::VectorXd& c = {});

/// Batched grad_input: one row of x per sample, shared t.
Eigen::MatrixXd grad_input_batch(const Network& net, const Eigen::MatrixXd& x,
                                 double t, const Eigen::MatrixXd& c = {});

/// Records network evaluations made inside a loss closure so that the loss
/// gradient can be pulled back through every evaluation. The closure calls
/// eval() for each application of the network and seed() with the gradient of
/// its scalar loss w.r.t. that evaluation's output.
class LossTape {
 public:
  explicit LossTape(const Network& net) : net_(&net) {}

  const Eigen::MatrixXd& eval(const Eigen::MatrixXd& x,
                              const Eigen::VectorXd& t = {},
                              const Eigen::MatrixXd& c = {});
  void seed(std::size_t eval_index, const Eigen::MatrixXd& dy);
  std::size_t eval_count() const { return records_.size(); }

  /// Sum of pulled-back parameter gradients over all seeded evaluations.
  Eigen::VectorXd backward() const;

 private:
  struct Record {
    ForwardTrace trace;
    Eigen::MatrixXd out;
    Eigen::MatrixXd dy;
    bool seeded = false;
  };
  const Network* net_;
  std::vector<Record> records_;
};

/// Reverse-mode gradient of a scalar loss w.r.t. the parameters. The closure
/// must be deterministic; throws if the loss is non-finite.
Eigen::VectorXd grad_params(const Network& net,
                            const std::function<double(LossTape&)>& loss,
                            double* loss_value = nullptr);

/// Adaptive-moment optimizer state (bias-corrected update).
struct OptimizerState {
  std::size_t step_count = 0;
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  double learning_rate = 1e-3;
  double beta_m = 0.9;
  double beta_v = 0.999;
  double eps = 1e-8;
};

OptimizerState make_optimizer(const Network& net, double learning_rate);

/// One optimizer step in place. Throws on a non-finite gradient without
/// touching the parameters or the state.
void adam_step(Network& net, OptimizerState& state,
               const Eigen::VectorXd& gradient);

/// target <- (1 - tau) * target + tau * online, elementwise.
void polyak_update(Network& target, const Network& online, double tau);

}  // namespace egdiff
