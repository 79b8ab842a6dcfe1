#include "egdiff/net.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace egdiff {

namespace {

using RowMajorMap = Eigen::Map<
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using MutRowMajorMap = Eigen::Map<
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

std::vector<std::pair<int, int>> layer_shapes(const NetworkSpec& spec) {
  std::vector<std::pair<int, int>> shapes;  // (out, in)
  int in = spec.embedded_input_dim();
  for (int h : spec.hidden) {
    shapes.emplace_back(h, in);
    in = h;
  }
  shapes.emplace_back(spec.output_dim, in);
  return shapes;
}

double silu(double z) { return z / (1.0 + std::exp(-z)); }

double silu_prime(double z) {
  const double s = 1.0 / (1.0 + std::exp(-z));
  return s * (1.0 + z * (1.0 - s));
}

void apply_activation(Eigen::MatrixXd& z, Activation act) {
  if (act == Activation::kSiLU) {
    z = z.unaryExpr([](double v) { return silu(v); });
  } else {
    z = z.cwiseMax(0.0);
  }
}

Eigen::MatrixXd activation_grad(const Eigen::MatrixXd& pre, Activation act) {
  if (act == Activation::kSiLU) {
    return pre.unaryExpr([](double v) { return silu_prime(v); });
  }
  return pre.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

}  // namespace

int NetworkSpec::embedded_input_dim() const {
  int d = input_dim;
  switch (time_embedding) {
    case TimeEmbedding::kNone:
      break;
    case TimeEmbedding::kConcatScalar:
      d += 1;
      break;
    case TimeEmbedding::kSinusoidal:
      d += time_embedding_dim;
      break;
  }
  return d + condition_dim;
}

std::size_t NetworkSpec::param_count() const {
  std::size_t n = 0;
  for (const auto& [out, in] : layer_shapes(*this)) {
    n += static_cast<std::size_t>(out) * in + out;
  }
  return n;
}

void NetworkSpec::validate() const {
  if (input_dim < 1 || output_dim < 1) {
    throw std::invalid_argument("NetworkSpec: input/output dims must be >= 1");
  }
  for (int h : hidden) {
    if (h < 1) throw std::invalid_argument("NetworkSpec: widths must be >= 1");
  }
  if (time_embedding == TimeEmbedding::kSinusoidal &&
      (time_embedding_dim < 2 || time_embedding_dim % 2 != 0)) {
    throw std::invalid_argument(
        "NetworkSpec: sinusoidal embedding dim must be even and >= 2");
  }
  if (condition_dim < 0) {
    throw std::invalid_argument("NetworkSpec: condition_dim must be >= 0");
  }
}

Network init_network(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  Network net{spec, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.param_count()))};
  std::mt19937_64 rng(seed);
  Eigen::Index offset = 0;
  for (const auto& [out, in] : layer_shapes(spec)) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(out) * in; ++k) {
      net.params[offset + k] = dist(rng);
    }
    offset += static_cast<Eigen::Index>(out) * in;
    offset += out;  // biases stay zero
  }
  return net;
}

Eigen::VectorXd sinusoidal_embedding(double t, int dim) {
  Eigen::VectorXd e(dim);
  const int half = dim / 2;
  for (int k = 0; k < half; ++k) {
    const double omega = std::numbers::pi * std::pow(2.0, k);
    e[2 * k] = std::sin(omega * t);
    e[2 * k + 1] = std::cos(omega * t);
  }
  return e;
}

namespace {

Eigen::MatrixXd stack_input(const NetworkSpec& spec, const Eigen::MatrixXd& x,
                            const Eigen::VectorXd& t, const Eigen::MatrixXd& c) {
  const Eigen::Index rows = x.rows();
  if (x.cols() != spec.input_dim) {
    throw std::invalid_argument("forward: x has wrong width");
  }
  const bool wants_time = spec.time_embedding != TimeEmbedding::kNone;
  if (wants_time && t.size() != rows && t.size() != 1) {
    throw std::invalid_argument("forward: time entries must match rows");
  }
  if (spec.condition_dim > 0 &&
      (c.cols() != spec.condition_dim || (c.rows() != rows && c.rows() != 1))) {
    throw std::invalid_argument("forward: condition has wrong shape");
  }

  Eigen::MatrixXd stacked(rows, spec.embedded_input_dim());
  stacked.leftCols(spec.input_dim) = x;
  Eigen::Index col = spec.input_dim;
  if (spec.time_embedding == TimeEmbedding::kConcatScalar) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      stacked(i, col) = t.size() == 1 ? t[0] : t[i];
    }
    col += 1;
  } else if (spec.time_embedding == TimeEmbedding::kSinusoidal) {
    if (t.size() == 1) {
      const Eigen::VectorXd e = sinusoidal_embedding(t[0], spec.time_embedding_dim);
      stacked.middleCols(col, spec.time_embedding_dim).rowwise() = e.transpose();
    } else {
      for (Eigen::Index i = 0; i < rows; ++i) {
        stacked.row(i).segment(col, spec.time_embedding_dim) =
            sinusoidal_embedding(t[i], spec.time_embedding_dim).transpose();
      }
    }
    col += spec.time_embedding_dim;
  }
  if (spec.condition_dim > 0) {
    if (c.rows() == 1) {
      stacked.middleCols(col, spec.condition_dim).rowwise() = c.row(0);
    } else {
      stacked.middleCols(col, spec.condition_dim) = c;
    }
  }
  return stacked;
}

}  // namespace

Eigen::MatrixXd forward_batch(const Network& net, const Eigen::MatrixXd& x,
                              const Eigen::VectorXd& t, const Eigen::MatrixXd& c,
                              ForwardTrace* trace) {
  const NetworkSpec& spec = net.spec;
  Eigen::MatrixXd h = stack_input(spec, x, t, c);
  if (trace) {
    trace->input = h;
    trace->pre.clear();
    trace->post.clear();
  }

  const auto shapes = layer_shapes(spec);
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    const auto [out, in] = shapes[l];
    RowMajorMap w(net.params.data() + offset, out, in);
    offset += static_cast<Eigen::Index>(out) * in;
    Eigen::Map<const Eigen::VectorXd> b(net.params.data() + offset, out);
    offset += out;

    Eigen::MatrixXd z = h * w.transpose();
    z.rowwise() += b.transpose();
    if (l + 1 < shapes.size()) {
      if (trace) trace->pre.push_back(z);
      apply_activation(z, spec.activation);
      if (trace) trace->post.push_back(z);
    }
    h = std::move(z);
  }
  if (!h.allFinite()) {
    throw std::runtime_error("forward: non-finite output");
  }
  return h;
}

Eigen::MatrixXd backward_batch(const Network& net, const ForwardTrace& trace,
                               const Eigen::MatrixXd& dy,
                               Eigen::VectorXd& param_grad) {
  const NetworkSpec& spec = net.spec;
  const auto shapes = layer_shapes(spec);
  if (param_grad.size() != net.params.size()) {
    throw std::invalid_argument("backward: param_grad has wrong size");
  }
  if (dy.cols() != spec.output_dim || dy.rows() != trace.input.rows()) {
    throw std::invalid_argument("backward: dy has wrong shape");
  }

  // Offsets of each layer's weight block in the flat vector.
  std::vector<Eigen::Index> offsets(shapes.size());
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    offsets[l] = offset;
    offset += static_cast<Eigen::Index>(shapes[l].first) * shapes[l].second +
              shapes[l].first;
  }

  Eigen::MatrixXd g = dy;
  for (std::size_t li = shapes.size(); li-- > 0;) {
    const auto [out, in] = shapes[li];
    RowMajorMap w(net.params.data() + offsets[li], out, in);
    MutRowMajorMap dw(param_grad.data() + offsets[li], out, in);
    Eigen::Map<Eigen::VectorXd> db(
        param_grad.data() + offsets[li] + static_cast<Eigen::Index>(out) * in, out);

    const Eigen::MatrixXd& layer_in =
        li == 0 ? trace.input : trace.post[li - 1];
    dw.noalias() += g.transpose() * layer_in;
    db.noalias() += g.colwise().sum().transpose();
    if (li == 0) {
      return (g * w).leftCols(spec.input_dim);
    }
    Eigen::MatrixXd upstream = g * w;
    g = upstream.cwiseProduct(activation_grad(trace.pre[li - 1], spec.activation));
  }
  return {};
}

Eigen::VectorXd forward(const Network& net, const Eigen::VectorXd& x,
                        std::optional<double> t, const Eigen::VectorXd& c) {
  Eigen::VectorXd tv;
  if (t) {
    tv.resize(1);
    tv[0] = *t;
  }
  Eigen::MatrixXd cm;
  if (c.size() > 0) cm = c.transpose();
  return forward_batch(net, x.transpose(), tv, cm).row(0);
}

Eigen::VectorXd grad_input(const Network& net, const Eigen::VectorXd& x,
                           std::optional<double> t, const Eigen::VectorXd& c) {
  Eigen::MatrixXd cm;
  if (c.size() > 0) cm = c.transpose();
  return grad_input_batch(net, x.transpose(), t.value_or(0.0), cm).row(0);
}

Eigen::MatrixXd grad_input_batch(const Network& net, const Eigen::MatrixXd& x,
                                 double t, const Eigen::MatrixXd& c) {
  if (net.spec.output_dim != 1) {
    throw std::invalid_argument("grad_input: network output must be scalar");
  }
  ForwardTrace trace;
  Eigen::VectorXd tv;
  if (net.spec.time_embedding != TimeEmbedding::kNone) {
    tv.resize(1);
    tv[0] = t;
  }
  forward_batch(net, x, tv, c, &trace);
  Eigen::VectorXd scratch = Eigen::VectorXd::Zero(net.params.size());
  return backward_batch(net, trace, Eigen::MatrixXd::Ones(x.rows(), 1), scratch);
}

const Eigen::MatrixXd& LossTape::eval(const Eigen::MatrixXd& x,
                                      const Eigen::VectorXd& t,
                                      const Eigen::MatrixXd& c) {
  Record rec;
  rec.out = forward_batch(*net_, x, t, c, &rec.trace);
  records_.push_back(std::move(rec));
  return records_.back().out;
}

void LossTape::seed(std::size_t eval_index, const Eigen::MatrixXd& dy) {
  if (eval_index >= records_.size()) {
    throw std::out_of_range("LossTape::seed: no such evaluation");
  }
  records_[eval_index].dy = dy;
  records_[eval_index].seeded = true;
}

Eigen::VectorXd LossTape::backward() const {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(net_->params.size());
  for (const Record& rec : records_) {
    if (!rec.seeded) continue;
    backward_batch(*net_, rec.trace, rec.dy, grad);
  }
  return grad;
}

Eigen::VectorXd grad_params(const Network& net,
                            const std::function<double(LossTape&)>& loss,
                            double* loss_value) {
  LossTape tape(net);
  const double value = loss(tape);
  if (!std::isfinite(value)) {
    throw std::runtime_error("grad_params: non-finite loss");
  }
  if (loss_value) *loss_value = value;
  return tape.backward();
}

OptimizerState make_optimizer(const Network& net, double learning_rate) {
  OptimizerState st;
  st.m = Eigen::VectorXd::Zero(net.params.size());
  st.v = Eigen::VectorXd::Zero(net.params.size());
  st.learning_rate = learning_rate;
  return st;
}

void adam_step(Network& net, OptimizerState& state, const Eigen::VectorXd& gradient) {
  if (gradient.size() != net.params.size() || state.m.size() != net.params.size()) {
    throw std::invalid_argument("adam_step: size mismatch");
  }
  if (!gradient.allFinite()) {
    throw std::runtime_error("adam_step: non-finite gradient");
  }
  state.step_count += 1;
  state.m = state.beta_m * state.m + (1.0 - state.beta_m) * gradient;
  state.v = state.beta_v * state.v +
            (1.0 - state.beta_v) * gradient.cwiseProduct(gradient);
  const double mc = 1.0 - std::pow(state.beta_m, static_cast<double>(state.step_count));
  const double vc = 1.0 - std::pow(state.beta_v, static_cast<double>(state.step_count));
  net.params -= state.learning_rate *
                ((state.m / mc).array() / ((state.v / vc).array().sqrt() + state.eps))
                    .matrix();
}

void polyak_update(Network& target, const Network& online, double tau) {
  if (target.params.size() != online.params.size()) {
    throw std::invalid_argument("polyak_update: network specs differ");
  }
  target.params = (1.0 - tau) * target.params + tau * online.params;
}

}  // namespace egdiff
