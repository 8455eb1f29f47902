#include "spacedit/model.hpp"

#include "spacedit/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace spacedit {

void ModelConfig::validate() const {
  if (input_dim == 0) throw Error(ErrorCode::configuration, "input_dim must be positive");
  if (hidden_dims.empty()) throw Error(ErrorCode::configuration, "hidden_dims must be non-empty");
  for (auto h : hidden_dims) {
    if (h == 0) throw Error(ErrorCode::configuration, "hidden layer widths must be positive");
  }
  if (num_classes < 2) throw Error(ErrorCode::configuration, "num_classes must be at least 2");
}

template <typename T>
BasicClassifier<T>::BasicClassifier(ModelConfig config, std::vector<Layer<T>> layers)
    : config_(std::move(config)), layers_(std::move(layers)) {
  config_.validate();
  if (layers_.size() != config_.hidden_dims.size() + 1) {
    throw Error(ErrorCode::shape, "layer count does not match configuration");
  }
  std::size_t fan_in = config_.input_dim;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const std::size_t fan_out =
        i < config_.hidden_dims.size() ? config_.hidden_dims[i] : config_.num_classes;
    const auto& l = layers_[i];
    if (static_cast<std::size_t>(l.weights.rows()) != fan_in ||
        static_cast<std::size_t>(l.weights.cols()) != fan_out ||
        static_cast<std::size_t>(l.bias.size()) != fan_out) {
      throw Error(ErrorCode::shape, "layer " + std::to_string(i) + " has wrong shape");
    }
    fan_in = fan_out;
  }
}

template <typename T>
std::size_t BasicClassifier<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
  return n;
}

template <typename T>
T& BasicClassifier<T>::parameter(std::size_t flat_index) {
  for (auto& l : layers_) {
    if (flat_index < static_cast<std::size_t>(l.weights.size())) {
      return l.weights.data()[flat_index];
    }
    flat_index -= l.weights.size();
  }
  for (auto& l : layers_) {
    if (flat_index < static_cast<std::size_t>(l.bias.size())) return l.bias.data()[flat_index];
    flat_index -= l.bias.size();
  }
  throw Error(ErrorCode::input, "parameter index out of range");
}

template <typename T>
bool BasicClassifier<T>::operator==(const BasicClassifier& other) const {
  if (!(config_ == other.config_) || layers_.size() != other.layers_.size()) return false;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].weights != other.layers_[i].weights) return false;
    if (layers_[i].bias != other.layers_[i].bias) return false;
  }
  return true;
}

template <typename T>
BasicGradients<T> BasicGradients<T>::zeros_like(const BasicClassifier<T>& model) {
  BasicGradients g;
  for (std::size_t i = 0; i < model.num_layers(); ++i) {
    const auto& l = model.layer(i);
    g.weights.push_back(Matrix<T>::Zero(l.weights.rows(), l.weights.cols()));
    g.biases.push_back(RowVector<T>::Zero(l.bias.size()));
  }
  return g;
}

template <typename T>
BasicGradients<T>& BasicGradients<T>::operator+=(const BasicGradients& other) {
  if (other.weights.size() != weights.size()) throw Error(ErrorCode::shape, "gradient layer mismatch");
  for (std::size_t i = 0; i < weights.size(); ++i) {
    weights[i] += other.weights[i];
    biases[i] += other.biases[i];
  }
  return *this;
}

template <typename T>
T BasicGradients<T>::max_abs() const {
  T m = 0;
  for (const auto& w : weights) m = std::max(m, w.cwiseAbs().maxCoeff());
  for (const auto& b : biases) m = std::max(m, b.cwiseAbs().maxCoeff());
  return m;
}

template <typename T>
T BasicGradients<T>::at(std::size_t flat_index) const {
  for (const auto& w : weights) {
    if (flat_index < static_cast<std::size_t>(w.size())) return w.data()[flat_index];
    flat_index -= w.size();
  }
  for (const auto& b : biases) {
    if (flat_index < static_cast<std::size_t>(b.size())) return b.data()[flat_index];
    flat_index -= b.size();
  }
  throw Error(ErrorCode::input, "gradient index out of range");
}

template <typename T>
BasicAdamState<T> BasicAdamState<T>::create(const BasicClassifier<T>& model, double learning_rate) {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw Error(ErrorCode::configuration, "learning rate must be positive");
  }
  BasicAdamState s;
  s.learning_rate = learning_rate;
  s.first_moment = BasicGradients<T>::zeros_like(model);
  s.second_moment = BasicGradients<T>::zeros_like(model);
  return s;
}

ClassifierModel init_model(const ModelConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  std::vector<Layer<float>> layers;
  std::size_t fan_in = config.input_dim;
  const std::size_t count = config.hidden_dims.size() + 1;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t fan_out = i + 1 < count ? config.hidden_dims[i] : config.num_classes;
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Layer<float> l;
    l.weights.resize(fan_in, fan_out);
    for (Eigen::Index k = 0; k < l.weights.size(); ++k) {
      l.weights.data()[k] = static_cast<float>(dist(rng));
    }
    l.bias = RowVector<float>::Zero(fan_out);
    layers.push_back(std::move(l));
    fan_in = fan_out;
  }
  return ClassifierModel(config, std::move(layers));
}

template <typename T>
Matrix<T> softmax_rows(const Matrix<T>& logits) {
  Matrix<T> probs(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const T shift = logits.row(r).maxCoeff();
    auto e = (logits.row(r).array() - shift).exp();
    probs.row(r) = e / e.sum();
  }
  return probs;
}

template <typename T>
BasicForwardPass<T> forward(const BasicClassifier<T>& model, const Matrix<T>& inputs) {
  if (static_cast<std::size_t>(inputs.cols()) != model.config().input_dim) {
    throw Error(ErrorCode::shape, "input width " + std::to_string(inputs.cols()) +
                                      " does not match input_dim " +
                                      std::to_string(model.config().input_dim));
  }
  if (!inputs.allFinite()) throw Error(ErrorCode::input, "non-finite input value");

  BasicForwardPass<T> fp;
  fp.inputs = inputs;
  const std::size_t last = model.num_layers() - 1;
  const Matrix<T>* current = &fp.inputs;
  for (std::size_t i = 0; i < last; ++i) {
    const auto& l = model.layer(i);
    Matrix<T> z = (*current) * l.weights;
    z.rowwise() += l.bias;
    fp.hidden.push_back(z.cwiseMax(T(0)));
    current = &fp.hidden.back();
  }
  const auto& out = model.layer(last);
  fp.logits = (*current) * out.weights;
  fp.logits.rowwise() += out.bias;
  fp.probs = softmax_rows<T>(fp.logits);
  return fp;
}

template <typename T>
CrossEntropy<T> cross_entropy(const Matrix<T>& probs, std::span<const int> labels) {
  const auto n = probs.rows();
  if (static_cast<std::size_t>(n) != labels.size()) {
    throw Error(ErrorCode::shape, "label count does not match batch size");
  }
  if (n == 0) throw Error(ErrorCode::input, "empty batch");
  CrossEntropy<T> ce;
  ce.grad_logits = probs;
  double total = 0.0;
  for (Eigen::Index r = 0; r < n; ++r) {
    const int y = labels[r];
    if (y < 0 || y >= probs.cols()) {
      throw Error(ErrorCode::input, "label " + std::to_string(y) + " out of range");
    }
    total -= std::log(std::max(static_cast<double>(probs(r, y)), 1e-12));
    ce.grad_logits(r, y) -= T(1);
  }
  ce.loss = total / static_cast<double>(n);
  ce.grad_logits /= static_cast<T>(n);
  return ce;
}

template <typename T>
BasicGradients<T> backward(const BasicClassifier<T>& model, const BasicForwardPass<T>& fp,
                           const Matrix<T>& grad_logits, const Matrix<T>& grad_latents) {
  if (grad_logits.rows() != fp.logits.rows() || grad_logits.cols() != fp.logits.cols()) {
    throw Error(ErrorCode::shape, "grad_logits shape does not match logits");
  }
  const bool has_latent_grad = grad_latents.size() > 0;
  if (has_latent_grad && (grad_latents.rows() != fp.latents().rows() ||
                          grad_latents.cols() != fp.latents().cols())) {
    throw Error(ErrorCode::shape, "grad_latents shape does not match latents");
  }

  const std::size_t count = model.num_layers();
  BasicGradients<T> g;
  g.weights.resize(count);
  g.biases.resize(count);

  auto layer_input = [&](std::size_t i) -> const Matrix<T>& {
    return i == 0 ? fp.inputs : fp.hidden[i - 1];
  };

  Matrix<T> delta = grad_logits;
  for (std::size_t i = count; i-- > 0;) {
    const auto& l = model.layer(i);
    g.weights[i] = layer_input(i).transpose() * delta;
    g.biases[i] = delta.colwise().sum();
    if (i == 0) break;
    Matrix<T> upstream = delta * l.weights.transpose();
    if (i == count - 1 && has_latent_grad) upstream += grad_latents;
    const auto& act = fp.hidden[i - 1];
    delta = (act.array() > T(0)).select(upstream, T(0));
  }
  return g;
}

namespace {

template <typename T, typename Param, typename Grad>
void adam_update(Param& p, const Grad& g, Grad& m, Grad& v, const BasicAdamState<T>& s,
                 double bias1, double bias2) {
  const T b1 = static_cast<T>(s.beta1);
  const T b2 = static_cast<T>(s.beta2);
  const T step = static_cast<T>(s.learning_rate / bias1);
  const T root_bias2 = static_cast<T>(std::sqrt(bias2));
  const T eps = static_cast<T>(s.epsilon);
  m.array() = b1 * m.array() + (T(1) - b1) * g.array();
  v.array() = b2 * v.array() + (T(1) - b2) * g.array().square();
  p.array() -= step * m.array() / (v.array().sqrt() / root_bias2 + eps);
}

}  // namespace

template <typename T>
void adam_step(BasicClassifier<T>& model, const BasicGradients<T>& grads,
               BasicAdamState<T>& state) {
  const std::size_t count = model.num_layers();
  if (grads.weights.size() != count || state.first_moment.weights.size() != count) {
    throw Error(ErrorCode::shape, "gradient/optimizer layout does not match model");
  }
  for (std::size_t i = 0; i < count; ++i) {
    if (!grads.weights[i].allFinite()) {
      throw Error(ErrorCode::optimization,
                  "non-finite gradient in layer " + std::to_string(i) + " weights");
    }
    if (!grads.biases[i].allFinite()) {
      throw Error(ErrorCode::optimization,
                  "non-finite gradient in layer " + std::to_string(i) + " bias");
    }
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(state.beta1, t);
  const double bias2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < count; ++i) {
    auto& l = model.layer(i);
    adam_update(l.weights, grads.weights[i], state.first_moment.weights[i],
                state.second_moment.weights[i], state, bias1, bias2);
    adam_update(l.bias, grads.biases[i], state.first_moment.biases[i],
                state.second_moment.biases[i], state, bias1, bias2);
  }
}

std::vector<int> argmax_rows(const MatrixF& probs) {
  std::vector<int> out(probs.rows());
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    Eigen::Index best = 0;
    probs.row(r).maxCoeff(&best);
    out[r] = static_cast<int>(best);
  }
  return out;
}

#define SPACEDIT_INSTANTIATE(T)                                                               \
  template class BasicClassifier<T>;                                                          \
  template struct BasicGradients<T>;                                                          \
  template struct BasicAdamState<T>;                                                          \
  template Matrix<T> softmax_rows<T>(const Matrix<T>&);                                       \
  template BasicForwardPass<T> forward<T>(const BasicClassifier<T>&, const Matrix<T>&);       \
  template CrossEntropy<T> cross_entropy<T>(const Matrix<T>&, std::span<const int>);          \
  template BasicGradients<T> backward<T>(const BasicClassifier<T>&, const BasicForwardPass<T>&, \
                                         const Matrix<T>&, const Matrix<T>&);                 \
  template void adam_step<T>(BasicClassifier<T>&, const BasicGradients<T>&, BasicAdamState<T>&);

SPACEDIT_INSTANTIATE(float)
SPACEDIT_INSTANTIATE(double)

#undef SPACEDIT_INSTANTIATE

}  // namespace spacedit
