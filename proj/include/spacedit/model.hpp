#pragma once

// Feedforward classifier whose last hidden layer is the editable latent space.
// Parameters are stored as float; every routine is also instantiated for
// double so that gradient checks can run without float32 round-off.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace spacedit {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

using MatrixF = Matrix<float>;
using MatrixD = Matrix<double>;

enum class Activation { relu };

struct ModelConfig {
  std::size_t input_dim = 16;
  std::vector<std::size_t> hidden_dims{64, 32};
  std::size_t num_classes = 4;
  Activation activation = Activation::relu;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t latent_dim() const { return hidden_dims.back(); }
  bool operator==(const ModelConfig&) const = default;
};

/// weights are fan_in x fan_out so a batch propagates as `X * W + b`.
template <typename T>
struct Layer {
  Matrix<T> weights;
  RowVector<T> bias;
};

template <typename T>
class BasicClassifier {
 public:
  BasicClassifier() = default;
  BasicClassifier(ModelConfig config, std::vector<Layer<T>> layers);

  const ModelConfig& config() const { return config_; }
  std::size_t num_layers() const { return layers_.size(); }
  const Layer<T>& layer(std::size_t i) const { return layers_.at(i); }
  Layer<T>& layer(std::size_t i) { return layers_.at(i); }
  std::size_t parameter_count() const;

  // Flat view used by gradient checks: all weights (layer order, row-major),
  // then all biases.
  T& parameter(std::size_t flat_index);

  template <typename U>
  BasicClassifier<U> cast() const {
    std::vector<Layer<U>> out;
    out.reserve(layers_.size());
    for (const auto& l : layers_) {
      out.push_back({l.weights.template cast<U>(), l.bias.template cast<U>()});
    }
    return BasicClassifier<U>(config_, std::move(out));
  }

  bool operator==(const BasicClassifier& other) const;

 private:
  ModelConfig config_;
  std::vector<Layer<T>> layers_;
};

using ClassifierModel = BasicClassifier<float>;

template <typename T>
struct BasicForwardPass {
  Matrix<T> inputs;
  // Post-activation output of every hidden layer; the last one is the latent.
  std::vector<Matrix<T>> hidden;
  Matrix<T> logits;
  Matrix<T> probs;

  const Matrix<T>& latents() const { return hidden.back(); }
};

template <typename T>
struct BasicGradients {
  std::vector<Matrix<T>> weights;
  std::vector<RowVector<T>> biases;

  static BasicGradients zeros_like(const BasicClassifier<T>& model);
  BasicGradients& operator+=(const BasicGradients& other);
  T max_abs() const;
  T at(std::size_t flat_index) const;
};

template <typename T>
struct CrossEntropy {
  double loss = 0.0;
  Matrix<T> grad_logits;
};

/// Adam moments mirror the parameter layout.
template <typename T>
struct BasicAdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  BasicGradients<T> first_moment;
  BasicGradients<T> second_moment;

  static BasicAdamState create(const BasicClassifier<T>& model, double learning_rate);
};

using ForwardPass = BasicForwardPass<float>;
using Gradients = BasicGradients<float>;
using AdamState = BasicAdamState<float>;

struct LossBreakdown {
  double loss_cls = 0.0;
  double loss_dis = 0.0;
  double total = 0.0;
  double w_cls = 1.0;
  double w_dis = 0.0;
};

ClassifierModel init_model(const ModelConfig& config);

template <typename T>
Matrix<T> softmax_rows(const Matrix<T>& logits);

template <typename T>
BasicForwardPass<T> forward(const BasicClassifier<T>& model, const Matrix<T>& inputs);

template <typename T>
CrossEntropy<T> cross_entropy(const Matrix<T>& probs, std::span<const int> labels);

/// Exact gradient of sum(grad_logits .* logits) + sum(grad_latents .* latents).
/// An empty grad_latents matrix means no latent-path contribution.
template <typename T>
BasicGradients<T> backward(const BasicClassifier<T>& model, const BasicForwardPass<T>& fp,
                           const Matrix<T>& grad_logits, const Matrix<T>& grad_latents);

template <typename T>
void adam_step(BasicClassifier<T>& model, const BasicGradients<T>& grads,
               BasicAdamState<T>& state);

std::vector<int> argmax_rows(const MatrixF& probs);

}  // namespace spacedit
