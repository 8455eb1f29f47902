#include "doctest.h"

#include "spacedit/checkpoint.hpp"
#include "spacedit/error.hpp"
#include "spacedit/model.hpp"

#include <cmath>
#include <filesystem>
#include <random>

using namespace spacedit;

namespace {

ModelConfig small_config(std::uint64_t seed) {
  ModelConfig c;
  c.input_dim = 5;
  c.hidden_dims = {7, 4};
  c.num_classes = 3;
  c.seed = seed;
  return c;
}

MatrixD random_inputs(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  MatrixD x(rows, cols);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
  return x;
}

double ce_loss(const BasicClassifier<double>& m, const MatrixD& x, const std::vector<int>& y) {
  return cross_entropy(forward(m, x).probs, y).loss;
}

}  // namespace

TEST_CASE("softmax rows are stable and sum to one") {
  MatrixF logits(2, 3);
  logits << 1000.f, 1000.f, 1000.f, -3.f, 0.f, 2.f;
  const auto p = softmax_rows(logits);
  for (Eigen::Index r = 0; r < 2; ++r) CHECK(p.row(r).sum() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(p(0, 0) == doctest::Approx(1.0 / 3.0));
  CHECK(p(1, 2) > p(1, 1));
}

TEST_CASE("cross entropy matches hand summation") {
  MatrixD probs(2, 2);
  probs << 0.5, 0.5, 0.75, 0.25;
  const std::vector<int> labels{0, 1};
  const auto ce = cross_entropy(probs, labels);
  CHECK(ce.loss == doctest::Approx((std::log(2.0) + std::log(4.0)) / 2.0));
  CHECK(ce.grad_logits(0, 0) == doctest::Approx((0.5 - 1.0) / 2.0));
  CHECK(ce.grad_logits(1, 1) == doctest::Approx((0.25 - 1.0) / 2.0));
}

TEST_CASE("cross entropy rejects labels out of range") {
  MatrixD probs = MatrixD::Constant(1, 2, 0.5);
  const std::vector<int> labels{2};
  CHECK_THROWS_AS(cross_entropy(probs, labels), Error);
}

TEST_CASE("forward pass shapes and latent layer") {
  const auto model = init_model(small_config(3));
  const auto fp = forward(model, random_inputs(6, 5, 1).cast<float>().eval());
  CHECK(fp.latents().rows() == 6);
  CHECK(fp.latents().cols() == 4);
  CHECK(fp.probs.cols() == 3);
  CHECK((fp.latents().array() >= 0.f).all());
  CHECK_THROWS_AS(forward(model, MatrixF::Zero(2, 4).eval()), Error);
}

TEST_CASE("initialisation is deterministic per seed") {
  CHECK(init_model(small_config(11)) == init_model(small_config(11)));
  CHECK_FALSE(init_model(small_config(11)) == init_model(small_config(12)));
}

TEST_CASE("config validation") {
  ModelConfig c;
  c.hidden_dims.clear();
  CHECK_THROWS_AS(c.validate(), Error);
  c = ModelConfig{};
  c.num_classes = 1;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("zero upstream gradients give zero parameter gradients") {
  const auto model = init_model(small_config(1)).cast<double>();
  const auto fp = forward(model, random_inputs(4, 5, 2));
  const auto g = backward(model, fp, MatrixD::Zero(4, 3).eval(), MatrixD::Zero(4, 4).eval());
  CHECK(g.max_abs() == 0.0);
}

TEST_CASE("backward matches central differences for cross entropy") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto model = init_model(small_config(seed)).cast<double>();
    const MatrixD x = random_inputs(8, 5, seed + 10);
    const std::vector<int> y{0, 1, 2, 0, 1, 2, 1, 0};
    const auto fp = forward(model, x);
    const auto grads = backward(model, fp, cross_entropy(fp.probs, y).grad_logits, MatrixD());
    double worst = 0.0;
    for (std::size_t i = 0; i < model.parameter_count(); ++i) {
      const double saved = model.parameter(i);
      const double h = 1e-6;
      model.parameter(i) = saved + h;
      const double up = ce_loss(model, x, y);
      model.parameter(i) = saved - h;
      const double down = ce_loss(model, x, y);
      model.parameter(i) = saved;
      const double fd = (up - down) / (2 * h);
      const double an = grads.at(i);
      worst = std::max(worst, std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6}));
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("latent gradient enters at the last hidden layer") {
  auto model = init_model(small_config(5)).cast<double>();
  const MatrixD x = random_inputs(3, 5, 7);
  const MatrixD direction = random_inputs(3, 4, 8);
  auto objective = [&](const BasicClassifier<double>& m) {
    return (forward(m, x).latents().array() * direction.array()).sum();
  };
  const auto fp = forward(model, x);
  const auto grads = backward(model, fp, MatrixD::Zero(3, 3).eval(), direction);
  for (std::size_t i = 0; i < model.parameter_count(); i += 3) {
    const double saved = model.parameter(i);
    model.parameter(i) = saved + 1e-6;
    const double up = objective(model);
    model.parameter(i) = saved - 1e-6;
    const double down = objective(model);
    model.parameter(i) = saved;
    CHECK(grads.at(i) == doctest::Approx((up - down) / 2e-6).epsilon(1e-5));
  }
}

TEST_CASE("first Adam step moves each parameter by the learning rate") {
  auto model = init_model(small_config(2));
  const auto before = model;
  auto grads = Gradients::zeros_like(model);
  grads.weights[0](0, 0) = 3.0f;
  grads.biases[1](0, 1) = -0.5f;
  auto adam = AdamState::create(model, 0.01);
  adam_step(model, grads, adam);
  // m̂ = g and v̂ = g², so the step is lr·g/(|g| + ε).
  CHECK(model.layer(0).weights(0, 0) == doctest::Approx(before.layer(0).weights(0, 0) - 0.01).epsilon(1e-5));
  CHECK(model.layer(1).bias(0, 1) == doctest::Approx(before.layer(1).bias(0, 1) + 0.01).epsilon(1e-5));
  CHECK(model.layer(0).weights(1, 1) == before.layer(0).weights(1, 1));
}

TEST_CASE("Adam refuses non-finite gradients") {
  auto model = init_model(small_config(2));
  auto grads = Gradients::zeros_like(model);
  grads.weights[1](0, 0) = std::nanf("");
  auto adam = AdamState::create(model, 0.01);
  CHECK_THROWS_AS(adam_step(model, grads, adam), Error);
}

TEST_CASE("checkpoint round trip is bit exact") {
  const auto model = init_model(small_config(9));
  const auto bytes = encode_checkpoint(model);
  CHECK(decode_checkpoint(bytes, 9) == model);
  const auto path = std::filesystem::temp_directory_path() / "spacedit_ckpt_test.bin";
  write_checkpoint(model, path);
  CHECK(read_checkpoint(path, 9) == model);
  std::filesystem::remove(path);
}

TEST_CASE("corrupted checkpoints are rejected") {
  const auto bytes = encode_checkpoint(init_model(small_config(9)));
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(bad_magic), Error);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  CHECK_THROWS_AS(decode_checkpoint(truncated), Error);
  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_THROWS_AS(decode_checkpoint(trailing), Error);
  CHECK(fnv1a64(bytes) != fnv1a64(trailing));
}
