#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "fullmatch/losses.hpp"
#include "fullmatch/model.hpp"

using namespace fullmatch;

namespace {

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(r, c);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = g(rng);
  return m;
}

// Plain triple loops, no Eigen products.
Matrix naive_forward(const ModelParameters& params, const Matrix& x) {
  Matrix a = x;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    Matrix z(a.rows(), layer.weight.rows());
    for (Eigen::Index n = 0; n < a.rows(); ++n) {
      for (Eigen::Index o = 0; o < layer.weight.rows(); ++o) {
        double s = layer.bias(o);
        for (Eigen::Index i = 0; i < layer.weight.cols(); ++i) s += layer.weight(o, i) * a(n, i);
        z(n, o) = (l + 1 < params.layers.size()) ? std::max(0.0, s) : s;
      }
    }
    a = z;
  }
  return a;
}

}  // namespace

TEST_CASE("init_model") {
  const std::vector<std::size_t> dims{2, 3};
  CHECK(init_model(dims, 7) == init_model(dims, 7));
  CHECK_FALSE(init_model(dims, 7) == init_model(dims, 8));
  const auto p = init_model(std::vector<std::size_t>{5, 8, 3}, 1);
  CHECK(p.layer_dims() == std::vector<std::size_t>{5, 8, 3});
  CHECK(p.parameter_count() == 5 * 8 + 8 + 8 * 3 + 3);
  for (const auto& l : p.layers) CHECK(l.bias.isZero(0.0));
  CHECK_THROWS_AS(init_model(std::vector<std::size_t>{4}, 1), InvalidArgument);
  CHECK_THROWS_AS(init_model(std::vector<std::size_t>{4, 0, 2}, 1), InvalidArgument);
}

TEST_CASE("init_model weight variance is 1/fan_in") {
  const std::size_t fan_in = 100;
  const auto p = init_model(std::vector<std::size_t>{fan_in, 100}, 3);
  const Matrix& w = p.layers[0].weight;
  const double mean = w.mean();
  const double var = (w.array() - mean).square().sum() / static_cast<double>(w.size() - 1);
  CHECK(std::abs(var * fan_in - 1.0) < 0.1);
  CHECK(std::abs(mean) < 0.01);
}

TEST_CASE("forward examples") {
  auto p = init_model(std::vector<std::size_t>{3, 4, 5}, 2);
  for (auto& l : p.layers) {
    l.weight.setZero();
    l.bias.setZero();
  }
  const std::vector<double> x{1.0, -2.0, 0.5};
  const auto z = forward(p, x);
  for (double v : z) CHECK(v == 0.0);
  const auto probs = softmax(z);
  for (double v : probs) CHECK(v == doctest::Approx(0.2));

  auto lin = init_model(std::vector<std::size_t>{4, 3}, 5);
  lin.layers[0].bias << 0.1, -0.2, 0.3;
  for (std::size_t j = 0; j < 4; ++j) {
    std::vector<double> e(4, 0.0);
    e[j] = 1.0;
    const auto out = forward(lin, e);
    for (Eigen::Index o = 0; o < 3; ++o) {
      CHECK(out[static_cast<std::size_t>(o)] ==
            lin.layers[0].weight(o, static_cast<Eigen::Index>(j)) + lin.layers[0].bias(o));
    }
  }
  CHECK_THROWS_AS(forward(lin, std::vector<double>{1.0, 2.0}), InvalidArgument);
  CHECK_THROWS_AS(forward(lin, Matrix::Zero(2, 5)), InvalidArgument);
}

TEST_CASE("forward matches a naive loop oracle") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<std::size_t> dims{static_cast<std::size_t>(1 + trial % 5), 7, static_cast<std::size_t>(2 + trial % 4),
                                        3};
    const auto p = init_model(dims, static_cast<std::uint64_t>(trial));
    const Matrix x = random_matrix(rng, 6, static_cast<Eigen::Index>(dims[0]));
    const Matrix fast = forward(p, x);
    const Matrix slow = naive_forward(p, x);
    CHECK((fast - slow).cwiseAbs().maxCoeff() < 1e-12);
    for (Eigen::Index n = 0; n < x.rows(); ++n) {
      const auto single = forward(p, row_span(x, n));
      for (Eigen::Index c = 0; c < fast.cols(); ++c) {
        CHECK(std::abs(single[static_cast<std::size_t>(c)] - fast(n, c)) < 1e-12);
      }
    }
    CHECK(forward(p, x) == fast);
  }
}

TEST_CASE("backward examples") {
  auto p = init_model(std::vector<std::size_t>{3, 6, 2}, 4);
  std::mt19937_64 rng(1);
  const Matrix x = random_matrix(rng, 5, 3);
  ForwardCache cache;
  forward(p, x, &cache);
  const auto zero = backward(p, cache, Matrix::Zero(5, 2));
  CHECK(zero.congruent_with(p));
  for (const auto& l : zero.layers) {
    CHECK(l.weight.isZero(0.0));
    CHECK(l.bias.isZero(0.0));
  }
  CHECK_THROWS_AS(backward(p, cache, Matrix::Zero(4, 2)), InvalidArgument);
  p.version += 1;
  CHECK_THROWS_AS(backward(p, cache, Matrix::Zero(5, 2)), InvalidArgument);
}

TEST_CASE("single linear layer with squared error gives the outer product") {
  auto p = init_model(std::vector<std::size_t>{4, 3}, 11);
  std::mt19937_64 rng(2);
  const Matrix x = random_matrix(rng, 1, 4);
  const Matrix target = random_matrix(rng, 1, 3);
  ForwardCache cache;
  const Matrix z = forward(p, x, &cache);
  const Matrix err = z - target;  // d/dz of 0.5 |z - t|^2
  const auto g = backward(p, cache, err);
  const Matrix outer = err.transpose() * x;
  CHECK((g.layers[0].weight - outer).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((g.layers[0].bias - err.row(0).transpose()).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("backward matches finite differences through a combined loss") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<std::size_t> dims{4, 8, 3};
    auto p = init_model(dims, static_cast<std::uint64_t>(100 + trial));
    const Matrix x = random_matrix(rng, 4, 4);
    const std::vector<std::size_t> labels{0, 1, 2, static_cast<std::size_t>(trial % 3)};
    auto loss_of = [&](const ModelParameters& q) {
      return supervised_loss(ProbabilityBatch(softmax_rows(forward(q, x))), labels);
    };
    ForwardCache cache;
    const Matrix probs = softmax_rows(forward(p, x, &cache));
    const Matrix dp = supervised_loss_grad(ProbabilityBatch(probs), labels);
    const auto grads = backward(p, cache, softmax_backward(probs, dp));
    const auto flat = flatten(p.layers);
    const auto numeric = finite_difference_gradient(
        [&](std::span<const double> theta) {
          ModelParameters q = p;
          unflatten(theta, q.layers);
          return loss_of(q);
        },
        flat);
    const auto analytic = flatten(grads.layers);
    CHECK(max_relative_error(analytic, numeric) < 1e-5);
  }
}

TEST_CASE("flatten and unflatten round trip") {
  const auto p = init_model(std::vector<std::size_t>{3, 5, 2}, 8);
  auto q = zeros_like(p);
  unflatten(flatten(p.layers), q.layers);
  CHECK(flatten(q.layers) == flatten(p.layers));
  CHECK_THROWS_AS(unflatten(std::vector<double>(3, 0.0), q.layers), InvalidArgument);
}

TEST_CASE("checkpoint round trip is exact") {
  const auto p = init_model(std::vector<std::size_t>{2, 64, 64, 4}, 12);
  std::stringstream ss;
  write_checkpoint(ss, p);
  const std::string text = ss.str();
  CHECK(text.rfind("fullmatch-checkpoint 1\ndims 2 64 64 4\n", 0) == 0);
  const auto back = read_checkpoint(ss);
  CHECK(back == p);
  std::stringstream again;
  write_checkpoint(again, back);
  CHECK(again.str() == text);

  std::stringstream bad("not-a-checkpoint\n");
  CHECK_THROWS(read_checkpoint(bad));
  std::stringstream truncated(text.substr(0, text.size() / 2));
  CHECK_THROWS(read_checkpoint(truncated));
}

TEST_CASE("all_finite") {
  auto p = init_model(std::vector<std::size_t>{2, 3}, 1);
  CHECK(p.all_finite());
  p.layers[0].weight(0, 0) = std::nan("");
  CHECK_FALSE(p.all_finite());
}
