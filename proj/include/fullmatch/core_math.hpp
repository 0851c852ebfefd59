#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace fullmatch {

/// Dense row-major matrix used for batches (rows are samples).
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Every log argument is clamped from below to this value.
inline constexpr double kLogEpsilon = 1e-12;

/// Raised when an operation's precondition is violated.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline std::span<const double> row_span(const Matrix& m, Eigen::Index i) {
  return {m.data() + i * m.cols(), static_cast<std::size_t>(m.cols())};
}

/// Which stochastic view a probability batch was computed from.
enum class View { unspecified, weak, strong };

/// B x C matrix of class probabilities. Construction checks that every row
/// lies in [0, 1] and sums to one within 1e-6.
class ProbabilityBatch {
 public:
  ProbabilityBatch() = default;
  explicit ProbabilityBatch(Matrix values, View view = View::unspecified);

  static ProbabilityBatch weak(Matrix values) { return ProbabilityBatch(std::move(values), View::weak); }
  static ProbabilityBatch strong(Matrix values) { return ProbabilityBatch(std::move(values), View::strong); }

  const Matrix& values() const { return values_; }
  View view() const { return view_; }
  std::size_t batch_size() const { return static_cast<std::size_t>(values_.rows()); }
  std::size_t num_classes() const { return static_cast<std::size_t>(values_.cols()); }
  std::span<const double> row(std::size_t i) const { return row_span(values_, static_cast<Eigen::Index>(i)); }
  double operator()(std::size_t i, std::size_t c) const {
    return values_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
  }

 private:
  Matrix values_;
  View view_ = View::unspecified;
};

/// Max-subtracted softmax of one logit row.
std::vector<double> softmax(std::span<const double> logits);

/// Row-wise softmax of a B x C logit matrix.
Matrix softmax_rows(const Matrix& logits);

/// Pulls dL/dp back through a row-wise softmax: dL/dz_j = p_j (g_j - sum_c g_c p_c).
Matrix softmax_backward(const Matrix& probs, const Matrix& grad_probs);

/// log(max(x, kLogEpsilon)) and its derivative with the same clamp.
inline double clamped_log(double x) { return x > kLogEpsilon ? std::log(x) : std::log(kLogEpsilon); }
inline double clamped_log_derivative(double x) { return x > kLogEpsilon ? 1.0 / x : 0.0; }

/// -log(clamp(p[target], eps, 1)).
double cross_entropy_hard(std::span<const double> p, std::size_t target);

/// Natural-log Shannon entropy; 0 log 0 is 0.
double entropy(std::span<const double> p);

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate.
std::vector<double> finite_difference_gradient(const std::function<double(std::span<const double>)>& f,
                                               std::span<const double> x, double h = 1e-5);

/// max_i |a_i - b_i| / max(max_i |a_i|, max_i |b_i|, floor).
double max_relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-300);

}  // namespace fullmatch
