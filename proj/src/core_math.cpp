#include "fullmatch/core_math.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fullmatch {

ProbabilityBatch::ProbabilityBatch(Matrix values, View view) : values_(std::move(values)), view_(view) {
  for (Eigen::Index i = 0; i < values_.rows(); ++i) {
    double sum = 0.0;
    for (Eigen::Index c = 0; c < values_.cols(); ++c) {
      const double v = values_(i, c);
      if (!(v >= 0.0 && v <= 1.0)) {
        std::ostringstream os;
        os << "probability batch: entry (" << i << ", " << c << ") = " << v << " outside [0, 1]";
        throw InvalidArgument(os.str());
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      std::ostringstream os;
      os << "probability batch: row " << i << " sums to " << sum;
      throw InvalidArgument(os.str());
    }
  }
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw InvalidArgument("softmax: empty logit row");
  double top = logits[0];
  for (double z : logits) {
    if (!std::isfinite(z)) throw InvalidArgument("softmax: non-finite logit");
    top = std::max(top, z);
  }
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    out[c] = std::exp(logits[c] - top);
    total += out[c];
  }
  for (double& v : out) v /= total;
  return out;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const auto row = softmax(row_span(logits, i));
    std::copy(row.begin(), row.end(), out.data() + i * out.cols());
  }
  return out;
}

Matrix softmax_backward(const Matrix& probs, const Matrix& grad_probs) {
  if (probs.rows() != grad_probs.rows() || probs.cols() != grad_probs.cols()) {
    throw InvalidArgument("softmax_backward: shape mismatch");
  }
  Matrix out(probs.rows(), probs.cols());
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    double dot = 0.0;
    for (Eigen::Index c = 0; c < probs.cols(); ++c) dot += grad_probs(i, c) * probs(i, c);
    for (Eigen::Index c = 0; c < probs.cols(); ++c) out(i, c) = probs(i, c) * (grad_probs(i, c) - dot);
  }
  return out;
}

double cross_entropy_hard(std::span<const double> p, std::size_t target) {
  if (target >= p.size()) {
    throw InvalidArgument("cross_entropy_hard: target " + std::to_string(target) + " out of range for " +
                          std::to_string(p.size()) + " classes");
  }
  return -clamped_log(std::min(p[target], 1.0));
}

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

std::vector<double> finite_difference_gradient(const std::function<double(std::span<const double>)>& f,
                                               std::span<const double> x, double h) {
  if (!(h > 0.0)) throw InvalidArgument("finite_difference_gradient: step must be positive");
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw InvalidArgument("finite_difference_gradient: non-finite function value at coordinate " +
                            std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double max_relative_error(std::span<const double> a, std::span<const double> b, double floor) {
  if (a.size() != b.size()) throw InvalidArgument("max_relative_error: length mismatch");
  double diff = 0.0;
  double scale = floor;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
  }
  return diff / scale;
}

}  // namespace fullmatch
