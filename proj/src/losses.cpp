#include "fullmatch/losses.hpp"

#include <cmath>
#include <sstream>

namespace fullmatch {

namespace {

void require_same_shape(const ProbabilityBatch& probs, const SelectionState& state, const char* who) {
  if (probs.batch_size() != state.batch_size || probs.num_classes() != state.num_classes) {
    std::ostringstream os;
    os << who << ": batch is " << probs.batch_size() << "x" << probs.num_classes() << " but selection state is "
       << state.batch_size << "x" << state.num_classes;
    throw InvalidArgument(os.str());
  }
}

std::vector<std::size_t> nontarget_classes(const SelectionState& state, std::size_t i) {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < state.num_classes; ++c) {
    if (state.u_mask(i, c)) out.push_back(c);
  }
  return out;
}

}  // namespace

double l2_consistency(const ProbabilityBatch& a, const ProbabilityBatch& b) {
  if (a.batch_size() != b.batch_size() || a.num_classes() != b.num_classes()) {
    throw InvalidArgument("l2_consistency: shape mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < a.batch_size(); ++i) {
    for (std::size_t c = 0; c < a.num_classes(); ++c) {
      const double d = a(i, c) - b(i, c);
      total += d * d;
    }
  }
  return total;
}

Matrix l2_consistency_grad(const ProbabilityBatch& a, const ProbabilityBatch& b) {
  if (a.batch_size() != b.batch_size() || a.num_classes() != b.num_classes()) {
    throw InvalidArgument("l2_consistency_grad: shape mismatch");
  }
  return 2.0 * (b.values() - a.values());
}

double supervised_loss(const ProbabilityBatch& probs, std::span<const std::size_t> labels) {
  if (probs.batch_size() == 0) throw InvalidArgument("supervised_loss: empty labeled batch");
  if (labels.size() != probs.batch_size()) throw InvalidArgument("supervised_loss: label count mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) total += cross_entropy_hard(probs.row(i), labels[i]);
  return total / static_cast<double>(labels.size());
}

Matrix supervised_loss_grad(const ProbabilityBatch& probs, std::span<const std::size_t> labels) {
  if (probs.batch_size() == 0) throw InvalidArgument("supervised_loss_grad: empty labeled batch");
  if (labels.size() != probs.batch_size()) throw InvalidArgument("supervised_loss_grad: label count mismatch");
  Matrix grad = Matrix::Zero(probs.values().rows(), probs.values().cols());
  const double scale = 1.0 / static_cast<double>(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= probs.num_classes()) throw InvalidArgument("supervised_loss_grad: label out of range");
    const auto r = static_cast<Eigen::Index>(i);
    const auto c = static_cast<Eigen::Index>(labels[i]);
    grad(r, c) = -scale * clamped_log_derivative(probs(i, labels[i]));
  }
  return grad;
}

double unsupervised_loss(const ProbabilityBatch& strong, const SelectionState& state) {
  require_same_shape(strong, state, "unsupervised_loss");
  if (state.batch_size == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < state.batch_size; ++i) {
    if (state.has_pseudo_label[i]) total += cross_entropy_hard(strong.row(i), *state.target_class[i]);
  }
  return total / static_cast<double>(state.batch_size);
}

Matrix unsupervised_loss_grad(const ProbabilityBatch& strong, const SelectionState& state) {
  require_same_shape(strong, state, "unsupervised_loss_grad");
  Matrix grad = Matrix::Zero(strong.values().rows(), strong.values().cols());
  if (state.batch_size == 0) return grad;
  const double scale = 1.0 / static_cast<double>(state.batch_size);
  for (std::size_t i = 0; i < state.batch_size; ++i) {
    if (!state.has_pseudo_label[i]) continue;
    const std::size_t t = *state.target_class[i];
    grad(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) =
        -scale * clamped_log_derivative(strong(i, t));
  }
  return grad;
}

std::vector<double> eml_targets(std::span<const double> p, std::size_t target,
                                std::span<const std::size_t> nontarget) {
  if (nontarget.empty()) throw InvalidArgument("eml_targets: empty non-target set");
  if (target >= p.size()) throw InvalidArgument("eml_targets: target out of range");
  for (std::size_t c : nontarget) {
    if (c == target) throw InvalidArgument("eml_targets: target listed as non-target");
    if (c >= p.size()) throw InvalidArgument("eml_targets: non-target class out of range");
  }
  const double share = (1.0 - p[target]) / static_cast<double>(nontarget.size());
  return std::vector<double>(nontarget.size(), share);
}

double eml_loss(const ProbabilityBatch& strong, const SelectionState& state, EmlVariant variant) {
  require_same_shape(strong, state, "eml_loss");
  if (state.batch_size == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < state.batch_size; ++i) {
    if (!state.has_pseudo_label[i]) continue;
    const auto nontarget = nontarget_classes(state, i);
    if (nontarget.empty()) continue;
    const auto p = strong.row(i);
    const auto y = eml_targets(p, *state.target_class[i], nontarget);
    for (std::size_t j = 0; j < nontarget.size(); ++j) {
      const double pc = p[nontarget[j]];
      double term = y[j] * clamped_log(pc);
      if (variant == EmlVariant::bce) term += (1.0 - y[j]) * clamped_log(1.0 - pc);
      total += term;
    }
  }
  return (0.0 - total) / static_cast<double>(state.batch_size * state.num_classes);
}

Matrix eml_loss_grad(const ProbabilityBatch& strong, const SelectionState& state, EmlVariant variant) {
  require_same_shape(strong, state, "eml_loss_grad");
  Matrix grad = Matrix::Zero(strong.values().rows(), strong.values().cols());
  if (state.batch_size == 0) return grad;
  const double scale = 1.0 / static_cast<double>(state.batch_size * state.num_classes);
  for (std::size_t i = 0; i < state.batch_size; ++i) {
    if (!state.has_pseudo_label[i]) continue;
    const auto nontarget = nontarget_classes(state, i);
    if (nontarget.empty()) continue;
    const auto p = strong.row(i);
    const std::size_t target = *state.target_class[i];
    const auto y = eml_targets(p, target, nontarget);
    const double m = static_cast<double>(nontarget.size());
    const auto r = static_cast<Eigen::Index>(i);
    // dy_c/dp_target = -1/m for every non-target class.
    double through_targets = 0.0;
    for (std::size_t j = 0; j < nontarget.size(); ++j) {
      const double pc = p[nontarget[j]];
      double direct = y[j] * clamped_log_derivative(pc);
      double dterm_dy = clamped_log(pc);
      if (variant == EmlVariant::bce) {
        direct -= (1.0 - y[j]) * clamped_log_derivative(1.0 - pc);
        dterm_dy -= clamped_log(1.0 - pc);
      }
      grad(r, static_cast<Eigen::Index>(nontarget[j])) = -scale * direct;
      through_targets += dterm_dy;
    }
    grad(r, static_cast<Eigen::Index>(target)) = scale * through_targets / m;
  }
  return grad;
}

double eml_target_class_gradient(std::span<const double> p, std::size_t target,
                                 std::span<const std::size_t> nontarget, std::size_t batch_size,
                                 std::size_t num_classes) {
  if (nontarget.empty()) throw InvalidArgument("eml_target_class_gradient: empty non-target set");
  if (batch_size == 0 || num_classes < 2) throw InvalidArgument("eml_target_class_gradient: bad sizes");
  if (target >= p.size()) throw InvalidArgument("eml_target_class_gradient: target out of range");
  // prod(1 - p_c) / prod(p_c) carried as mantissa * 2^exponent; each factor is
  // within [1e-12, 1e12] after clamping, the product over many classes is not.
  double mantissa = 1.0;
  long exponent = 0;
  for (std::size_t c : nontarget) {
    if (c >= p.size() || c == target) throw InvalidArgument("eml_target_class_gradient: bad non-target class");
    const double num = std::max(1.0 - p[c], kLogEpsilon);
    const double den = std::max(p[c], kLogEpsilon);
    int e = 0;
    mantissa = std::frexp(mantissa * (num / den), &e);
    exponent += e;
  }
  const double log_ratio = std::log(mantissa) + static_cast<double>(exponent) * std::log(2.0);
  const double m = static_cast<double>(nontarget.size());
  return -log_ratio / (static_cast<double>(batch_size) * static_cast<double>(num_classes) * m);
}

double anl_loss(const ProbabilityBatch& strong, const SelectionState& state) {
  require_same_shape(strong, state, "anl_loss");
  if (state.batch_size == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < state.batch_size; ++i) {
    for (std::size_t c = 0; c < state.num_classes; ++c) {
      if (state.negative_mask(i, c)) total += clamped_log(1.0 - strong(i, c));
    }
  }
  return (0.0 - total) / static_cast<double>(state.batch_size);
}

Matrix anl_loss_grad(const ProbabilityBatch& strong, const SelectionState& state) {
  require_same_shape(strong, state, "anl_loss_grad");
  Matrix grad = Matrix::Zero(strong.values().rows(), strong.values().cols());
  if (state.batch_size == 0) return grad;
  const double scale = 1.0 / static_cast<double>(state.batch_size);
  for (std::size_t i = 0; i < state.batch_size; ++i) {
    for (std::size_t c = 0; c < state.num_classes; ++c) {
      if (state.negative_mask(i, c)) {
        grad(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
            scale * clamped_log_derivative(1.0 - strong(i, c));
      }
    }
  }
  return grad;
}

LossBreakdown total_loss(double l_s, double l_us, double l_anl, double l_eml, double alpha, double beta) {
  LossBreakdown out;
  out.l_s = l_s;
  out.l_us = l_us;
  out.l_anl = l_anl;
  out.l_eml = l_eml;
  out.alpha = alpha;
  out.beta = beta;
  out.l_sum = l_s + l_us + alpha * l_anl + beta * l_eml;
  return out;
}

}  // namespace fullmatch
