#pragma once

#include <span>
#include <vector>

#include "fullmatch/core_math.hpp"
#include "fullmatch/labeling.hpp"

namespace fullmatch {

/// The five scalars of one training step, l_sum = l_s + l_us + alpha*l_anl + beta*l_eml.
struct LossBreakdown {
  double l_s = 0.0;
  double l_us = 0.0;
  double l_eml = 0.0;
  double l_anl = 0.0;
  double l_sum = 0.0;
  double alpha = 1.0;
  double beta = 1.0;

  friend bool operator==(const LossBreakdown&, const LossBreakdown&) = default;
};

enum class EmlVariant { bce, ce };

// Every *_grad function below returns dL/dP with the same shape as P. Use
// softmax_backward to move it onto logits.

/// Sum over the batch of squared L2 distances between rows.
double l2_consistency(const ProbabilityBatch& a, const ProbabilityBatch& b);
/// Gradient of l2_consistency with respect to b.
Matrix l2_consistency_grad(const ProbabilityBatch& a, const ProbabilityBatch& b);

/// Mean hard cross entropy over a labeled batch.
double supervised_loss(const ProbabilityBatch& probs, std::span<const std::size_t> labels);
Matrix supervised_loss_grad(const ProbabilityBatch& probs, std::span<const std::size_t> labels);

/// Masked cross entropy against pseudo-labels, normalized by the full batch size.
double unsupervised_loss(const ProbabilityBatch& strong, const SelectionState& state);
Matrix unsupervised_loss_grad(const ProbabilityBatch& strong, const SelectionState& state);

/// Non-target targets y_c = (1 - p[target]) / m for each of the m non-target classes.
std::vector<double> eml_targets(std::span<const double> p, std::size_t target,
                                std::span<const std::size_t> nontarget);

/// Entropy Meaning Loss over u_mask, normalized by B*C. The non-target
/// target y_c depends on p[target] and is differentiated through.
double eml_loss(const ProbabilityBatch& strong, const SelectionState& state, EmlVariant variant = EmlVariant::bce);
Matrix eml_loss_grad(const ProbabilityBatch& strong, const SelectionState& state,
                     EmlVariant variant = EmlVariant::bce);

/// Closed-form dL_eml/dp_target of one sample:
///   -(1 / (B C m)) log( prod(1 - p_c) / prod(p_c) )  over the m non-target classes.
double eml_target_class_gradient(std::span<const double> p, std::size_t target,
                                 std::span<const std::size_t> nontarget, std::size_t batch_size,
                                 std::size_t num_classes);

/// Negative learning loss -(1/B) sum negative_mask * log(1 - p).
double anl_loss(const ProbabilityBatch& strong, const SelectionState& state);
Matrix anl_loss_grad(const ProbabilityBatch& strong, const SelectionState& state);

LossBreakdown total_loss(double l_s, double l_us, double l_anl, double l_eml, double alpha, double beta);

}  // namespace fullmatch
