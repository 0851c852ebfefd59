#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fullmatch/core_math.hpp"
#include "fullmatch/labeling.hpp"
#include "fullmatch/losses.hpp"
#include "fullmatch/rng.hpp"

namespace fullmatch {

/// A random weak/strong/labeled logit triple with the selection state built
/// from it at tau = 0.95. Strong logits are the weak ones plus noise so that
/// the adaptive k is usually below C.
struct LossInstance {
  Matrix weak_logits;
  Matrix strong_logits;
  Matrix labeled_logits;
  std::vector<std::size_t> labels;
  SelectionState state;
};

LossInstance random_loss_instance(Rng& rng, std::size_t batch, std::size_t classes, bool adaptive_k = true);

struct GradcheckEntry {
  std::string name;
  double max_error = 0.0;
  double tolerance = 0.0;
  std::size_t instances = 0;
  bool passed() const { return max_error <= tolerance; }
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  /// Instances where every non-target p < 0.5 and the closed-form target gradient was negative.
  std::size_t sign_checked = 0;
  std::size_t sign_negative = 0;
  bool passed() const;
};

/// Finite-difference suite: every loss against central differences on
/// logits, the closed-form target-class gradient against the loss module,
/// and the model's backward pass against differences on parameters.
GradcheckReport run_gradient_checks(std::uint64_t seed, std::size_t instances = 100);

}  // namespace fullmatch
