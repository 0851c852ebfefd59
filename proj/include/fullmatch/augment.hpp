#pragma once

#include <span>
#include <vector>

#include "fullmatch/core_math.hpp"
#include "fullmatch/rng.hpp"

namespace fullmatch {

/// Strengths of the weak and strong feature-space perturbations.
struct AugmentPolicy {
  double weak_noise_sigma = 0.05;
  double strong_noise_sigma = 0.3;
  double strong_dropout_fraction = 0.25;
  double strong_scale_min = 0.8;
  double strong_scale_max = 1.25;

  /// Throws InvalidArgument naming the offending field.
  void validate() const;
  /// Policy with every strength at its identity value.
  static AugmentPolicy identity();
};

/// x + N(0, weak_noise_sigma^2) per coordinate.
std::vector<double> weak_augment(std::span<const double> x, const AugmentPolicy& policy, Rng& rng);

/// Coordinate dropout, then N(0, strong_noise_sigma^2) noise, then one global
/// scale drawn from [strong_scale_min, strong_scale_max].
std::vector<double> strong_augment(std::span<const double> x, const AugmentPolicy& policy, Rng& rng);

/// Row-wise versions; rows are consumed from the stream in order.
Matrix weak_augment_rows(const Matrix& x, const AugmentPolicy& policy, Rng& rng);
Matrix strong_augment_rows(const Matrix& x, const AugmentPolicy& policy, Rng& rng);

}  // namespace fullmatch
