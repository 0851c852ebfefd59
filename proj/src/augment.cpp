#include "fullmatch/augment.hpp"

#include <random>

namespace fullmatch {

void AugmentPolicy::validate() const {
  if (!(weak_noise_sigma >= 0.0)) throw InvalidArgument("augment.weak_noise_sigma must be >= 0");
  if (!(strong_noise_sigma >= 0.0)) throw InvalidArgument("augment.strong_noise_sigma must be >= 0");
  if (!(strong_dropout_fraction >= 0.0 && strong_dropout_fraction < 1.0)) {
    throw InvalidArgument("augment.strong_dropout_fraction must lie in [0, 1)");
  }
  if (!(strong_scale_min > 0.0 && strong_scale_min <= 1.0 && strong_scale_max >= 1.0)) {
    throw InvalidArgument("augment.strong_scale_min/max must bracket 1 with a positive lower end");
  }
  // The identity policy is the one allowed exception to weak < strong.
  const bool all_zero = weak_noise_sigma == 0.0 && strong_noise_sigma == 0.0;
  if (!all_zero && !(weak_noise_sigma < strong_noise_sigma)) {
    throw InvalidArgument("augment.weak_noise_sigma must be smaller than augment.strong_noise_sigma");
  }
}

AugmentPolicy AugmentPolicy::identity() {
  return {0.0, 0.0, 0.0, 1.0, 1.0};
}

std::vector<double> weak_augment(std::span<const double> x, const AugmentPolicy& policy, Rng& rng) {
  std::vector<double> out(x.begin(), x.end());
  if (policy.weak_noise_sigma == 0.0) return out;
  std::normal_distribution<double> noise(0.0, policy.weak_noise_sigma);
  for (double& v : out) v += noise(rng);
  return out;
}

std::vector<double> strong_augment(std::span<const double> x, const AugmentPolicy& policy, Rng& rng) {
  std::vector<double> out(x.begin(), x.end());
  if (policy.strong_dropout_fraction > 0.0) {
    std::bernoulli_distribution drop(policy.strong_dropout_fraction);
    for (double& v : out) {
      if (drop(rng)) v = 0.0;
    }
  }
  if (policy.strong_noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, policy.strong_noise_sigma);
    for (double& v : out) v += noise(rng);
  }
  if (policy.strong_scale_min != policy.strong_scale_max) {
    std::uniform_real_distribution<double> scale(policy.strong_scale_min, policy.strong_scale_max);
    const double s = scale(rng);
    for (double& v : out) v *= s;
  } else if (policy.strong_scale_min != 1.0) {
    for (double& v : out) v *= policy.strong_scale_min;
  }
  return out;
}

namespace {

template <typename Fn>
Matrix apply_rows(const Matrix& x, Fn&& fn) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const auto row = fn(row_span(x, i));
    std::copy(row.begin(), row.end(), out.data() + i * out.cols());
  }
  return out;
}

}  // namespace

Matrix weak_augment_rows(const Matrix& x, const AugmentPolicy& policy, Rng& rng) {
  return apply_rows(x, [&](std::span<const double> r) { return weak_augment(r, policy, rng); });
}

Matrix strong_augment_rows(const Matrix& x, const AugmentPolicy& policy, Rng& rng) {
  return apply_rows(x, [&](std::span<const double> r) { return strong_augment(r, policy, rng); });
}

}  // namespace fullmatch
