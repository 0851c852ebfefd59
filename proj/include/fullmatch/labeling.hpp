#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fullmatch/core_math.hpp"

namespace fullmatch {

/// Dense B x C boolean mask.
class Mask {
 public:
  Mask() = default;
  Mask(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), bits_(rows * cols, 0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool operator()(std::size_t i, std::size_t c) const { return bits_[i * cols_ + c] != 0; }
  void set(std::size_t i, std::size_t c, bool v) { bits_[i * cols_ + c] = v ? 1 : 0; }
  void clear_row(std::size_t i);
  std::size_t row_count(std::size_t i) const;
  std::size_t count() const;

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Outcome of pseudo-labeling one unlabeled batch.
///
/// positive_mask holds q_c >= tau, negative_mask holds rank(q_c) > k on the
/// weak row, and u_mask marks the non-target classes that EML supervises:
/// pseudo-labeled rows only, excluding the target, restricted to the weak
/// top-k. A pseudo-labeled row therefore has k - 1 non-target entries.
struct SelectionState {
  std::size_t batch_size = 0;
  std::size_t num_classes = 0;
  std::vector<std::uint8_t> has_pseudo_label;
  std::vector<std::optional<std::size_t>> target_class;
  Mask positive_mask;
  Mask u_mask;
  Mask negative_mask;
  std::size_t k = 0;

  /// Positive and negative selections combined, 1[q >= tau] + 1[rank > k].
  Mask s_mask() const;
  std::size_t num_pseudo_labeled() const;

  friend bool operator==(const SelectionState&, const SelectionState&) = default;
};

/// Descending-confidence ranks, 1-based; ties go to the lower class index.
std::vector<std::size_t> rank_classes(std::span<const double> q);

/// Per-row argmax with ties to the lower class index.
std::vector<std::size_t> compute_temp_labels(const ProbabilityBatch& weak);

/// Smallest theta in [2, C] such that every temp label lies in the top-theta
/// of its strong row. An empty batch yields C.
std::size_t compute_adaptive_k(const ProbabilityBatch& strong, std::span<const std::size_t> temp_labels);

struct SelectionOptions {
  /// When false, k is pinned to C: no negatives and EML over all C - 1 non-targets.
  bool adaptive_k = true;
};

/// Builds every selection structure for a weak/strong batch pair with a
/// single threshold tau in (0.5, 1).
SelectionState build_selection_state(const ProbabilityBatch& weak, const ProbabilityBatch& strong, double tau,
                                     SelectionOptions options = {});

/// Same, with one threshold per class; a row is pseudo-labeled when its max
/// weak confidence reaches the threshold of its argmax class.
SelectionState build_selection_state(const ProbabilityBatch& weak, const ProbabilityBatch& strong,
                                     std::span<const double> class_thresholds, SelectionOptions options = {});

enum class NegativeScope { all, with_pseudo_label, without_pseudo_label };

/// Drops negative labels outside the scope. Row counts of the result no
/// longer equal C - k for the dropped rows.
void restrict_negatives(SelectionState& state, NegativeScope scope);

}  // namespace fullmatch
