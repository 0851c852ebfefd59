#include "fullmatch/labeling.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace fullmatch {

void Mask::clear_row(std::size_t i) {
  std::fill_n(bits_.begin() + static_cast<std::ptrdiff_t>(i * cols_), cols_, std::uint8_t{0});
}

std::size_t Mask::row_count(std::size_t i) const {
  const auto first = bits_.begin() + static_cast<std::ptrdiff_t>(i * cols_);
  return static_cast<std::size_t>(std::count(first, first + static_cast<std::ptrdiff_t>(cols_), std::uint8_t{1}));
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

Mask SelectionState::s_mask() const {
  Mask out(batch_size, num_classes);
  for (std::size_t i = 0; i < batch_size; ++i) {
    for (std::size_t c = 0; c < num_classes; ++c) out.set(i, c, positive_mask(i, c) || negative_mask(i, c));
  }
  return out;
}

std::size_t SelectionState::num_pseudo_labeled() const {
  return static_cast<std::size_t>(std::count(has_pseudo_label.begin(), has_pseudo_label.end(), std::uint8_t{1}));
}

std::vector<std::size_t> rank_classes(std::span<const double> q) {
  std::vector<std::size_t> order(q.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return q[a] > q[b]; });
  std::vector<std::size_t> rank(q.size());
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r + 1;
  return rank;
}

namespace {

std::size_t argmax(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < row.size(); ++c) {
    if (row[c] > row[best]) best = c;
  }
  return best;
}

// Rank of one class without materializing the full ranking.
std::size_t rank_of(std::span<const double> row, std::size_t cls) {
  std::size_t rank = 1;
  for (std::size_t c = 0; c < row.size(); ++c) {
    if (row[c] > row[cls] || (row[c] == row[cls] && c < cls)) ++rank;
  }
  return rank;
}

}  // namespace

std::vector<std::size_t> compute_temp_labels(const ProbabilityBatch& weak) {
  std::vector<std::size_t> labels(weak.batch_size());
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = argmax(weak.row(i));
  return labels;
}

std::size_t compute_adaptive_k(const ProbabilityBatch& strong, std::span<const std::size_t> temp_labels) {
  const std::size_t classes = strong.num_classes();
  if (temp_labels.size() != strong.batch_size()) {
    throw InvalidArgument("compute_adaptive_k: temp label count does not match batch size");
  }
  if (strong.batch_size() == 0) return classes;
  std::size_t k = 2;
  for (std::size_t i = 0; i < temp_labels.size(); ++i) {
    if (temp_labels[i] >= classes) throw InvalidArgument("compute_adaptive_k: temp label out of range");
    k = std::max(k, rank_of(strong.row(i), temp_labels[i]));
  }
  return std::min(k, classes);
}

SelectionState build_selection_state(const ProbabilityBatch& weak, const ProbabilityBatch& strong, double tau,
                                     SelectionOptions options) {
  if (!(tau > 0.5 && tau < 1.0)) {
    std::ostringstream os;
    os << "build_selection_state: threshold " << tau << " outside (0.5, 1)";
    throw InvalidArgument(os.str());
  }
  const std::vector<double> thresholds(weak.num_classes(), tau);
  return build_selection_state(weak, strong, thresholds, options);
}

SelectionState build_selection_state(const ProbabilityBatch& weak, const ProbabilityBatch& strong,
                                     std::span<const double> class_thresholds, SelectionOptions options) {
  if (weak.batch_size() != strong.batch_size() || weak.num_classes() != strong.num_classes()) {
    throw InvalidArgument("build_selection_state: weak and strong batches differ in shape");
  }
  if (weak.view() == View::strong || strong.view() == View::weak) {
    throw InvalidArgument("build_selection_state: weak/strong views swapped");
  }
  const std::size_t batch = weak.batch_size();
  const std::size_t classes = weak.num_classes();
  if (classes < 2) throw InvalidArgument("build_selection_state: need at least two classes");
  if (class_thresholds.size() != classes) throw InvalidArgument("build_selection_state: one threshold per class");
  for (double t : class_thresholds) {
    if (!(t > 0.5 && t < 1.0)) {
      std::ostringstream os;
      os << "build_selection_state: threshold " << t << " outside (0.5, 1)";
      throw InvalidArgument(os.str());
    }
  }

  SelectionState state;
  state.batch_size = batch;
  state.num_classes = classes;
  state.has_pseudo_label.assign(batch, 0);
  state.target_class.assign(batch, std::nullopt);
  state.positive_mask = Mask(batch, classes);
  state.u_mask = Mask(batch, classes);
  state.negative_mask = Mask(batch, classes);

  const auto temp_labels = compute_temp_labels(weak);
  state.k = options.adaptive_k ? compute_adaptive_k(strong, temp_labels) : classes;

  for (std::size_t i = 0; i < batch; ++i) {
    const auto q = weak.row(i);
    const auto ranks = rank_classes(q);
    const std::size_t top = temp_labels[i];
    const bool selected = q[top] >= class_thresholds[top];
    state.has_pseudo_label[i] = selected ? 1 : 0;
    if (selected) state.target_class[i] = top;
    for (std::size_t c = 0; c < classes; ++c) {
      state.positive_mask.set(i, c, q[c] >= class_thresholds[c]);
      state.negative_mask.set(i, c, ranks[c] > state.k);
      state.u_mask.set(i, c, selected && c != top && ranks[c] <= state.k);
    }
  }
  return state;
}

void restrict_negatives(SelectionState& state, NegativeScope scope) {
  if (scope == NegativeScope::all) return;
  for (std::size_t i = 0; i < state.batch_size; ++i) {
    const bool labeled = state.has_pseudo_label[i] != 0;
    const bool keep = scope == NegativeScope::with_pseudo_label ? labeled : !labeled;
    if (!keep) state.negative_mask.clear_row(i);
  }
}

}  // namespace fullmatch
