#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fullmatch/core_math.hpp"
#include "fullmatch/labeling.hpp"

namespace fullmatch {

/// Version tag of the metrics file column layout, recorded in run manifests.
inline constexpr const char* kMetricsSchema = "fullmatch-metrics/1";

/// One evaluation point.
struct MetricsRecord {
  std::size_t iteration = 0;
  double test_accuracy = 0.0;
  double pseudo_label_ratio = 0.0;
  double mean_npl_per_sample = 0.0;
  double npl_accuracy = 1.0;
  double k_value = 0.0;  // mean adaptive k over the interval
  std::vector<double> topk_accuracy;  // index k - 1
  std::vector<std::size_t> entropy_histogram;
  double low_entropy_fraction = 0.0;  // test predictions with entropy < 0.25
  double l_s = 0.0, l_us = 0.0, l_eml = 0.0, l_anl = 0.0, l_sum = 0.0;  // interval means
  double step_time = 0.0;  // seconds, kept out of the metrics file
};

/// Fraction of pool rows whose max confidence reaches tau.
double pseudo_label_ratio(const ProbabilityBatch& pool, double tau);

struct NplStats {
  double mean_count = 0.0;
  /// Fraction of negative labels that differ from the true class; 1.0 when none were assigned.
  double accuracy = 1.0;
  std::size_t negatives = 0;
  std::size_t wrong = 0;
};

/// Negative-label count and accuracy. Reads true labels; diagnostics only.
NplStats npl_stats(const SelectionState& state, std::span<const std::size_t> true_labels);

/// Fraction of rows whose label has rank <= k.
double topk_accuracy(const ProbabilityBatch& probs, std::span<const std::size_t> labels, std::size_t k);

/// Edges 0, 0.25, 0.5, ... with ln C as the final edge.
std::vector<double> default_entropy_edges(std::size_t num_classes);

/// Counts of row entropies per [e_j, e_{j+1}) bin. Values past either end
/// land in the outermost bins.
std::vector<std::size_t> entropy_histogram(const ProbabilityBatch& probs, std::span<const double> bin_edges);

/// Mean step duration in seconds.
double step_timer(std::span<const double> durations);

/// Accumulates negative-label statistics over many steps.
class NplAccumulator {
 public:
  void add(const SelectionState& state, std::span<const std::size_t> true_labels);
  NplStats stats() const;
  double mean_k() const { return steps_ ? k_total_ / static_cast<double>(steps_) : 0.0; }
  void reset() { *this = NplAccumulator{}; }

 private:
  std::size_t rows_ = 0;
  std::size_t negatives_ = 0;
  std::size_t wrong_ = 0;
  std::size_t steps_ = 0;
  double k_total_ = 0.0;
};

/// CSV writer for metrics rows; the header names every column.
class MetricsWriter {
 public:
  MetricsWriter(std::ostream& os, std::size_t num_classes, std::size_t num_bins);
  void write(const MetricsRecord& record);
  static std::vector<std::string> columns(std::size_t num_classes, std::size_t num_bins);

 private:
  std::ostream& os_;
  std::size_t num_classes_;
  std::size_t num_bins_;
};

}  // namespace fullmatch
