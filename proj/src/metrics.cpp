#include "fullmatch/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace fullmatch {

double pseudo_label_ratio(const ProbabilityBatch& pool, double tau) {
  if (pool.batch_size() == 0) throw InvalidArgument("pseudo_label_ratio: empty pool");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pool.batch_size(); ++i) {
    const auto row = pool.row(i);
    if (*std::max_element(row.begin(), row.end()) >= tau) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(pool.batch_size());
}

NplStats npl_stats(const SelectionState& state, std::span<const std::size_t> true_labels) {
  if (true_labels.size() != state.batch_size) throw InvalidArgument("npl_stats: label count mismatch");
  NplStats out;
  for (std::size_t i = 0; i < state.batch_size; ++i) {
    for (std::size_t c = 0; c < state.num_classes; ++c) {
      if (!state.negative_mask(i, c)) continue;
      ++out.negatives;
      if (c == true_labels[i]) ++out.wrong;
    }
  }
  if (state.batch_size > 0) out.mean_count = static_cast<double>(out.negatives) / static_cast<double>(state.batch_size);
  if (out.negatives > 0) {
    out.accuracy = 1.0 - static_cast<double>(out.wrong) / static_cast<double>(out.negatives);
  }
  return out;
}

double topk_accuracy(const ProbabilityBatch& probs, std::span<const std::size_t> labels, std::size_t k) {
  if (k < 1 || k > probs.num_classes()) throw InvalidArgument("topk_accuracy: k out of range");
  if (labels.size() != probs.batch_size()) throw InvalidArgument("topk_accuracy: label count mismatch");
  if (labels.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (rank_classes(probs.row(i))[labels[i]] <= k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

std::vector<double> default_entropy_edges(std::size_t num_classes) {
  const double top = std::log(static_cast<double>(num_classes));
  std::vector<double> edges;
  for (double e = 0.0; e < top - 1e-9; e += 0.25) edges.push_back(e);
  edges.push_back(top);
  return edges;
}

std::vector<std::size_t> entropy_histogram(const ProbabilityBatch& probs, std::span<const double> bin_edges) {
  if (bin_edges.size() < 2) throw InvalidArgument("entropy_histogram: need at least two edges");
  for (std::size_t j = 1; j < bin_edges.size(); ++j) {
    if (!(bin_edges[j] > bin_edges[j - 1])) throw InvalidArgument("entropy_histogram: edges must increase");
  }
  const std::size_t bins = bin_edges.size() - 1;
  std::vector<std::size_t> counts(bins, 0);
  for (std::size_t i = 0; i < probs.batch_size(); ++i) {
    const double h = entropy(probs.row(i));
    const auto it = std::upper_bound(bin_edges.begin(), bin_edges.end(), h);
    std::size_t bin = it == bin_edges.begin() ? 0 : static_cast<std::size_t>(it - bin_edges.begin()) - 1;
    counts[std::min(bin, bins - 1)]++;
  }
  return counts;
}

double step_timer(std::span<const double> durations) {
  if (durations.empty()) throw InvalidArgument("step_timer: no durations");
  double total = 0.0;
  for (double d : durations) total += d;
  return total / static_cast<double>(durations.size());
}

void NplAccumulator::add(const SelectionState& state, std::span<const std::size_t> true_labels) {
  const NplStats s = npl_stats(state, true_labels);
  rows_ += state.batch_size;
  negatives_ += s.negatives;
  wrong_ += s.wrong;
  k_total_ += static_cast<double>(state.k);
  ++steps_;
}

NplStats NplAccumulator::stats() const {
  NplStats out;
  out.negatives = negatives_;
  out.wrong = wrong_;
  if (rows_ > 0) out.mean_count = static_cast<double>(negatives_) / static_cast<double>(rows_);
  if (negatives_ > 0) out.accuracy = 1.0 - static_cast<double>(wrong_) / static_cast<double>(negatives_);
  return out;
}

MetricsWriter::MetricsWriter(std::ostream& os, std::size_t num_classes, std::size_t num_bins)
    : os_(os), num_classes_(num_classes), num_bins_(num_bins) {
  const auto cols = columns(num_classes, num_bins);
  for (std::size_t j = 0; j < cols.size(); ++j) os_ << (j ? "," : "") << cols[j];
  os_ << '\n';
}

std::vector<std::string> MetricsWriter::columns(std::size_t num_classes, std::size_t num_bins) {
  std::vector<std::string> cols = {"iteration", "test_accuracy", "pseudo_label_ratio", "mean_npl_per_sample",
                                   "npl_accuracy", "k_value", "low_entropy_fraction", "l_s", "l_us", "l_eml",
                                   "l_anl", "l_sum"};
  for (std::size_t k = 1; k <= num_classes; ++k) cols.push_back("top" + std::to_string(k) + "_accuracy");
  for (std::size_t b = 0; b < num_bins; ++b) cols.push_back("entropy_bin" + std::to_string(b));
  return cols;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

void MetricsWriter::write(const MetricsRecord& r) {
  if (r.topk_accuracy.size() != num_classes_ || r.entropy_histogram.size() != num_bins_) {
    throw InvalidArgument("MetricsWriter: record does not match the header layout");
  }
  os_ << r.iteration << ',' << fmt(r.test_accuracy) << ',' << fmt(r.pseudo_label_ratio) << ','
      << fmt(r.mean_npl_per_sample) << ',' << fmt(r.npl_accuracy) << ',' << fmt(r.k_value) << ','
      << fmt(r.low_entropy_fraction) << ',' << fmt(r.l_s) << ',' << fmt(r.l_us) << ',' << fmt(r.l_eml) << ','
      << fmt(r.l_anl) << ',' << fmt(r.l_sum);
  for (double a : r.topk_accuracy) os_ << ',' << fmt(a);
  for (std::size_t c : r.entropy_histogram) os_ << ',' << c;
  os_ << '\n';
  os_.flush();
}

}  // namespace fullmatch
