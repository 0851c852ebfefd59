#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "fullmatch/metrics.hpp"

using namespace fullmatch;

namespace {

Matrix random_probs(std::mt19937_64& rng, Eigen::Index B, Eigen::Index C, double scale = 2.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix z(B, C);
  for (Eigen::Index k = 0; k < z.size(); ++k) z.data()[k] = g(rng);
  return softmax_rows(z);
}

Matrix one_hot(const std::vector<std::size_t>& cls, std::size_t C) {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(cls.size()), static_cast<Eigen::Index>(C));
  for (std::size_t i = 0; i < cls.size(); ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(cls[i])) = 1.0;
  return m;
}

}  // namespace

TEST_CASE("pseudo_label_ratio") {
  CHECK(pseudo_label_ratio(ProbabilityBatch(one_hot({0, 1, 2}, 3)), 0.95) == 1.0);
  CHECK(pseudo_label_ratio(ProbabilityBatch(Matrix::Constant(5, 4, 0.25)), 0.95) == 0.0);
  Matrix mixed = Matrix::Constant(10, 2, 0.5);
  for (Eigen::Index i : {1, 4, 6, 9}) mixed.row(i) << 0.97, 0.03;
  CHECK(pseudo_label_ratio(ProbabilityBatch(mixed), 0.95) == doctest::Approx(0.4));
  CHECK_THROWS_AS(pseudo_label_ratio(ProbabilityBatch(Matrix(0, 3)), 0.95), InvalidArgument);

  // Invariant under row permutation.
  std::mt19937_64 rng(1);
  const Matrix p = random_probs(rng, 50, 4, 4.0);
  Matrix shuffled = p;
  std::vector<Eigen::Index> perm(50);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  for (Eigen::Index i = 0; i < 50; ++i) shuffled.row(i) = p.row(perm[static_cast<std::size_t>(i)]);
  CHECK(pseudo_label_ratio(ProbabilityBatch(p), 0.9) == pseudo_label_ratio(ProbabilityBatch(shuffled), 0.9));
}

TEST_CASE("npl_stats") {
  SelectionState s;
  s.batch_size = 2;
  s.num_classes = 6;
  s.k = 6;
  s.negative_mask = Mask(2, 6);
  const std::vector<std::size_t> truth{0, 1};
  auto vacuous = npl_stats(s, truth);
  CHECK(vacuous.mean_count == 0.0);
  CHECK(vacuous.accuracy == 1.0);

  // Ten negatives, exactly one on a true class.
  s.k = 1;
  for (std::size_t c = 0; c < 5; ++c) s.negative_mask.set(0, c + 1, true);
  for (std::size_t c : {0u, 1u, 2u, 3u, 4u}) s.negative_mask.set(1, c, true);
  const auto st = npl_stats(s, truth);
  CHECK(st.negatives == 10);
  CHECK(st.wrong == 1);
  CHECK(st.accuracy == doctest::Approx(0.9));
  CHECK(st.mean_count == 5.0);

  s.negative_mask.set(1, 1, false);
  CHECK(npl_stats(s, truth).accuracy == 1.0);

  NplAccumulator acc;
  s.k = 2;
  acc.add(s, truth);
  s.k = 4;
  acc.add(s, truth);
  CHECK(acc.mean_k() == 3.0);
  CHECK(acc.stats().negatives == 18);
  CHECK(acc.stats().accuracy == 1.0);
}

TEST_CASE("topk_accuracy") {
  std::mt19937_64 rng(2);
  const Matrix p = random_probs(rng, 64, 10);
  std::vector<std::size_t> labels(64);
  std::uniform_int_distribution<std::size_t> cls(0, 9);
  for (auto& y : labels) y = cls(rng);
  const ProbabilityBatch batch(p);
  double prev = 0.0;
  for (std::size_t k = 1; k <= 10; ++k) {
    std::size_t hits = 0;
    for (Eigen::Index i = 0; i < 64; ++i) {
      // Containment scan: count classes that beat the label, ties to the lower index.
      const auto y = static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)]);
      std::size_t ahead = 0;
      for (Eigen::Index c = 0; c < 10; ++c) {
        ahead += (p(i, c) > p(i, y) || (p(i, c) == p(i, y) && c < y)) ? 1 : 0;
      }
      hits += ahead < k ? 1 : 0;
    }
    const double acc = topk_accuracy(batch, labels, k);
    CHECK(acc == doctest::Approx(static_cast<double>(hits) / 64.0));
    CHECK(acc >= prev);
    prev = acc;
  }
  CHECK(prev == 1.0);
  CHECK_THROWS_AS(topk_accuracy(batch, labels, 0), InvalidArgument);
  CHECK_THROWS_AS(topk_accuracy(batch, labels, 11), InvalidArgument);
}

TEST_CASE("entropy_histogram") {
  const auto edges = default_entropy_edges(4);
  CHECK(edges.front() == 0.0);
  CHECK(edges[1] == 0.25);
  CHECK(edges.back() == doctest::Approx(std::log(4.0)));
  CHECK(std::is_sorted(edges.begin(), edges.end()));

  const auto hot = entropy_histogram(ProbabilityBatch(one_hot({0, 1, 3}, 4)), edges);
  CHECK(hot.front() == 3);
  const auto flat = entropy_histogram(ProbabilityBatch(Matrix::Constant(7, 4, 0.25)), edges);
  CHECK(flat.back() == 7);

  std::mt19937_64 rng(3);
  const Matrix p = random_probs(rng, 200, 4, 3.0);
  const auto counts = entropy_histogram(ProbabilityBatch(p), edges);
  CHECK(counts.size() == edges.size() - 1);
  std::vector<std::size_t> oracle(edges.size() - 1, 0);
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double h = entropy(row_span(p, i));
    std::size_t bin = 0;
    while (bin + 1 < oracle.size() && h >= edges[bin + 1]) ++bin;
    ++oracle[bin];
  }
  CHECK(counts == oracle);
  CHECK(std::accumulate(counts.begin(), counts.end(), std::size_t{0}) == 200);
}

TEST_CASE("step_timer") {
  CHECK(step_timer(std::vector<double>{0.5, 0.5, 0.5}) == 0.5);
  CHECK(step_timer(std::vector<double>{1.0, 3.0}) == 2.0);
  CHECK_THROWS_AS(step_timer(std::vector<double>{}), InvalidArgument);
}

TEST_CASE("metrics writer header and rows") {
  std::ostringstream os;
  MetricsWriter w(os, 3, 2);
  MetricsRecord r;
  r.iteration = 250;
  r.test_accuracy = 0.5;
  r.topk_accuracy = {0.5, 0.75, 1.0};
  r.entropy_histogram = {4, 6};
  r.step_time = 123.0;
  w.write(r);
  const std::string text = os.str();
  const auto header = text.substr(0, text.find('\n'));
  CHECK(header.rfind("iteration,test_accuracy,pseudo_label_ratio", 0) == 0);
  CHECK(header.find("top3_accuracy") != std::string::npos);
  CHECK(header.find("step_time") == std::string::npos);
  const auto cols = MetricsWriter::columns(3, 2);
  CHECK(static_cast<std::size_t>(std::count(header.begin(), header.end(), ',')) + 1 == cols.size());
  CHECK(text.find("\n250,0.5,") != std::string::npos);
}
