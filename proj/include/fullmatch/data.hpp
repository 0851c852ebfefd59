#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "fullmatch/core_math.hpp"
#include "fullmatch/rng.hpp"

namespace fullmatch {

enum class DatasetKind { gaussian_blobs, two_moons, concentric_rings };
enum class Split : std::uint8_t { unassigned, labeled, unlabeled, test };

struct DatasetSpec {
  DatasetKind kind = DatasetKind::gaussian_blobs;
  std::size_t classes = 4;
  std::size_t samples = 2400;
  std::size_t dim = 2;
  /// Per-coordinate Gaussian noise sigma.
  double noise = 1.0;
  /// Blobs: distance between neighbouring centroids. Rings: radius step. Moons: moon radius.
  double separation = 3.0;
};

/// Features, true labels and split tags. True labels of unlabeled samples
/// are kept only for diagnostics.
struct Dataset {
  Matrix features;
  std::vector<std::size_t> labels;
  std::vector<Split> tags;
  std::size_t num_classes = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(features.cols()); }
  std::vector<std::size_t> indices(Split split) const;
  /// Gathers feature rows in the given order.
  Matrix gather(const std::vector<std::size_t>& idx) const;

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.num_classes == b.num_classes && a.labels == b.labels && a.tags == b.tags &&
           a.features.rows() == b.features.rows() && a.features.cols() == b.features.cols() &&
           a.features == b.features;
  }
};

/// Class-balanced synthetic dataset (sample i has class i mod C), all tags unassigned.
Dataset generate(const DatasetSpec& spec, std::uint64_t seed);

/// Stratified test split, then labels_per_class labeled samples per class;
/// the rest of the training portion is unlabeled.
Dataset split(Dataset dataset, std::size_t labels_per_class, double test_fraction, std::uint64_t seed);

/// Indices of one step: a labeled batch and an unlabeled batch.
struct BatchIndices {
  std::vector<std::size_t> labeled;
  std::vector<std::size_t> unlabeled;
};

/// Endless stream of batches. Each pool is walked in a fresh deterministic
/// permutation per epoch; batches run across epoch boundaries, and the small
/// labeled pool cycles independently of the unlabeled one.
class BatchIterator {
 public:
  BatchIterator(const Dataset& dataset, std::size_t labeled_batch, std::size_t unlabeled_batch, std::uint64_t seed);

  BatchIndices next();

 private:
  struct Pool {
    std::vector<std::size_t> members;
    std::vector<std::size_t> order;
    std::size_t cursor = 0;
  };
  std::vector<std::size_t> draw(Pool& pool, std::size_t count);

  Pool labeled_;
  Pool unlabeled_;
  std::size_t labeled_batch_;
  std::size_t unlabeled_batch_;
  Rng rng_;
};

std::string to_string(DatasetKind kind);
DatasetKind parse_dataset_kind(const std::string& name);
std::string to_string(Split split);
Split parse_split(const std::string& name);

/// Delimited text: "N,D,C" header, then per sample "f_1,...,f_D,label,split".
void write_dataset(std::ostream& os, const Dataset& dataset);
Dataset read_dataset(std::istream& is);

}  // namespace fullmatch
