#include "fullmatch/data.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

namespace fullmatch {

std::vector<std::size_t> Dataset::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (tags[i] == split) out.push_back(i);
  }
  return out;
}

Matrix Dataset::gather(const std::vector<std::size_t>& idx) const {
  Matrix out(static_cast<Eigen::Index>(idx.size()), features.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    out.row(static_cast<Eigen::Index>(r)) = features.row(static_cast<Eigen::Index>(idx[r]));
  }
  return out;
}

namespace {

// Blob centroids: a regular polygon with neighbouring vertices `separation`
// apart in the first two coordinates, or a line when D = 1.
Matrix blob_centroids(std::size_t classes, std::size_t dim, double separation) {
  Matrix centroids = Matrix::Zero(static_cast<Eigen::Index>(classes), static_cast<Eigen::Index>(dim));
  if (dim == 1 || classes == 2) {
    for (std::size_t c = 0; c < classes; ++c) {
      centroids(static_cast<Eigen::Index>(c), 0) = separation * (static_cast<double>(c) - 0.5 * (classes - 1.0));
    }
    return centroids;
  }
  const double radius = separation / (2.0 * std::sin(std::numbers::pi / static_cast<double>(classes)));
  for (std::size_t c = 0; c < classes; ++c) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(classes);
    centroids(static_cast<Eigen::Index>(c), 0) = radius * std::cos(angle);
    centroids(static_cast<Eigen::Index>(c), 1) = radius * std::sin(angle);
  }
  return centroids;
}

}  // namespace

Dataset generate(const DatasetSpec& spec, std::uint64_t seed) {
  const std::size_t C = spec.classes;
  if (C < 2) throw InvalidArgument("generate: need at least two classes");
  if (spec.samples < 10 * C) throw InvalidArgument("generate: need at least 10 samples per class");
  if (!(spec.noise >= 0.0)) throw InvalidArgument("generate: noise must be >= 0");
  if (spec.dim < 1) throw InvalidArgument("generate: dim must be >= 1");
  if (spec.kind == DatasetKind::two_moons && C != 2) throw InvalidArgument("generate: two_moons supports C = 2 only");
  if (spec.kind != DatasetKind::gaussian_blobs && spec.dim < 2) {
    throw InvalidArgument("generate: " + to_string(spec.kind) + " needs dim >= 2");
  }

  Rng rng = make_stream(seed, "data");
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Dataset ds;
  ds.num_classes = C;
  ds.features = Matrix::Zero(static_cast<Eigen::Index>(spec.samples), static_cast<Eigen::Index>(spec.dim));
  ds.labels.resize(spec.samples);
  ds.tags.assign(spec.samples, Split::unassigned);
  const Matrix centroids = blob_centroids(C, spec.dim, spec.separation);

  for (std::size_t i = 0; i < spec.samples; ++i) {
    const std::size_t c = i % C;
    ds.labels[i] = c;
    auto row = ds.features.row(static_cast<Eigen::Index>(i));
    switch (spec.kind) {
      case DatasetKind::gaussian_blobs:
        row = centroids.row(static_cast<Eigen::Index>(c));
        break;
      case DatasetKind::two_moons: {
        const double t = std::numbers::pi * uniform(rng);
        if (c == 0) {
          row(0) = spec.separation * std::cos(t);
          row(1) = spec.separation * std::sin(t);
        } else {
          row(0) = spec.separation * (1.0 - std::cos(t));
          row(1) = spec.separation * (0.5 - std::sin(t));
        }
        break;
      }
      case DatasetKind::concentric_rings: {
        const double t = 2.0 * std::numbers::pi * uniform(rng);
        const double r = spec.separation * static_cast<double>(c + 1);
        row(0) = r * std::cos(t);
        row(1) = r * std::sin(t);
        break;
      }
    }
    if (spec.noise > 0.0) {
      for (Eigen::Index d = 0; d < row.size(); ++d) row(d) += spec.noise * gauss(rng);
    }
  }
  return ds;
}

Dataset split(Dataset dataset, std::size_t labels_per_class, double test_fraction, std::uint64_t seed) {
  const std::size_t C = dataset.num_classes;
  const std::size_t N = dataset.size();
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw InvalidArgument("split: test_fraction must lie in (0, 1)");
  if (labels_per_class < 1) throw InvalidArgument("split: labels_per_class must be >= 1");
  const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(N) * test_fraction));
  if (n_test < C) throw InvalidArgument("split: test set too small to hold every class");

  std::vector<std::vector<std::size_t>> by_class(C);
  for (std::size_t i = 0; i < N; ++i) by_class[dataset.labels[i]].push_back(i);

  Rng rng = make_stream(seed, "split");
  std::fill(dataset.tags.begin(), dataset.tags.end(), Split::unassigned);
  for (std::size_t c = 0; c < C; ++c) {
    auto& members = by_class[c];
    const std::size_t test_c = n_test / C + (c < n_test % C ? 1 : 0);
    if (members.size() < test_c + labels_per_class) {
      std::ostringstream os;
      os << "split: class " << c << " has " << members.size() << " samples, needs " << test_c << " test + "
         << labels_per_class << " labeled";
      throw InvalidArgument(os.str());
    }
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t j = 0; j < members.size(); ++j) {
      Split tag = Split::unlabeled;
      if (j < test_c) {
        tag = Split::test;
      } else if (j < test_c + labels_per_class) {
        tag = Split::labeled;
      }
      dataset.tags[members[j]] = tag;
    }
  }
  return dataset;
}

BatchIterator::BatchIterator(const Dataset& dataset, std::size_t labeled_batch, std::size_t unlabeled_batch,
                             std::uint64_t seed)
    : labeled_batch_(labeled_batch), unlabeled_batch_(unlabeled_batch), rng_(make_stream(seed, "batching")) {
  if (labeled_batch < 1 || unlabeled_batch < 1) throw InvalidArgument("BatchIterator: batch sizes must be >= 1");
  labeled_.members = dataset.indices(Split::labeled);
  unlabeled_.members = dataset.indices(Split::unlabeled);
  if (labeled_.members.empty()) throw InvalidArgument("BatchIterator: dataset has no labeled samples");
}

std::vector<std::size_t> BatchIterator::draw(Pool& pool, std::size_t count) {
  std::vector<std::size_t> out;
  if (pool.members.empty()) return out;
  out.reserve(count);
  while (out.size() < count) {
    if (pool.cursor == pool.order.size()) {
      pool.order = pool.members;
      std::shuffle(pool.order.begin(), pool.order.end(), rng_);
      pool.cursor = 0;
    }
    out.push_back(pool.order[pool.cursor++]);
  }
  return out;
}

BatchIndices BatchIterator::next() {
  BatchIndices batch;
  batch.labeled = draw(labeled_, labeled_batch_);
  batch.unlabeled = draw(unlabeled_, unlabeled_batch_);
  return batch;
}

std::string to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::gaussian_blobs: return "gaussian_blobs";
    case DatasetKind::two_moons: return "two_moons";
    case DatasetKind::concentric_rings: return "concentric_rings";
  }
  return "?";
}

DatasetKind parse_dataset_kind(const std::string& name) {
  if (name == "gaussian_blobs") return DatasetKind::gaussian_blobs;
  if (name == "two_moons") return DatasetKind::two_moons;
  if (name == "concentric_rings") return DatasetKind::concentric_rings;
  throw InvalidArgument("unknown dataset kind '" + name + "'");
}

std::string to_string(Split split) {
  switch (split) {
    case Split::unassigned: return "unassigned";
    case Split::labeled: return "labeled";
    case Split::unlabeled: return "unlabeled";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(const std::string& name) {
  if (name == "unassigned") return Split::unassigned;
  if (name == "labeled") return Split::labeled;
  if (name == "unlabeled") return Split::unlabeled;
  if (name == "test") return Split::test;
  throw InvalidArgument("unknown split tag '" + name + "'");
}

void write_dataset(std::ostream& os, const Dataset& dataset) {
  os << dataset.size() << ',' << dataset.dim() << ',' << dataset.num_classes << '\n';
  os << std::setprecision(17);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    for (std::size_t d = 0; d < dataset.dim(); ++d) {
      os << dataset.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) << ',';
    }
    os << dataset.labels[i] << ',' << to_string(dataset.tags[i]) << '\n';
  }
}

Dataset read_dataset(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidArgument("read_dataset: missing header");
  std::size_t n = 0, d = 0, c = 0;
  char comma1 = 0, comma2 = 0;
  std::istringstream header(line);
  if (!(header >> n >> comma1 >> d >> comma2 >> c) || comma1 != ',' || comma2 != ',') {
    throw InvalidArgument("read_dataset: malformed header '" + line + "'");
  }
  Dataset ds;
  ds.num_classes = c;
  ds.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  ds.labels.resize(n);
  ds.tags.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(is, line)) throw InvalidArgument("read_dataset: expected " + std::to_string(n) + " samples");
    std::istringstream fields(line);
    std::string cell;
    for (std::size_t j = 0; j < d; ++j) {
      if (!std::getline(fields, cell, ',')) throw InvalidArgument("read_dataset: short row " + std::to_string(i));
      ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = std::stod(cell);
    }
    if (!std::getline(fields, cell, ',')) throw InvalidArgument("read_dataset: missing label on row " + std::to_string(i));
    ds.labels[i] = static_cast<std::size_t>(std::stoul(cell));
    if (ds.labels[i] >= c) throw InvalidArgument("read_dataset: label out of range on row " + std::to_string(i));
    if (!std::getline(fields, cell, ',')) throw InvalidArgument("read_dataset: missing split on row " + std::to_string(i));
    ds.tags[i] = parse_split(cell);
  }
  return ds;
}

}  // namespace fullmatch
