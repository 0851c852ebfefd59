#include "fullmatch/model.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "fullmatch/rng.hpp"

namespace fullmatch {

namespace {

constexpr const char* kCheckpointMagic = "fullmatch-checkpoint";
constexpr int kCheckpointVersion = 1;

}  // namespace

std::vector<std::size_t> ModelParameters::layer_dims() const {
  std::vector<std::size_t> dims;
  if (layers.empty()) return dims;
  dims.push_back(input_dim());
  for (const auto& layer : layers) dims.push_back(static_cast<std::size_t>(layer.weight.rows()));
  return dims;
}

std::size_t ModelParameters::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers) n += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
  return n;
}

bool ModelParameters::all_finite() const {
  for (const auto& layer : layers) {
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
  }
  return true;
}

bool ModelGradients::congruent_with(const ModelParameters& params) const {
  if (layers.size() != params.layers.size()) return false;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].weight.rows() != params.layers[l].weight.rows() ||
        layers[l].weight.cols() != params.layers[l].weight.cols() ||
        layers[l].bias.size() != params.layers[l].bias.size()) {
      return false;
    }
  }
  return true;
}

bool ModelGradients::all_finite() const {
  for (const auto& layer : layers) {
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
  }
  return true;
}

ModelParameters init_model(std::span<const std::size_t> layer_dims, std::uint64_t seed) {
  if (layer_dims.size() < 2) throw InvalidArgument("init_model: need at least input and output dims");
  for (std::size_t d : layer_dims) {
    if (d < 1) throw InvalidArgument("init_model: layer dims must be >= 1");
  }
  Rng rng = make_stream(seed, "init");
  ModelParameters params;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const auto in = static_cast<Eigen::Index>(layer_dims[l]);
    const auto out = static_cast<Eigen::Index>(layer_dims[l + 1]);
    std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(in)));
    DenseLayer layer;
    layer.weight.resize(out, in);
    for (Eigen::Index r = 0; r < out; ++r) {
      for (Eigen::Index c = 0; c < in; ++c) layer.weight(r, c) = dist(rng);
    }
    layer.bias = Vector::Zero(out);
    params.layers.push_back(std::move(layer));
  }
  return params;
}

Matrix forward(const ModelParameters& params, const Matrix& x, ForwardCache* cache) {
  if (params.layers.empty()) throw InvalidArgument("forward: model has no layers");
  if (static_cast<std::size_t>(x.cols()) != params.input_dim()) {
    std::ostringstream os;
    os << "forward: input has " << x.cols() << " features, model expects " << params.input_dim();
    throw InvalidArgument(os.str());
  }
  if (cache) {
    cache->inputs.clear();
    cache->pre_activations.clear();
    cache->params_version = params.version;
    cache->params = &params;
  }
  Matrix h = x;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    Matrix z = h * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    if (cache) {
      cache->inputs.push_back(std::move(h));
      cache->pre_activations.push_back(z);
    }
    if (l + 1 < params.layers.size()) {
      h = z.cwiseMax(0.0);
    } else {
      h = std::move(z);
    }
  }
  return h;
}

std::vector<double> forward(const ModelParameters& params, std::span<const double> x) {
  Matrix row(1, static_cast<Eigen::Index>(x.size()));
  for (std::size_t j = 0; j < x.size(); ++j) row(0, static_cast<Eigen::Index>(j)) = x[j];
  const Matrix logits = forward(params, row);
  return {logits.data(), logits.data() + logits.size()};
}

ModelGradients zeros_like(const ModelParameters& params) {
  ModelGradients grads;
  for (const auto& layer : params.layers) {
    grads.layers.push_back({Matrix::Zero(layer.weight.rows(), layer.weight.cols()), Vector::Zero(layer.bias.size())});
  }
  return grads;
}

ModelGradients backward(const ModelParameters& params, const ForwardCache& cache, const Matrix& grad_logits) {
  if (cache.params != &params || cache.params_version != params.version ||
      cache.inputs.size() != params.layers.size()) {
    throw InvalidArgument("backward: forward cache is stale or belongs to another model");
  }
  const auto& last = cache.pre_activations.back();
  if (grad_logits.rows() != last.rows() || grad_logits.cols() != last.cols()) {
    throw InvalidArgument("backward: upstream gradient shape does not match the cached batch");
  }
  ModelGradients grads = zeros_like(params);
  Matrix delta = grad_logits;
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    if (l + 1 < params.layers.size()) {
      delta = delta.cwiseProduct((cache.pre_activations[l].array() > 0.0).cast<double>().matrix());
    }
    grads.layers[l].weight.noalias() = delta.transpose() * cache.inputs[l];
    grads.layers[l].bias = delta.colwise().sum().transpose();
    if (l > 0) delta = delta * params.layers[l].weight;
  }
  return grads;
}

std::vector<double> flatten(const std::vector<DenseLayer>& layers) {
  std::vector<double> flat;
  for (const auto& layer : layers) {
    flat.insert(flat.end(), layer.weight.data(), layer.weight.data() + layer.weight.size());
    flat.insert(flat.end(), layer.bias.data(), layer.bias.data() + layer.bias.size());
  }
  return flat;
}

void unflatten(std::span<const double> flat, std::vector<DenseLayer>& layers) {
  std::size_t pos = 0;
  for (auto& layer : layers) {
    const auto nw = static_cast<std::size_t>(layer.weight.size());
    const auto nb = static_cast<std::size_t>(layer.bias.size());
    if (pos + nw + nb > flat.size()) throw InvalidArgument("unflatten: flat vector too short");
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), nw, layer.weight.data());
    pos += nw;
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), nb, layer.bias.data());
    pos += nb;
  }
  if (pos != flat.size()) throw InvalidArgument("unflatten: flat vector too long");
}

void write_checkpoint(std::ostream& os, const ModelParameters& params) {
  os << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  const auto dims = params.layer_dims();
  os << "dims";
  for (std::size_t d : dims) os << ' ' << d;
  os << '\n' << std::setprecision(17);
  for (const auto& layer : params.layers) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) os << (c ? " " : "") << layer.weight(r, c);
      os << '\n';
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) os << (r ? " " : "") << layer.bias(r);
    os << '\n';
  }
}

ModelParameters read_checkpoint(std::istream& is) {
  std::string magic;
  int version = 0;
  if (!(is >> magic >> version) || magic != kCheckpointMagic) {
    throw InvalidArgument("read_checkpoint: not a fullmatch checkpoint");
  }
  if (version != kCheckpointVersion) {
    throw InvalidArgument("read_checkpoint: unsupported checkpoint version " + std::to_string(version));
  }
  std::string tag;
  is >> tag;
  if (tag != "dims") throw InvalidArgument("read_checkpoint: missing dims line");
  std::string line;
  std::getline(is, line);
  std::istringstream dims_in(line);
  std::vector<std::size_t> dims;
  for (std::size_t d; dims_in >> d;) dims.push_back(d);
  ModelParameters params = init_model(dims, 0);
  for (auto& layer : params.layers) {
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) {
      if (!(is >> layer.weight.data()[i])) throw InvalidArgument("read_checkpoint: truncated weights");
    }
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) {
      if (!(is >> layer.bias(i))) throw InvalidArgument("read_checkpoint: truncated biases");
    }
  }
  return params;
}

void save_checkpoint(const std::string& path, const ModelParameters& params) {
  std::ofstream os(path);
  if (!os) throw InvalidArgument("save_checkpoint: cannot open " + path);
  write_checkpoint(os, params);
}

ModelParameters load_checkpoint(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument("load_checkpoint: cannot open " + path);
  return read_checkpoint(is);
}

}  // namespace fullmatch
