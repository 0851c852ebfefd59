#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fullmatch/core_math.hpp"

namespace fullmatch {

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out

  friend bool operator==(const DenseLayer& a, const DenseLayer& b) {
    return a.weight.rows() == b.weight.rows() && a.weight.cols() == b.weight.cols() && a.weight == b.weight &&
           a.bias.size() == b.bias.size() && a.bias == b.bias;
  }
};

/// MLP classifier: rectifier on hidden layers, identity on the output layer.
struct ModelParameters {
  std::vector<DenseLayer> layers;
  /// Bumped on every in-place update so stale forward caches can be detected.
  std::uint64_t version = 0;

  std::vector<std::size_t> layer_dims() const;
  std::size_t input_dim() const { return static_cast<std::size_t>(layers.front().weight.cols()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(layers.back().weight.rows()); }
  std::size_t parameter_count() const;
  bool all_finite() const;

  /// Parameter equality; ignores the version counter.
  friend bool operator==(const ModelParameters& a, const ModelParameters& b) { return a.layers == b.layers; }
};

/// Same shape as ModelParameters.
struct ModelGradients {
  std::vector<DenseLayer> layers;

  bool congruent_with(const ModelParameters& params) const;
  bool all_finite() const;
};

/// Intermediate activations of one batched forward pass.
struct ForwardCache {
  std::vector<Matrix> inputs;       // input to each layer
  std::vector<Matrix> pre_activations;
  std::uint64_t params_version = 0;
  const ModelParameters* params = nullptr;
};

/// Weights ~ N(0, 1/fan_in), zero biases, fully determined by seed.
ModelParameters init_model(std::span<const std::size_t> layer_dims, std::uint64_t seed);

/// Batched forward pass over rows of x (N x in). Returns N x C logits.
Matrix forward(const ModelParameters& params, const Matrix& x, ForwardCache* cache = nullptr);

/// Single-sample forward pass.
std::vector<double> forward(const ModelParameters& params, std::span<const double> x);

/// Reverse-mode gradients given dL/dlogits for the cached batch.
ModelGradients backward(const ModelParameters& params, const ForwardCache& cache, const Matrix& grad_logits);

ModelGradients zeros_like(const ModelParameters& params);

/// Flat view helpers used by gradient checks, in checkpoint order
/// (per layer: row-major weights, then biases).
std::vector<double> flatten(const std::vector<DenseLayer>& layers);
void unflatten(std::span<const double> flat, std::vector<DenseLayer>& layers);

/// Text checkpoint, see README for the format.
void write_checkpoint(std::ostream& os, const ModelParameters& params);
ModelParameters read_checkpoint(std::istream& is);
void save_checkpoint(const std::string& path, const ModelParameters& params);
ModelParameters load_checkpoint(const std::string& path);

}  // namespace fullmatch
