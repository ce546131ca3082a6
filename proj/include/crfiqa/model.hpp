#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "crfiqa/classifiability.hpp"
#include "crfiqa/matrix.hpp"

namespace crfiqa {

enum class Activation { relu, tanh };

struct BackboneConfig {
  int input_dim = 0;
  std::vector<int> hidden_dims;  // empty: a single linear map input -> embedding
  int embedding_dim = 0;
  Activation activation = Activation::relu;
};

struct DenseLayer {
  int in = 0;
  int out = 0;
  std::vector<double> weight;  // row-major, out x in
  std::vector<double> bias;    // out
};

// Trainable state: dense backbone, unit-norm class centers, and the affine
// quality head. The head reads the raw (pre-normalization) embedding by
// default; head_on_normalized switches it to the unit-norm one.
struct ModelState {
  BackboneConfig backbone;
  int num_classes = 0;
  bool head_on_normalized = false;

  std::vector<DenseLayer> layers;  // hidden layers, then the embedding layer
  ClassCenterMatrix centers;
  std::vector<double> head_weight;
  double head_bias = 0.0;
};

// Weights uniform in +-1/sqrt(fan_in), biases zero, centers column-normalized,
// head zero. Draw order: layer weights in layer order, then center columns.
ModelState init_model(const BackboneConfig& config, int num_classes, uint64_t seed,
                      bool head_on_normalized = false);

struct ForwardResult {
  std::vector<double> embedding;   // backbone output, pre-normalization
  std::vector<double> normalized;  // unit norm
  std::vector<double> cosines;     // against every class center, clamped
  double quality = 0.0;            // regression head output
};

ForwardResult forward(const ModelState& state, std::span<const double> input);

// Forward pass retaining per-layer activations for the backward pass.
struct ForwardTrace {
  std::vector<std::vector<double>> hidden_pre;   // one per hidden layer
  std::vector<std::vector<double>> hidden_post;
  std::vector<double> embedding;
  double embedding_norm = 0.0;
  std::vector<double> normalized;
  std::vector<double> cosines;
  double quality = 0.0;
};

ForwardTrace forward_traced(const ModelState& state, std::span<const double> input);

// Label-free quality inference, one score per input row.
std::vector<double> predict_quality(const ModelState& state, const Matrix& inputs);

// Little-endian binary checkpoint; layout documented in the README.
void save_checkpoint(const ModelState& state, const std::string& path);
ModelState load_checkpoint(const std::string& path);

// All trainable blocks in canonical order: (weight, bias) per layer, centers,
// head weight, head bias. Gradient and velocity containers mirror this order.
std::vector<std::span<double>> parameter_blocks(ModelState& state);
std::vector<std::span<const double>> parameter_blocks(const ModelState& state);

struct TrainingSet {
  Matrix inputs;            // n x input_dim
  std::vector<int> labels;  // n, class ids dense in [0, C)
};

}  // namespace crfiqa
