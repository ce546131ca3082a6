#include "crfiqa/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "crfiqa/errors.hpp"
#include "crfiqa/geometry.hpp"
#include "crfiqa/rng.hpp"

namespace crfiqa {

namespace {

void validate_config(const BackboneConfig& config) {
  if (config.input_dim < 1) throw ConfigError("input_dim must be positive");
  for (int h : config.hidden_dims) {
    if (h < 1) throw ConfigError("hidden dims must be positive");
  }
  if (config.embedding_dim < 2) throw ConfigError("embedding_dim must be >= 2");
}

double activate(Activation a, double x) {
  switch (a) {
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::tanh: return std::tanh(x);
  }
  return x;
}

std::vector<double> dense_forward(const DenseLayer& layer, std::span<const double> x) {
  std::vector<double> y(layer.out, 0.0);
  for (int o = 0; o < layer.out; ++o) {
    double acc = layer.bias[o];
    const double* w = layer.weight.data() + static_cast<std::size_t>(o) * layer.in;
    for (int k = 0; k < layer.in; ++k) acc += w[k] * x[k];
    y[o] = acc;
  }
  return y;
}

}  // namespace

ModelState init_model(const BackboneConfig& config, int num_classes, uint64_t seed,
                      bool head_on_normalized) {
  validate_config(config);
  if (num_classes < 2) throw InsufficientClassesError("init_model: need at least 2 classes");

  ModelState state;
  state.backbone = config;
  state.num_classes = num_classes;
  state.head_on_normalized = head_on_normalized;

  Rng rng(seed);
  int prev = config.input_dim;
  std::vector<int> outs = config.hidden_dims;
  outs.push_back(config.embedding_dim);
  for (int out : outs) {
    DenseLayer layer;
    layer.in = prev;
    layer.out = out;
    layer.weight.resize(static_cast<std::size_t>(out) * prev);
    layer.bias.assign(out, 0.0);
    const double bound = 1.0 / std::sqrt(static_cast<double>(prev));
    for (double& w : layer.weight) w = rng.uniform(-bound, bound);
    state.layers.push_back(std::move(layer));
    prev = out;
  }

  state.centers = ClassCenterMatrix(config.embedding_dim, num_classes);
  const double cbound = 1.0 / std::sqrt(static_cast<double>(config.embedding_dim));
  for (double& v : state.centers.data) v = rng.uniform(-cbound, cbound);
  state.centers.renormalize_columns();

  state.head_weight.assign(config.embedding_dim, 0.0);
  state.head_bias = 0.0;
  return state;
}

ForwardTrace forward_traced(const ModelState& state, std::span<const double> input) {
  if (static_cast<int>(input.size()) != state.backbone.input_dim) {
    throw DimensionError("forward: input dim " + std::to_string(input.size()) +
                         " does not match model input_dim " +
                         std::to_string(state.backbone.input_dim));
  }

  ForwardTrace trace;
  const std::size_t num_hidden = state.layers.size() - 1;
  trace.hidden_pre.reserve(num_hidden);
  trace.hidden_post.reserve(num_hidden);

  std::vector<double> h(input.begin(), input.end());
  for (std::size_t l = 0; l < num_hidden; ++l) {
    std::vector<double> pre = dense_forward(state.layers[l], h);
    std::vector<double> post(pre.size());
    for (std::size_t k = 0; k < pre.size(); ++k) {
      post[k] = activate(state.backbone.activation, pre[k]);
    }
    h = post;
    trace.hidden_pre.push_back(std::move(pre));
    trace.hidden_post.push_back(std::move(post));
  }

  trace.embedding = dense_forward(state.layers.back(), h);
  trace.embedding_norm = l2_norm(trace.embedding);
  if (trace.embedding_norm == 0.0) {
    throw NormalizationError("forward: zero-norm embedding");
  }
  trace.normalized.resize(trace.embedding.size());
  for (std::size_t k = 0; k < trace.embedding.size(); ++k) {
    trace.normalized[k] = trace.embedding[k] / trace.embedding_norm;
  }

  trace.cosines.resize(state.num_classes);
  for (int j = 0; j < state.num_classes; ++j) {
    trace.cosines[j] = clamp_cosine(dot(trace.normalized, state.centers.column(j)));
  }

  const std::vector<double>& head_in =
      state.head_on_normalized ? trace.normalized : trace.embedding;
  trace.quality = dot(state.head_weight, head_in) + state.head_bias;
  return trace;
}

ForwardResult forward(const ModelState& state, std::span<const double> input) {
  ForwardTrace trace = forward_traced(state, input);
  return {std::move(trace.embedding), std::move(trace.normalized), std::move(trace.cosines),
          trace.quality};
}

std::vector<double> predict_quality(const ModelState& state, const Matrix& inputs) {
  if (inputs.rows < 1) throw DimensionError("predict_quality: empty input");
  std::vector<double> out(inputs.rows);
  for (int i = 0; i < inputs.rows; ++i) {
    out[i] = forward_traced(state, inputs.row(i)).quality;
  }
  return out;
}

namespace {

constexpr char kMagic[4] = {'C', 'R', 'F', 'Q'};
constexpr uint32_t kFormatVersion = 1;

class BinaryWriter {
 public:
  explicit BinaryWriter(const std::string& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot open '" + path + "' for writing");
  }

  void bytes(const char* data, std::size_t n) { out_.write(data, static_cast<std::streamsize>(n)); }

  void u8(uint8_t v) { bytes(reinterpret_cast<const char*>(&v), 1); }

  void u32(uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    bytes(b, 4);
  }

  void f64(double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    bytes(b, 8);
  }

  void close() {
    out_.close();
    if (!out_) throw IoError("error writing '" + path_ + "'");
  }

 private:
  std::string path_;
  std::ofstream out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open '" + path + "' for reading");
  }

  void bytes(char* data, std::size_t n) {
    in_.read(data, static_cast<std::streamsize>(n));
    if (in_.gcount() != static_cast<std::streamsize>(n)) {
      throw IoError("unexpected end of file in '" + path_ + "'");
    }
  }

  uint8_t u8() {
    char b;
    bytes(&b, 1);
    return static_cast<uint8_t>(b);
  }

  uint32_t u32() {
    char b[4];
    bytes(b, 4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(b[i])) << (8 * i);
    return v;
  }

  double f64() {
    char b[8];
    bytes(b, 8);
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(static_cast<uint8_t>(b[i])) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }

  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ifstream in_;
};

}  // namespace

void save_checkpoint(const ModelState& state, const std::string& path) {
  BinaryWriter w(path);
  w.bytes(kMagic, 4);
  w.u32(kFormatVersion);
  w.u32(static_cast<uint32_t>(state.backbone.input_dim));
  w.u32(static_cast<uint32_t>(state.backbone.hidden_dims.size()));
  for (int h : state.backbone.hidden_dims) w.u32(static_cast<uint32_t>(h));
  w.u32(static_cast<uint32_t>(state.backbone.embedding_dim));
  w.u8(state.backbone.activation == Activation::relu ? 0 : 1);
  w.u8(state.head_on_normalized ? 1 : 0);
  w.u32(static_cast<uint32_t>(state.num_classes));
  for (const DenseLayer& layer : state.layers) {
    for (double v : layer.weight) w.f64(v);
    for (double v : layer.bias) w.f64(v);
  }
  for (double v : state.centers.data) w.f64(v);
  for (double v : state.head_weight) w.f64(v);
  w.f64(state.head_bias);
  w.close();
}

ModelState load_checkpoint(const std::string& path) {
  BinaryReader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw IoError("'" + path + "' is not a checkpoint file");
  }
  const uint32_t version = r.u32();
  if (version != kFormatVersion) {
    throw IoError("'" + path + "': unsupported checkpoint version " + std::to_string(version));
  }

  BackboneConfig config;
  config.input_dim = static_cast<int>(r.u32());
  const uint32_t num_hidden = r.u32();
  if (num_hidden > 1024) throw IoError("'" + path + "': implausible hidden layer count");
  for (uint32_t i = 0; i < num_hidden; ++i) config.hidden_dims.push_back(static_cast<int>(r.u32()));
  config.embedding_dim = static_cast<int>(r.u32());
  const uint8_t act = r.u8();
  if (act > 1) throw IoError("'" + path + "': unknown activation code");
  config.activation = act == 0 ? Activation::relu : Activation::tanh;
  const bool head_on_normalized = r.u8() != 0;
  const int num_classes = static_cast<int>(r.u32());

  ModelState state = init_model(config, num_classes, 0, head_on_normalized);
  for (DenseLayer& layer : state.layers) {
    for (double& v : layer.weight) v = r.f64();
    for (double& v : layer.bias) v = r.f64();
  }
  for (double& v : state.centers.data) v = r.f64();
  for (double& v : state.head_weight) v = r.f64();
  state.head_bias = r.f64();
  return state;
}

std::vector<std::span<double>> parameter_blocks(ModelState& state) {
  std::vector<std::span<double>> blocks;
  for (DenseLayer& layer : state.layers) {
    blocks.emplace_back(layer.weight);
    blocks.emplace_back(layer.bias);
  }
  blocks.emplace_back(state.centers.data);
  blocks.emplace_back(state.head_weight);
  blocks.emplace_back(&state.head_bias, 1);
  return blocks;
}

std::vector<std::span<const double>> parameter_blocks(const ModelState& state) {
  std::vector<std::span<const double>> blocks;
  for (const DenseLayer& layer : state.layers) {
    blocks.emplace_back(layer.weight);
    blocks.emplace_back(layer.bias);
  }
  blocks.emplace_back(state.centers.data);
  blocks.emplace_back(state.head_weight);
  blocks.emplace_back(&state.head_bias, 1);
  return blocks;
}

}  // namespace crfiqa
