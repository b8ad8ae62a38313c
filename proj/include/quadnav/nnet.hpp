#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace quadnav::nnet {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dense 3D tensor, row-major (h, w, c). Vectors are stored as 1x1xN.
struct Tensor3 {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> data;

  Tensor3() = default;
  Tensor3(int h, int w, int c)
      : height(h), width(w), channels(c),
        data(static_cast<std::size_t>(h) * w * c, 0.0f) {}

  float& at(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  const float& at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::size_t size() const { return data.size(); }
};

enum class LayerKind { Conv3x3, MaxPool2x2s2, Dense, Tanh, Clip };
enum class PoolMode { Max, Mean };

struct Shape3 {
  int h = 1;
  int w = 1;
  int c = 0;
  std::size_t count() const {
    return static_cast<std::size_t>(h) * w * c;
  }
  bool operator==(const Shape3&) const = default;
};

struct LayerSpec {
  LayerKind kind = LayerKind::Dense;
  Shape3 in_shape;
  Shape3 out_shape;
  PoolMode pool_mode = PoolMode::Max;  // only meaningful for MaxPool2x2s2

  std::size_t param_count() const;
};

// Validates that out/in shapes chain and computes missing out shapes.
// Dense layers consume the previous shape flattened.
std::vector<LayerSpec> chain_layers(std::vector<LayerSpec> layers);

struct ParamSegment {
  int layer_id = 0;
  std::size_t offset = 0;
  std::size_t length = 0;
};

struct FlatParams {
  std::vector<float> values;
  std::vector<ParamSegment> layout;
};

// Kernels. Conv weights are laid out (dy, dx, c_in, c_out) row-major,
// followed by the bias when stored in a parameter block. Dense weights are
// (in, out) row-major: out[o] = b[o] + sum_i in[i] * w[i*n_out + o].
Tensor3 conv3x3_valid(const Tensor3& input, std::span<const float> weights,
                      std::span<const float> bias);
Tensor3 maxpool2x2s2(const Tensor3& input, PoolMode mode = PoolMode::Max);
std::vector<float> dense(std::span<const float> input, std::span<const float> weights,
                         std::span<const float> bias, int n_out);
void tanh_inplace(std::span<float> v);
void clip_unit_inplace(std::span<float> v);

std::size_t layers_param_count(const std::vector<LayerSpec>& layers);

// Forward pass over a layer list reading parameters from an external flat
// span (must hold exactly layers_param_count values).
std::vector<float> forward_layers(const std::vector<LayerSpec>& layers,
                                  std::span<const float> params, const Tensor3& input);

// A feed-forward stack with one contiguous parameter vector.
struct Network {
  std::vector<LayerSpec> layers;
  std::vector<float> params;

  static Network zeros(std::vector<LayerSpec> layers);
  std::size_t param_count() const;
  std::vector<float> forward(const Tensor3& input) const;
  std::vector<float> forward(std::span<const float> input) const;
};

FlatParams flatten_params(const Network& net);
Network unflatten_params(const FlatParams& flat, std::vector<LayerSpec> layers);

}  // namespace quadnav::nnet
