#include "quadnav/nnet.hpp"

#include <algorithm>
#include <cmath>

namespace quadnav::nnet {

std::size_t LayerSpec::param_count() const {
  switch (kind) {
    case LayerKind::Conv3x3:
      return 9ull * in_shape.c * out_shape.c + out_shape.c;
    case LayerKind::Dense:
      return in_shape.count() * out_shape.c + out_shape.c;
    default:
      return 0;
  }
}

std::vector<LayerSpec> chain_layers(std::vector<LayerSpec> layers) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    LayerSpec& l = layers[i];
    if (i > 0) {
      const Shape3& prev = layers[i - 1].out_shape;
      if (l.kind == LayerKind::Dense) {
        // dense consumes the flattened previous output
        if (l.in_shape.count() != prev.count())
          throw ConfigError("layer " + std::to_string(i) + ": dense input size " +
                            std::to_string(l.in_shape.count()) + " != previous output " +
                            std::to_string(prev.count()));
      } else if (!(l.in_shape == prev)) {
        throw ConfigError("layer " + std::to_string(i) + ": shape chain mismatch");
      }
    }
    switch (l.kind) {
      case LayerKind::Conv3x3:
        if (l.in_shape.h < 3 || l.in_shape.w < 3)
          throw ConfigError("conv3x3 input smaller than kernel");
        l.out_shape.h = l.in_shape.h - 2;
        l.out_shape.w = l.in_shape.w - 2;
        break;
      case LayerKind::MaxPool2x2s2:
        l.out_shape = {l.in_shape.h / 2, l.in_shape.w / 2, l.in_shape.c};
        break;
      case LayerKind::Dense:
        l.out_shape.h = 1;
        l.out_shape.w = 1;
        break;
      case LayerKind::Tanh:
      case LayerKind::Clip:
        l.out_shape = l.in_shape;
        break;
    }
  }
  return layers;
}

Tensor3 conv3x3_valid(const Tensor3& input, std::span<const float> weights,
                      std::span<const float> bias) {
  if (input.height < 3 || input.width < 3)
    throw ConfigError("conv3x3_valid: input smaller than kernel");
  const int c_in = input.channels;
  const int c_out = static_cast<int>(bias.size());
  if (weights.size() != static_cast<std::size_t>(9) * c_in * c_out)
    throw ConfigError("conv3x3_valid: kernel size does not match input channels");

  Tensor3 out(input.height - 2, input.width - 2, c_out);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      float* dst = &out.at(y, x, 0);
      for (int o = 0; o < c_out; ++o) dst[o] = bias[o];
      for (int dy = 0; dy < 3; ++dy) {
        for (int dx = 0; dx < 3; ++dx) {
          const float* src = &input.at(y + dy, x + dx, 0);
          const float* w = &weights[(static_cast<std::size_t>(dy) * 3 + dx) * c_in * c_out];
          for (int i = 0; i < c_in; ++i) {
            const float v = src[i];
            const float* wi = w + static_cast<std::size_t>(i) * c_out;
            for (int o = 0; o < c_out; ++o) dst[o] += v * wi[o];
          }
        }
      }
    }
  }
  return out;
}

Tensor3 maxpool2x2s2(const Tensor3& input, PoolMode mode) {
  Tensor3 out(input.height / 2, input.width / 2, input.channels);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      for (int c = 0; c < out.channels; ++c) {
        const float a = input.at(2 * y, 2 * x, c);
        const float b = input.at(2 * y, 2 * x + 1, c);
        const float d = input.at(2 * y + 1, 2 * x, c);
        const float e = input.at(2 * y + 1, 2 * x + 1, c);
        out.at(y, x, c) = mode == PoolMode::Max
                              ? std::max(std::max(a, b), std::max(d, e))
                              : 0.25f * (a + b + d + e);
      }
    }
  }
  return out;
}

std::vector<float> dense(std::span<const float> input, std::span<const float> weights,
                         std::span<const float> bias, int n_out) {
  const std::size_t n_in = input.size();
  if (weights.size() != n_in * n_out)
    throw ConfigError("dense: weight count " + std::to_string(weights.size()) +
                      " != " + std::to_string(n_in) + "x" + std::to_string(n_out));
  std::vector<float> out(bias.begin(), bias.end());
  for (std::size_t i = 0; i < n_in; ++i) {
    const float v = input[i];
    const float* w = &weights[i * n_out];
    for (int o = 0; o < n_out; ++o) out[o] += v * w[o];
  }
  return out;
}

void tanh_inplace(std::span<float> v) {
  for (float& x : v) x = std::tanh(x);
}

void clip_unit_inplace(std::span<float> v) {
  for (float& x : v) x = std::clamp(x, -1.0f, 1.0f);
}

Network Network::zeros(std::vector<LayerSpec> layers) {
  Network net;
  net.layers = chain_layers(std::move(layers));
  net.params.assign(net.param_count(), 0.0f);
  return net;
}

std::size_t Network::param_count() const { return layers_param_count(layers); }

std::size_t layers_param_count(const std::vector<LayerSpec>& layers) {
  std::size_t n = 0;
  for (const LayerSpec& l : layers) n += l.param_count();
  return n;
}

std::vector<float> forward_layers(const std::vector<LayerSpec>& layers,
                                  std::span<const float> params, const Tensor3& input) {
  if (params.size() != layers_param_count(layers))
    throw ConfigError("forward_layers: parameter span length " + std::to_string(params.size()) +
                      " != " + std::to_string(layers_param_count(layers)));
  Tensor3 cur = input;
  std::size_t off = 0;
  for (const LayerSpec& l : layers) {
    const std::size_t n = l.param_count();
    std::span<const float> p = params.subspan(off, n);
    off += n;
    switch (l.kind) {
      case LayerKind::Conv3x3: {
        const std::size_t wn = 9ull * l.in_shape.c * l.out_shape.c;
        cur = conv3x3_valid(cur, p.subspan(0, wn), p.subspan(wn));
        break;
      }
      case LayerKind::MaxPool2x2s2:
        cur = maxpool2x2s2(cur, l.pool_mode);
        break;
      case LayerKind::Dense: {
        const std::size_t wn = l.in_shape.count() * l.out_shape.c;
        std::vector<float> v =
            dense(cur.data, p.subspan(0, wn), p.subspan(wn), l.out_shape.c);
        cur = Tensor3(1, 1, l.out_shape.c);
        cur.data = std::move(v);
        break;
      }
      case LayerKind::Tanh:
        tanh_inplace(cur.data);
        break;
      case LayerKind::Clip:
        clip_unit_inplace(cur.data);
        break;
    }
  }
  return cur.data;
}

std::vector<float> Network::forward(const Tensor3& input) const {
  return forward_layers(layers, params, input);
}

std::vector<float> Network::forward(std::span<const float> input) const {
  if (layers.empty() || layers.front().in_shape.count() != input.size())
    throw ConfigError("forward: input length does not match first layer");
  Tensor3 t(layers.front().in_shape.h, layers.front().in_shape.w, layers.front().in_shape.c);
  t.data.assign(input.begin(), input.end());
  return forward(t);
}

FlatParams flatten_params(const Network& net) {
  FlatParams flat;
  flat.values = net.params;
  std::size_t off = 0;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const std::size_t n = net.layers[i].param_count();
    flat.layout.push_back({static_cast<int>(i), off, n});
    off += n;
  }
  return flat;
}

Network unflatten_params(const FlatParams& flat, std::vector<LayerSpec> layers) {
  Network net;
  net.layers = chain_layers(std::move(layers));
  if (flat.values.size() != net.param_count())
    throw CheckpointError("unflatten_params: parameter vector length " +
                          std::to_string(flat.values.size()) + " != architecture count " +
                          std::to_string(net.param_count()));
  net.params = flat.values;
  return net;
}

}  // namespace quadnav::nnet
