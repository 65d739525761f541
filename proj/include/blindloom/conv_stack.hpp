#pragma once

#include "blindloom/tensor.hpp"

#include <cstdio>
#include <random>
#include <string>
#include <vector>

namespace blindloom {

// Plain stack of 3x3 "same" convolutions with ReLU between them:
//   conv(in -> hidden), relu, ..., conv(hidden -> out)
// The last layer is linear. Parameters are named conv00.weight, conv00.bias, ...
struct ConvStackSpec {
  std::size_t in_channels = 5;
  std::size_t hidden_channels = 32;
  std::size_t out_channels = 1;
  std::size_t layers = 6;
  std::size_t kernel = 3;

  std::size_t layer_in(std::size_t l) const { return l == 0 ? in_channels : hidden_channels; }
  std::size_t layer_out(std::size_t l) const { return l + 1 == layers ? out_channels : hidden_channels; }
  bool operator==(const ConvStackSpec&) const = default;
};

inline std::string layer_name(std::size_t l, const char* what) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "conv%02zu.%s", l, what);
  return buf;
}

// He-normal hidden layers; the output layer starts at zero so a residual
// network built on top of the stack is the identity at initialization.
template <typename Scalar>
ParamSet<Scalar> init_conv_stack(const ConvStackSpec& spec, std::uint64_t seed, bool zero_output = true) {
  if (spec.layers == 0) throw std::invalid_argument("conv stack needs at least one layer");
  ParamSet<Scalar> params;
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < spec.layers; ++l) {
    const std::size_t fan_in = spec.layer_in(l) * spec.kernel * spec.kernel;
    Tensor4<Scalar> w({spec.layer_out(l), spec.layer_in(l), spec.kernel, spec.kernel});
    const bool last = l + 1 == spec.layers;
    if (!(last && zero_output)) {
      std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
      for (Eigen::Index i = 0; i < w.data().size(); ++i) w.data()[i] = static_cast<Scalar>(dist(rng));
    }
    params.add(layer_name(l, "weight"), std::move(w));
    params.add(layer_name(l, "bias"), Tensor4<Scalar>({1, spec.layer_out(l), 1, 1}));
  }
  return params;
}

// Recovers the layer layout from parameter shapes (e.g. after loading a checkpoint).
template <typename Scalar>
ConvStackSpec infer_conv_stack(const ParamSet<Scalar>& params) {
  ConvStackSpec spec;
  spec.layers = 0;
  while (params.entries.count(layer_name(spec.layers, "weight"))) ++spec.layers;
  if (spec.layers == 0 || params.entries.size() != 2 * spec.layers) {
    throw ShapeError("parameter set is not a conv stack");
  }
  const auto& first = params[layer_name(0, "weight")].shape();
  const auto& last = params[layer_name(spec.layers - 1, "weight")].shape();
  spec.in_channels = first[1];
  spec.kernel = first[2];
  spec.out_channels = last[0];
  spec.hidden_channels = spec.layers > 1 ? first[0] : last[1];
  return spec;
}

template <typename Scalar>
struct ConvStackCache {
  std::vector<Tensor4<Scalar>> inputs;           // input of each conv
  std::vector<Tensor4<Scalar>> pre_activations;  // output of each conv
};

template <typename Scalar>
Tensor4<Scalar> conv_stack_forward(const ConvStackSpec& spec, const ParamSet<Scalar>& params,
                                   const Tensor4<Scalar>& input, ConvStackCache<Scalar>* cache = nullptr) {
  if (input.channels() != spec.in_channels) {
    throw ShapeError("conv stack expects " + std::to_string(spec.in_channels) + " input channels, got " +
                     shape_string(input.shape()));
  }
  if (cache) {
    cache->inputs.clear();
    cache->pre_activations.clear();
  }
  Tensor4<Scalar> x = input;
  for (std::size_t l = 0; l < spec.layers; ++l) {
    Tensor4<Scalar> y = conv2d(x, params[layer_name(l, "weight")], params[layer_name(l, "bias")]);
    if (cache) {
      cache->inputs.push_back(std::move(x));
      cache->pre_activations.push_back(y);
    }
    x = (l + 1 == spec.layers) ? std::move(y) : relu(y);
  }
  return x;
}

// Accumulates parameter gradients into `grads`; returns d loss / d input when requested.
template <typename Scalar>
Tensor4<Scalar> conv_stack_backward(const ConvStackSpec& spec, const ParamSet<Scalar>& params,
                                    const ConvStackCache<Scalar>& cache, const Tensor4<Scalar>& grad_output,
                                    Gradients<Scalar>& grads, bool need_input_grad = false) {
  Tensor4<Scalar> g = grad_output;
  for (std::size_t l = spec.layers; l-- > 0;) {
    if (l + 1 != spec.layers) g = relu_backward(cache.pre_activations[l], g);
    const std::string wname = layer_name(l, "weight");
    const std::string bname = layer_name(l, "bias");
    auto cg = conv2d_backward(cache.inputs[l], params[wname], g, l > 0 || need_input_grad);
    grads.at(wname).data() += cg.kernel.data();
    grads.at(bname).data() += cg.bias.data();
    g = std::move(cg.input);
  }
  return g;
}

}  // namespace blindloom
