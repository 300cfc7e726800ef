// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "semlink/numcore/ops.hpp"
#include "semlink/numcore/rng.hpp"

namespace semlink::nn {

using num::Shape;
using num::Tensor;

struct NamedParam {
  std::string name;
  Tensor tensor;
};

/// Ordered, uniquely named set of trainable leaves owned by one network.
class ParamList {
 public:
  Tensor add(const std::string& name, const Shape& shape, std::vector<double> values);
  /// Entries drawn from U(-bound, bound).
  Tensor add_uniform(const std::string& name, const Shape& shape, double bound, num::Rng& rng);

  const std::vector<NamedParam>& items() const { return items_; }
  std::vector<Tensor> tensors() const;
  std::size_t scalar_count() const;
  const Tensor& find(const std::string& name) const;

 private:
  std::vector<NamedParam> items_;
};

/// y = x W + b over the last axis; x is [in] or [n, in].
class Linear {
 public:
  Linear() = default;
  Linear(ParamList& params, const std::string& name, std::size_t in, std::size_t out, num::Rng& rng);
  Tensor operator()(const Tensor& x) const;
  std::size_t in() const { return in_; }
  std::size_t out() const { return out_; }
  const Tensor& weight() const { return w_; }
  const Tensor& bias() const { return b_; }

 private:
  Tensor w_, b_;
  std::size_t in_ = 0, out_ = 0;
};

struct TransformerConfig {
  std::size_t d_model = 32;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t d_ff = 64;
};

/// Pre-norm encoder: x += MHSA(LN(x)); x += MLP(LN(x)), repeated `layers` times.
class TransformerStack {
 public:
  TransformerStack() = default;
  TransformerStack(ParamList& params, const std::string& name, const TransformerConfig& cfg, num::Rng& rng);

  /// seq [len, d_model] -> [len, d_model]. When `attention` is non-null it
  /// receives one [heads, len, len] row-stochastic tensor per layer.
  Tensor operator()(const Tensor& seq, std::vector<Tensor>* attention = nullptr) const;
  const TransformerConfig& config() const { return cfg_; }

 private:
  struct Layer {
    Linear q, k, v, o, ff1, ff2;
  };
  TransformerConfig cfg_;
  std::vector<Layer> layers_;
};

/// Sinusoidal table PE[pos, 2i] = sin(pos / 10000^(2i/d)), PE[pos, 2i+1] = cos(same).
Tensor position_table(std::size_t len, std::size_t d_model);
/// seq + position_table(len, d_model).
Tensor position_embed(const Tensor& seq);

/// Hard 0/1 bits with a straight-through backward.
Tensor quantize(const Tensor& c);
/// {0,1} -> {-1,+1}.
Tensor dequantize(const Tensor& bits);

struct CodecConfig {
  std::size_t in_channels = 3;
  std::size_t height = 32, width = 32;
  std::size_t d_s = 16, h_s = 4, w_s = 4;
  std::size_t classes = 4;
  std::size_t base_width = 8;
};

/// Stride-2 conv + ReLU blocks from [in, H, W] down to [d_s, H_s, W_s].
class ConvEncoder {
 public:
  ConvEncoder() = default;
  ConvEncoder(ParamList& params, const std::string& name, const CodecConfig& cfg, num::Rng& rng);
  Tensor operator()(const Tensor& image) const;

 private:
  struct Conv {
    Tensor w, b;
  };
  std::vector<Conv> blocks_;
  CodecConfig cfg_;
};

/// Nearest x2 upsample + conv + ReLU blocks from [d_s, H_s, W_s] up to
/// [C, H, W] logits (final 1x1 conv, no activation).
class ConvDecoder {
 public:
  ConvDecoder() = default;
  ConvDecoder(ParamList& params, const std::string& name, const CodecConfig& cfg, num::Rng& rng);
  Tensor operator()(const Tensor& feature) const;

 private:
  struct Conv {
    Tensor w, b;
  };
  std::vector<Conv> blocks_;
  Conv head_;
  CodecConfig cfg_;
};

/// Number of x2 stages between the image and feature grids; throws
/// ConfigError unless both axes shrink by the same power of two.
std::size_t codec_depth(const CodecConfig& cfg);

}  // namespace semlink::nn
