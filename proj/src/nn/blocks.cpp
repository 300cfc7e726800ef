// SPDX-License-Identifier: Apache-2.0
#include "semlink/nn/blocks.hpp"

#include <cmath>

namespace semlink::nn {

Tensor ParamList::add(const std::string& name, const Shape& shape, std::vector<double> values) {
  for (const auto& p : items_) {
    if (p.name == name) throw UsageError("duplicate parameter name '" + name + "'");
  }
  Tensor t = Tensor::parameter(shape, std::move(values));
  items_.push_back({name, t});
  return t;
}

Tensor ParamList::add_uniform(const std::string& name, const Shape& shape, double bound, num::Rng& rng) {
  std::vector<double> v(num::numel_of(shape));
  for (auto& x : v) x = rng.uniform(-bound, bound);
  return add(name, shape, std::move(v));
}

std::vector<Tensor> ParamList::tensors() const {
  std::vector<Tensor> out;
  out.reserve(items_.size());
  for (const auto& p : items_) out.push_back(p.tensor);
  return out;
}

std::size_t ParamList::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : items_) n += p.tensor.numel();
  return n;
}

const Tensor& ParamList::find(const std::string& name) const {
  for (const auto& p : items_) {
    if (p.name == name) return p.tensor;
  }
  throw UsageError("no parameter named '" + name + "'");
}

Linear::Linear(ParamList& params, const std::string& name, std::size_t in, std::size_t out, num::Rng& rng)
    : in_(in), out_(out) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  w_ = params.add_uniform(name + ".w", {in, out}, bound, rng);
  b_ = params.add_uniform(name + ".b", {out}, bound, rng);
}

Tensor Linear::operator()(const Tensor& x) const {
  if (x.rank() == 0 || x.shape().back() != in_) {
    throw DimensionError("linear expects last axis " + std::to_string(in_) + ", got " + num::shape_str(x.shape()));
  }
  if (x.rank() == 1) return num::add(num::reshape(num::matmul(num::reshape(x, {1, in_}), w_), {out_}), b_);
  if (x.rank() == 2) return num::add(num::matmul(x, w_), b_);
  throw DimensionError("linear expects rank 1 or 2 input, got " + num::shape_str(x.shape()));
}

TransformerStack::TransformerStack(ParamList& params, const std::string& name, const TransformerConfig& cfg,
                                   num::Rng& rng)
    : cfg_(cfg) {
  if (cfg.heads == 0 || cfg.d_model % cfg.heads != 0) {
    throw ConfigError("d_model " + std::to_string(cfg.d_model) + " is not divisible by n_heads " +
                      std::to_string(cfg.heads));
  }
  const std::size_t d = cfg.d_model;
  for (std::size_t i = 0; i < cfg.layers; ++i) {
    const std::string p = name + ".layer" + std::to_string(i);
    layers_.push_back({Linear(params, p + ".attn.q", d, d, rng), Linear(params, p + ".attn.k", d, d, rng),
                       Linear(params, p + ".attn.v", d, d, rng), Linear(params, p + ".attn.o", d, d, rng),
                       Linear(params, p + ".mlp.fc1", d, cfg.d_ff, rng),
                       Linear(params, p + ".mlp.fc2", cfg.d_ff, d, rng)});
  }
}

Tensor TransformerStack::operator()(const Tensor& seq, std::vector<Tensor>* attention) const {
  if (seq.rank() != 2 || seq.dim(1) != cfg_.d_model) {
    throw DimensionError("transformer expects [len, " + std::to_string(cfg_.d_model) + "], got " +
                         num::shape_str(seq.shape()));
  }
  const std::size_t n = seq.dim(0), h = cfg_.heads, dh = cfg_.d_model / h;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  auto heads = [&](const Tensor& t) { return num::permute(num::reshape(t, {n, h, dh}), {1, 0, 2}); };
  Tensor x = seq;
  for (const auto& L : layers_) {
    Tensor y = num::layer_norm(x);
    Tensor q = heads(L.q(y)), k = heads(L.k(y)), v = heads(L.v(y));
    Tensor att = num::softmax(num::scale(num::matmul(q, num::transpose(k)), inv_sqrt), 2);
    if (attention) attention->push_back(att);
    Tensor ctx = num::reshape(num::permute(num::matmul(att, v), {1, 0, 2}), {n, cfg_.d_model});
    x = num::add(x, L.o(ctx));
    x = num::add(x, L.ff2(num::relu(L.ff1(num::layer_norm(x)))));
  }
  return x;
}

Tensor position_table(std::size_t len, std::size_t d_model) {
  std::vector<double> v(len * d_model);
  for (std::size_t pos = 0; pos < len; ++pos)
    for (std::size_t j = 0; j < d_model; ++j) {
      const double i2 = static_cast<double>(j - j % 2);
      const double angle = static_cast<double>(pos) / std::pow(10000.0, i2 / static_cast<double>(d_model));
      v[pos * d_model + j] = j % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  return Tensor::real({len, d_model}, std::move(v));
}

Tensor position_embed(const Tensor& seq) {
  if (seq.rank() != 2) throw DimensionError("position_embed expects [len, d_model]");
  return num::add(seq, position_table(seq.dim(0), seq.dim(1)));
}

Tensor quantize(const Tensor& c) { return num::quantize_st(c); }

Tensor dequantize(const Tensor& bits) { return num::add_scalar(num::scale(bits, 2.0), -1.0); }

std::size_t codec_depth(const CodecConfig& cfg) {
  auto depth = [](std::size_t big, std::size_t small) -> long {
    if (small == 0 || big % small != 0) return -1;
    std::size_t r = big / small;
    long d = 0;
    while (r > 1 && r % 2 == 0) {
      r /= 2;
      ++d;
    }
    return r == 1 ? d : -1;
  };
  const long dh = depth(cfg.height, cfg.h_s), dw = depth(cfg.width, cfg.w_s);
  if (dh < 0 || dh != dw) {
    throw ConfigError("image " + std::to_string(cfg.height) + "x" + std::to_string(cfg.width) +
                      " does not reduce to feature grid " + std::to_string(cfg.h_s) + "x" + std::to_string(cfg.w_s) +
                      " by a common power of two");
  }
  return static_cast<std::size_t>(dh);
}

namespace {

// Channel width after encoder block i of `depth` (the last block emits d_s).
std::size_t stage_width(const CodecConfig& cfg, std::size_t i, std::size_t depth) {
  if (i + 1 == depth) return cfg.d_s;
  return std::min(cfg.d_s, cfg.base_width << i);
}

}  // namespace

ConvEncoder::ConvEncoder(ParamList& params, const std::string& name, const CodecConfig& cfg, num::Rng& rng)
    : cfg_(cfg) {
  const std::size_t depth = codec_depth(cfg);
  std::size_t cin = cfg.in_channels;
  for (std::size_t i = 0; i < depth; ++i) {
    const std::size_t cout = stage_width(cfg, i, depth);
    const double bound = 1.0 / std::sqrt(static_cast<double>(cin * 9));
    const std::string p = name + ".conv" + std::to_string(i);
    blocks_.push_back({params.add_uniform(p + ".w", {cout, cin, 3, 3}, bound, rng),
                       params.add_uniform(p + ".b", {cout}, bound, rng)});
    cin = cout;
  }
}

Tensor ConvEncoder::operator()(const Tensor& image) const {
  if (image.shape() != Shape{cfg_.in_channels, cfg_.height, cfg_.width}) {
    throw DimensionError("encoder expects " + num::shape_str({cfg_.in_channels, cfg_.height, cfg_.width}) +
                         ", got " + num::shape_str(image.shape()));
  }
  Tensor x = image;
  for (const auto& c : blocks_) x = num::relu(num::conv2d(x, c.w, c.b, 2, 1));
  return x;
}

ConvDecoder::ConvDecoder(ParamList& params, const std::string& name, const CodecConfig& cfg, num::Rng& rng)
    : cfg_(cfg) {
  const std::size_t depth = codec_depth(cfg);
  std::size_t cin = cfg.d_s;
  for (std::size_t i = 0; i < depth; ++i) {
    // mirror of the encoder widths
    const std::size_t cout = depth - 1 - i == 0 ? cfg.base_width : stage_width(cfg, depth - 2 - i, depth);
    const double bound = 1.0 / std::sqrt(static_cast<double>(cin * 9));
    const std::string p = name + ".conv" + std::to_string(i);
    blocks_.push_back({params.add_uniform(p + ".w", {cout, cin, 3, 3}, bound, rng),
                       params.add_uniform(p + ".b", {cout}, bound, rng)});
    cin = cout;
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(cin));
  head_ = {params.add_uniform(name + ".head.w", {cfg.classes, cin, 1, 1}, bound, rng),
           params.add_uniform(name + ".head.b", {cfg.classes}, bound, rng)};
}

Tensor ConvDecoder::operator()(const Tensor& feature) const {
  if (feature.shape() != Shape{cfg_.d_s, cfg_.h_s, cfg_.w_s}) {
    throw DimensionError("decoder expects " + num::shape_str({cfg_.d_s, cfg_.h_s, cfg_.w_s}) + ", got " +
                         num::shape_str(feature.shape()));
  }
  Tensor x = feature;
  for (const auto& c : blocks_) x = num::relu(num::conv2d(num::upsample_nearest(x, 2), c.w, c.b, 1, 1));
  return num::conv2d(x, head_.w, head_.b, 1, 0);
}

}  // namespace semlink::nn
