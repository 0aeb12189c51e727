#pragma once

// Token-based global processors: nodes are softly assigned to M slices,
// pooled into M tokens, mixed in token space, and broadcast back to nodes
// with the same slice weights.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crashsurr/ad/tensor.hpp"
#include "crashsurr/nn/layers.hpp"

namespace crashsurr::nn {

// Dense multi-head self-attention over tokens, followed by a feedforward,
// both pre-normalised with residuals.
struct DenseTokenMixer {
  LayerNorm attn_norm;
  Linear query, key, value, out;
  LayerNorm ffn_norm;
  Mlp ffn;
  std::size_t heads = 4;

  DenseTokenMixer() = default;
  DenseTokenMixer(ParameterSet& ps, const std::string& prefix, std::size_t width, std::size_t num_heads,
                  std::uint64_t seed, Activation act = Activation::kGelu)
      : attn_norm(ps, prefix + ".attn_norm", width),
        query(ps, prefix + ".query", width, width, seed),
        key(ps, prefix + ".key", width, width, seed),
        value(ps, prefix + ".value", width, width, seed),
        out(ps, prefix + ".out", width, width, seed),
        ffn_norm(ps, prefix + ".ffn_norm", width),
        ffn(ps, prefix + ".ffn", width, width, width, act, seed),
        heads(num_heads) {
    require(num_heads >= 1 && width % num_heads == 0, ErrorKind::kInvalidArgument,
            "token attention: width must be divisible by head count");
  }

  Tensor operator()(const Tensor& tokens) const {
    const auto x = attn_norm(tokens);
    const auto q = query(x), k = key(x), v = value(x);
    const std::size_t head_dim = tokens.cols() / heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
    std::vector<Tensor> per_head;
    for (std::size_t h = 0; h < heads; ++h) {
      const auto qh = ad::slice_cols(q, h * head_dim, head_dim);
      const auto kh = ad::slice_cols(k, h * head_dim, head_dim);
      const auto vh = ad::slice_cols(v, h * head_dim, head_dim);
      const auto attn = ad::row_softmax(ad::scale(ad::matmul_nt(qh, kh), inv_sqrt));
      per_head.push_back(ad::matmul(attn, vh));
    }
    const auto mixed = ad::add(tokens, out(ad::concat_cols(per_head)));
    return ad::add(mixed, ffn(ffn_norm(mixed)));
  }
};

// Factorised token interaction: M tokens are pooled into r learned routes
// (softmax over tokens), then every token reads back from the routes
// (softmax over routes). Cost is O(M r) instead of O(M^2).
struct FlareTokenMixer {
  LayerNorm attn_norm;
  Tensor route_queries;  // r x width
  Linear key, value, out;
  LayerNorm ffn_norm;
  Mlp ffn;

  FlareTokenMixer() = default;
  FlareTokenMixer(ParameterSet& ps, const std::string& prefix, std::size_t width, std::size_t routes,
                  std::uint64_t seed, Activation act = Activation::kGelu)
      : attn_norm(ps, prefix + ".attn_norm", width),
        route_queries(init_uniform(ps, prefix + ".route_queries", routes, width,
                                   1.0 / std::sqrt(static_cast<double>(width)), seed)),
        key(ps, prefix + ".key", width, width, seed),
        value(ps, prefix + ".value", width, width, seed),
        out(ps, prefix + ".out", width, width, seed),
        ffn_norm(ps, prefix + ".ffn_norm", width),
        ffn(ps, prefix + ".ffn", width, width, width, act, seed) {
    require(routes >= 1, ErrorKind::kInvalidArgument, "flare: route count must be >= 1");
  }

  std::size_t routes() const { return route_queries.rows(); }

  Tensor operator()(const Tensor& tokens) const {
    const auto x = attn_norm(tokens);
    const auto k = key(x), v = value(x);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(tokens.cols()));
    const auto pool = ad::row_softmax(ad::scale(ad::matmul_nt(route_queries, k), inv_sqrt));       // r x M
    const auto routed = ad::matmul(pool, v);                                                          // r x d
    const auto spread = ad::row_softmax(ad::scale(ad::matmul_nt(k, route_queries), inv_sqrt));      // M x r
    const auto mixed = ad::add(tokens, out(ad::matmul(spread, routed)));
    return ad::add(mixed, ffn(ffn_norm(mixed)));
  }
};

enum class TokenKernel { kDense, kFlare };

struct SliceAttentionOptions {
  std::size_t width = 128;
  std::size_t tokens = 128;
  std::size_t heads = 4;
  TokenKernel kernel = TokenKernel::kDense;
  std::size_t flare_routes = 32;
  // Learnable per-slice temperature on the slice logits.
  bool sharpened = false;
  // Geometry conditioning: spatial dimension of the positions fed to the
  // embedding (0 disables it) and the embedding width.
  std::size_t geo_dim = 0;
  std::size_t geo_width = 16;
  Activation activation = Activation::kGelu;
};

// Physics attention block:
//   W  = softmax(logits)           logits = [LN(H), g(pos)] K^T (/ tau)
//   T  = W^T LN(H)
//   T~ = mixer(LN_t(T))
//   H' = H + proj(W T~)
struct SliceAttentionBlock {
  LayerNorm in_norm;
  Tensor slice_keys;  // M x (width + geo_width)
  std::optional<Tensor> log_temperature;  // 1 x M
  std::optional<Mlp> geo_embed;
  LayerNorm token_norm;
  std::optional<DenseTokenMixer> dense;
  std::optional<FlareTokenMixer> flare;
  Linear out_proj;

  SliceAttentionBlock() = default;
  SliceAttentionBlock(ParameterSet& ps, const std::string& prefix, const SliceAttentionOptions& o,
                      std::uint64_t seed) {
    require(o.tokens >= 1, ErrorKind::kInvalidArgument, "slice attention: token count must be >= 1");
    in_norm = LayerNorm(ps, prefix + ".in_norm", o.width);
    const std::size_t logit_in = o.width + (o.geo_dim > 0 ? o.geo_width : 0);
    slice_keys = init_uniform(ps, prefix + ".slice_keys", o.tokens, logit_in,
                              1.0 / std::sqrt(static_cast<double>(logit_in)), seed);
    if (o.sharpened) log_temperature = init_constant(ps, prefix + ".log_temperature", 1, o.tokens, 0.0);
    if (o.geo_dim > 0)
      geo_embed = Mlp(ps, prefix + ".geo_embed", o.geo_dim, o.geo_width, o.geo_width, o.activation, seed);
    token_norm = LayerNorm(ps, prefix + ".token_norm", o.width);
    if (o.kernel == TokenKernel::kDense)
      dense = DenseTokenMixer(ps, prefix + ".mixer", o.width, o.heads, seed, o.activation);
    else
      flare = FlareTokenMixer(ps, prefix + ".mixer", o.width, o.flare_routes, seed, o.activation);
    out_proj = Linear(ps, prefix + ".out_proj", o.width, o.width, seed);
  }

  std::size_t tokens() const { return slice_keys.rows(); }

  // Slice weights W (N x M) for latents h and normalised positions.
  Tensor slice_weights(const Tensor& h_norm, const Tensor* positions) const {
    Tensor logit_in = h_norm;
    if (geo_embed) {
      require(positions != nullptr, ErrorKind::kInvalidArgument, "geometry-aware attention needs positions");
      logit_in = ad::concat_cols({h_norm, (*geo_embed)(*positions)});
    }
    auto logits = ad::matmul_nt(logit_in, slice_keys);
    if (log_temperature) logits = ad::mul_row(logits, ad::exp(ad::scale(*log_temperature, -1.0)));
    return ad::row_softmax(logits);
  }

  Tensor mix_tokens(const Tensor& tokens_in) const {
    return dense ? (*dense)(tokens_in) : (*flare)(tokens_in);
  }

  Tensor operator()(const Tensor& h, const Tensor* positions, std::vector<double>* weights_out = nullptr) const {
    const auto hn = in_norm(h);
    const auto w = slice_weights(hn, positions);
    if (weights_out != nullptr) weights_out->assign(w.values().begin(), w.values().end());
    const auto tokens_raw = ad::matmul_tn(w, hn);  // M x d
    const auto mixed = mix_tokens(token_norm(tokens_raw));
    return ad::add(h, out_proj(ad::matmul(w, mixed)));
  }
};

// Per-coordinate min-max normalisation to [0, 1]; constant coordinates map to 0.
inline std::vector<double> minmax_normalise(std::span<const double> positions, std::size_t dim) {
  const std::size_t n = positions.size() / dim;
  std::vector<double> out(positions.size(), 0.0);
  for (std::size_t d = 0; d < dim; ++d) {
    double lo = positions[d], hi = positions[d];
    for (std::size_t i = 0; i < n; ++i) {
      lo = std::min(lo, positions[i * dim + d]);
      hi = std::max(hi, positions[i * dim + d]);
    }
    const double range = hi - lo;
    if (range <= 0.0) continue;
    for (std::size_t i = 0; i < n; ++i) out[i * dim + d] = (positions[i * dim + d] - lo) / range;
  }
  return out;
}

}  // namespace crashsurr::nn
