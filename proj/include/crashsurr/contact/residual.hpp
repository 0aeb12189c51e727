#pragma once

// Bounded latent correction from sparse contact pairs:
//   H~ = H + alpha * dH,  dH_i = sum over pairs touching i of g([h_i, h_p, geometry])
// Every pair contributes to both endpoints; the partner's view uses the
// flipped offset, so the correction does not depend on pair orientation.

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "crashsurr/ad/tensor.hpp"
#include "crashsurr/contact/contact.hpp"
#include "crashsurr/nn/layers.hpp"

namespace crashsurr::contact {

using ad::Tensor;

// Directed contact messages in latent index space.
struct DirectedPairs {
  ad::Index source;
  ad::Index partner;
  std::size_t size() const { return source.size(); }
};

// Expands pairs into both directions, relabels nodes with `rank` (identity
// when empty) and sorts by (source, partner) so scatter order is fixed.
inline DirectedPairs direct_pairs(const ContactSet& set, const std::vector<std::uint32_t>& rank = {}) {
  auto map = [&](std::uint32_t n) { return rank.empty() ? n : rank[n]; };
  std::vector<std::pair<std::uint32_t, std::uint32_t>> dir;
  dir.reserve(2 * set.pairs.size());
  for (const auto& p : set.pairs) {
    dir.emplace_back(map(p.i), map(p.j));
    dir.emplace_back(map(p.j), map(p.i));
  }
  std::sort(dir.begin(), dir.end());
  DirectedPairs out;
  for (const auto& [s, q] : dir) {
    out.source.push_back(s);
    out.partner.push_back(q);
  }
  return out;
}

inline std::size_t pair_feature_dim(std::size_t dim) { return 2 + dim; }

// [distance / l, gap / l, unit offset to partner], differentiable in x.
inline Tensor pair_features(const Tensor& x, const std::vector<double>& thickness, const DirectedPairs& pairs,
                            double length_scale) {
  const std::size_t m = pairs.size();
  const auto offset = ad::sub(ad::gather_rows(x, pairs.partner), ad::gather_rows(x, pairs.source));
  const auto dist = ad::row_norm(offset);
  std::vector<double> neg_half(m);
  for (std::size_t k = 0; k < m; ++k)
    neg_half[k] = -0.5 * (thickness[pairs.source[k]] + thickness[pairs.partner[k]]);
  const auto gap = ad::clamp_min(ad::add(dist, Tensor::from(m, 1, std::move(neg_half))), 0.0);
  const auto unit = ad::mul_col(offset, ad::reciprocal(ad::clamp_min(dist, 1e-9)));
  const double inv = 1.0 / length_scale;
  return ad::concat_cols({ad::scale(dist, inv), ad::scale(gap, inv), unit});
}

struct ContactResidual {
  nn::Mlp message;
  Tensor alpha;  // 1 x 1

  ContactResidual() = default;
  ContactResidual(nn::ParameterSet& ps, const std::string& prefix, std::size_t width, std::size_t dim,
                  double alpha_init, std::uint64_t seed)
      : message(ps, prefix + ".message", 2 * width + pair_feature_dim(dim), width, width, nn::Activation::kRelu,
                seed),
        alpha(nn::init_constant(ps, prefix + ".alpha", 1, 1, alpha_init)) {}

  // Returns alpha * dH (same shape as h); callers add it to h.
  Tensor delta(const Tensor& h, const Tensor& pair_feats, const DirectedPairs& pairs) const {
    const auto hs = ad::gather_rows(h, pairs.source);
    const auto hp = ad::gather_rows(h, pairs.partner);
    const auto msg = message(ad::concat_cols({hs, hp, pair_feats}));
    return ad::scale_by(ad::scatter_add_rows(msg, pairs.source, h.rows()), alpha);
  }

  Tensor operator()(const Tensor& h, const Tensor& pair_feats, const DirectedPairs& pairs) const {
    if (pairs.size() == 0) return h;
    return ad::add(h, delta(h, pair_feats, pairs));
  }
};

}  // namespace crashsurr::contact
