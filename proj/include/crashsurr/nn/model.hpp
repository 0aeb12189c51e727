#pragma once

// Surrogate assembly. All families share one skeleton:
//
//   features -> encoder -> L_pre mesh blocks -> [contact residual]
//            -> L_attn attention blocks -> L_post mesh blocks -> decoder
//
// Internally nodes are processed in the graph's canonical order (sorted by
// reference position), edges and contact messages sorted by their canonical
// endpoints. Every reduction therefore runs in an order that does not depend
// on node labels, which makes the output exactly permutation equivariant.

#include <algorithm>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "crashsurr/ad/tensor.hpp"
#include "crashsurr/contact/contact.hpp"
#include "crashsurr/contact/residual.hpp"
#include "crashsurr/error.hpp"
#include "crashsurr/mesh/features.hpp"
#include "crashsurr/mesh/graph.hpp"
#include "crashsurr/nn/attention.hpp"
#include "crashsurr/nn/config.hpp"
#include "crashsurr/nn/layers.hpp"
#include "crashsurr/nn/mpnn.hpp"

namespace crashsurr::nn {

// Optional capture of intermediate quantities (canonical node order).
struct ForwardTrace {
  std::vector<std::vector<double>> slice_weights;  // one N x M matrix per attention block
  std::vector<Tensor> latents;                     // H after encoder and after every block
};

// Graph-derived index structures in canonical order.
struct CanonicalGraph {
  ad::Index order;  // canonical position -> node
  ad::Index rank;   // node -> canonical position
  std::vector<Edge> edges;  // original labels, sorted by canonical (receiver, sender)
  EdgeIndex index;          // the same edges in canonical labels
  std::vector<double> thickness;  // canonical order
  Tensor geo_positions;           // min-max normalised reference positions, canonical order

  explicit CanonicalGraph(const MeshGraph& g) {
    const std::size_t n = g.node_count(), dim = g.dim();
    order.assign(g.canonical_order().begin(), g.canonical_order().end());
    rank.assign(g.canonical_rank().begin(), g.canonical_rank().end());
    edges = g.edges();
    std::sort(edges.begin(), edges.end(), [&](const Edge& a, const Edge& b) {
      return rank[a.i] != rank[b.i] ? rank[a.i] < rank[b.i] : rank[a.j] < rank[b.j];
    });
    for (const auto& e : edges) {
      index.receiver.push_back(rank[e.i]);
      index.sender.push_back(rank[e.j]);
    }
    thickness.resize(n);
    std::vector<double> ref(n * dim);
    for (std::size_t c = 0; c < n; ++c) {
      thickness[c] = g.thickness(order[c]);
      const auto p = g.reference_position(order[c]);
      std::copy(p.begin(), p.end(), ref.begin() + static_cast<std::ptrdiff_t>(c * dim));
    }
    geo_positions = Tensor::from(n, dim, minmax_normalise(ref, dim));
  }
};

class Surrogate {
 public:
  Surrogate() = default;
  // Parameters are shared handles; copying would alias weights.
  Surrogate(const Surrogate&) = delete;
  Surrogate& operator=(const Surrogate&) = delete;
  Surrogate(Surrogate&&) = default;
  Surrogate& operator=(Surrogate&&) = default;

  explicit Surrogate(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const auto seed = cfg_.seed;
    const std::size_t w = cfg_.hidden;
    encoder_ = Mlp(params_, "encoder", cfg_.node_feature_dim(), w, w, cfg_.mesh_activation, seed);
    const std::size_t mesh_blocks = cfg_.layers_pre + cfg_.layers_post;
    if (mesh_blocks > 0) {
      edge_encoder_ = Mlp(params_, "edge_encoder", edge_feature_dim(cfg_.dim), w, w, cfg_.mesh_activation, seed);
      for (std::size_t k = 0; k < mesh_blocks; ++k)
        mesh_.emplace_back(params_, "mesh." + std::to_string(k), w, seed, cfg_.mesh_activation);
    }
    if (cfg_.contact_enabled)
      contact_ = contact::ContactResidual(params_, "contact", w, cfg_.dim, cfg_.contact_alpha_init, seed);
    SliceAttentionOptions opts;
    opts.width = w;
    opts.tokens = cfg_.tokens;
    opts.heads = cfg_.heads;
    opts.kernel = uses_flare(cfg_.family) ? TokenKernel::kFlare : TokenKernel::kDense;
    opts.flare_routes = cfg_.flare_routes;
    opts.sharpened = cfg_.sharpened;
    opts.geo_dim = is_geometry_aware(cfg_.family) ? cfg_.dim : 0;
    opts.geo_width = cfg_.geo_width;
    opts.activation = cfg_.attention_activation;
    for (std::size_t k = 0; k < cfg_.layers_attn; ++k)
      attn_.emplace_back(params_, "attn." + std::to_string(k), opts, seed);
    decoder_ = Mlp(params_, "decoder", w, w, cfg_.dim, cfg_.mesh_activation, seed);
  }

  const ModelConfig& config() const { return cfg_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }
  bool has_contact() const { return contact_.has_value(); }
  Tensor* contact_alpha() { return contact_ ? &contact_->alpha : nullptr; }

  contact::ContactParams contact_params(const MeshGraph& g) const {
    contact::ContactParams p;
    p.radius = cfg_.contact_radius > 0.0 ? cfg_.contact_radius : contact::default_radius(g);
    p.k = cfg_.contact_k;
    p.alpha_init = cfg_.contact_alpha_init;
    return p;
  }

  // Normalised accelerations (node_count x dim, original node order) for the
  // state (x, v). `contacts` must be supplied iff the model has a contact block.
  Tensor forward(const MeshGraph& g, const CanonicalGraph& cg, const Tensor& x, const Tensor& v,
                 const NormStats& stats, const contact::ContactSet* contacts, ForwardTrace* trace = nullptr) const {
    require(g.dim() == cfg_.dim, ErrorKind::kShapeMismatch, "graph dimension does not match model");
    require(g.static_dim() == cfg_.static_dim, ErrorKind::kShapeMismatch, "static feature width does not match model");
    require(contacts == nullptr || contact_, ErrorKind::kInvalidArgument,
            "contact set supplied to a contact-free model");
    require(contacts != nullptr || !contact_, ErrorKind::kInvalidArgument,
            "contact-enabled model needs a contact set");

    const auto feats = ad::gather_rows(assemble_node_features(g, x, v, stats, cfg_.features), cg.order);
    require(feats.cols() == cfg_.node_feature_dim(), ErrorKind::kShapeMismatch, "node feature width mismatch");
    auto h = encoder_(feats);
    record(trace, h);

    Tensor e;
    if (!mesh_.empty()) e = edge_encoder_(ad::scale(build_edge_features(g, x, cg.edges), 1.0 / stats.length_scale));

    std::size_t block = 0;
    for (; block < cfg_.layers_pre; ++block) {
      std::tie(h, e) = mesh_[block](h, e, cg.index);
      record(trace, h);
    }

    if (contact_) {
      const auto pairs = contact::direct_pairs(*contacts, cg.rank);
      if (pairs.size() > 0) {
        const auto xc = ad::gather_rows(x, cg.order);
        h = (*contact_)(h, contact::pair_features(xc, cg.thickness, pairs, stats.length_scale), pairs);
      }
      record(trace, h);
    }

    for (const auto& a : attn_) {
      std::vector<double> w;
      h = a(h, &cg.geo_positions, trace != nullptr ? &w : nullptr);
      if (trace != nullptr) trace->slice_weights.push_back(std::move(w));
      record(trace, h);
    }

    for (; block < mesh_.size(); ++block) {
      std::tie(h, e) = mesh_[block](h, e, cg.index);
      record(trace, h);
    }

    return ad::gather_rows(decoder_(h), cg.rank);
  }

  Tensor forward(const MeshGraph& g, const Tensor& x, const Tensor& v, const NormStats& stats,
                 const contact::ContactSet* contacts, ForwardTrace* trace = nullptr) const {
    return forward(g, CanonicalGraph(g), x, v, stats, contacts, trace);
  }

 private:
  static void record(ForwardTrace* trace, const Tensor& h) {
    if (trace != nullptr) trace->latents.push_back(h);
  }

  ModelConfig cfg_;
  ParameterSet params_;
  Mlp encoder_;
  Mlp edge_encoder_;
  std::vector<MpnnBlock> mesh_;
  std::optional<contact::ContactResidual> contact_;
  std::vector<SliceAttentionBlock> attn_;
  Mlp decoder_;
};

}  // namespace crashsurr::nn
