#pragma once

#include <string>
#include <utility>

#include "crashsurr/ad/tensor.hpp"
#include "crashsurr/nn/layers.hpp"

namespace crashsurr::nn {

// Directed edge list in the index space of the latent matrix. The message of
// edge k is aggregated at receiver[k].
struct EdgeIndex {
  ad::Index receiver;
  ad::Index sender;
  std::size_t size() const { return receiver.size(); }
};

// One message-passing round: an edge update followed by a node update, each
// an MLP with layer-normalised residual.
//
//   m_ij = e_ij + LN(f_e([h_i, h_j, e_ij]))
//   h_i' = h_i  + LN(f_n([h_i, sum_j m_ij]))
struct MpnnBlock {
  Mlp edge_mlp;
  LayerNorm edge_norm;
  Mlp node_mlp;
  LayerNorm node_norm;

  MpnnBlock() = default;
  MpnnBlock(ParameterSet& ps, const std::string& prefix, std::size_t width, std::uint64_t seed,
            Activation act = Activation::kRelu)
      : edge_mlp(ps, prefix + ".edge_mlp", 3 * width, width, width, act, seed),
        edge_norm(ps, prefix + ".edge_norm", width),
        node_mlp(ps, prefix + ".node_mlp", 2 * width, width, width, act, seed),
        node_norm(ps, prefix + ".node_norm", width) {}

  // Returns updated node latents and the new edge latents m_ij.
  std::pair<Tensor, Tensor> operator()(const Tensor& h, const Tensor& e, const EdgeIndex& edges) const {
    require(e.rows() == edges.size(), ErrorKind::kShapeMismatch, "mpnn: edge latent count != edge count");
    const auto hi = ad::gather_rows(h, edges.receiver);
    const auto hj = ad::gather_rows(h, edges.sender);
    const auto m = ad::add(e, edge_norm(edge_mlp(ad::concat_cols({hi, hj, e}))));
    const auto agg = ad::scatter_add_rows(m, edges.receiver, h.rows());
    const auto h_next = ad::add(h, node_norm(node_mlp(ad::concat_cols({h, agg}))));
    return {h_next, m};
  }
};

}  // namespace crashsurr::nn
