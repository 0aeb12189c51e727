#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "crashsurr/error.hpp"

namespace crashsurr {

enum class NodeRole : std::uint8_t { kFree = 0, kRigid = 1 };

struct Edge {
  std::uint32_t i;
  std::uint32_t j;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

// Static per-node feature slots. Anything past kStaticBaseDim is free-form.
inline constexpr std::size_t kRoleFreeSlot = 0;
inline constexpr std::size_t kRoleRigidSlot = 1;
inline constexpr std::size_t kThicknessSlot = 2;
inline constexpr std::size_t kStaticBaseDim = 3;

// Structural mesh graph with node roles, static features and the undeformed
// reference configuration. Immutable after construction.
//
// The graph also fixes a canonical node order (lexicographic in reference
// position, then static features, then index). Models evaluate every
// reduction in this order, so relabelling the nodes of a graph never changes
// floating-point results.
class MeshGraph {
 public:
  MeshGraph() = default;

  MeshGraph(std::size_t dim, std::vector<Edge> edges, std::vector<NodeRole> roles,
            std::vector<double> static_features, std::size_t static_dim,
            std::vector<double> reference_positions)
      : dim_(dim),
        node_count_(roles.size()),
        static_dim_(static_dim),
        edges_(std::move(edges)),
        roles_(std::move(roles)),
        static_features_(std::move(static_features)),
        reference_positions_(std::move(reference_positions)) {
    validate();
    build_canonical_order();
    build_adjacency();
  }

  // Both directions of every undirected pair, sorted.
  static std::vector<Edge> symmetric_edges(std::span<const std::pair<std::uint32_t, std::uint32_t>> pairs) {
    std::vector<Edge> out;
    out.reserve(pairs.size() * 2);
    for (auto [a, b] : pairs) {
      out.push_back({a, b});
      out.push_back({b, a});
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  // Static features for the default layout: role one-hot followed by thickness.
  static std::vector<double> make_static_features(std::span<const NodeRole> roles,
                                                  std::span<const double> thickness) {
    require(roles.size() == thickness.size(), ErrorKind::kShapeMismatch, "roles vs thickness length");
    std::vector<double> out(roles.size() * kStaticBaseDim, 0.0);
    for (std::size_t n = 0; n < roles.size(); ++n) {
      out[n * kStaticBaseDim + (roles[n] == NodeRole::kFree ? kRoleFreeSlot : kRoleRigidSlot)] = 1.0;
      out[n * kStaticBaseDim + kThicknessSlot] = thickness[n];
    }
    return out;
  }

  std::size_t dim() const { return dim_; }
  std::size_t node_count() const { return node_count_; }
  std::size_t static_dim() const { return static_dim_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<NodeRole>& roles() const { return roles_; }
  NodeRole role(std::size_t n) const { return roles_[n]; }
  bool is_free(std::size_t n) const { return roles_[n] == NodeRole::kFree; }
  const std::vector<double>& static_features() const { return static_features_; }
  const std::vector<double>& reference_positions() const { return reference_positions_; }
  double thickness(std::size_t n) const { return static_features_[n * static_dim_ + kThicknessSlot]; }
  std::span<const double> reference_position(std::size_t n) const {
    return {reference_positions_.data() + n * dim_, dim_};
  }

  std::size_t free_count() const {
    return static_cast<std::size_t>(std::count(roles_.begin(), roles_.end(), NodeRole::kFree));
  }

  // canonical_order()[k] is the node at canonical position k.
  const std::vector<std::uint32_t>& canonical_order() const { return canonical_order_; }
  // canonical_rank()[n] is the canonical position of node n.
  const std::vector<std::uint32_t>& canonical_rank() const { return canonical_rank_; }

  // Sorted neighbour list of node n.
  std::span<const std::uint32_t> neighbors(std::size_t n) const {
    return {adjacency_.data() + adjacency_offsets_[n], adjacency_offsets_[n + 1] - adjacency_offsets_[n]};
  }

  bool has_edge(std::uint32_t i, std::uint32_t j) const {
    auto nb = neighbors(i);
    return std::binary_search(nb.begin(), nb.end(), j);
  }

  double median_edge_length() const {
    std::vector<double> lengths;
    for (const auto& e : edges_) {
      if (e.i > e.j) continue;
      double s = 0.0;
      for (std::size_t d = 0; d < dim_; ++d) {
        const double diff = reference_positions_[e.j * dim_ + d] - reference_positions_[e.i * dim_ + d];
        s += diff * diff;
      }
      lengths.push_back(std::sqrt(s));
    }
    require(!lengths.empty(), ErrorKind::kInvalidArgument, "median_edge_length: graph has no edges");
    const auto mid = lengths.begin() + static_cast<std::ptrdiff_t>(lengths.size() / 2);
    std::nth_element(lengths.begin(), mid, lengths.end());
    if (lengths.size() % 2 == 1) return *mid;
    const double upper = *mid;
    const double lower = *std::max_element(lengths.begin(), mid);
    return 0.5 * (lower + upper);
  }

 private:
  void validate() const {
    require(dim_ == 2 || dim_ == 3, ErrorKind::kInvalidArgument, "spatial dimension must be 2 or 3");
    require(node_count_ > 0, ErrorKind::kInvalidArgument, "graph must have at least one node");
    require(static_dim_ >= kStaticBaseDim, ErrorKind::kInvalidArgument, "static feature dimension < 3");
    require(static_features_.size() == node_count_ * static_dim_, ErrorKind::kShapeMismatch,
            "static feature block does not match node_count x static_dim");
    require(reference_positions_.size() == node_count_ * dim_, ErrorKind::kShapeMismatch,
            "reference positions do not match node_count x dim");
    require(std::any_of(roles_.begin(), roles_.end(), [](NodeRole r) { return r == NodeRole::kFree; }),
            ErrorKind::kInvalidArgument, "graph has no FREE node");
    for (double v : reference_positions_)
      require(std::isfinite(v), ErrorKind::kNonFinite, "non-finite reference position");

    std::vector<Edge> sorted = edges_;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t k = 0; k < sorted.size(); ++k) {
      const auto& e = sorted[k];
      require(e.i < node_count_ && e.j < node_count_, ErrorKind::kInvalidArgument,
              "edge index out of range");
      require(e.i != e.j, ErrorKind::kInvalidArgument, "self-loop on node " + std::to_string(e.i));
      require(k == 0 || !(sorted[k - 1] == e), ErrorKind::kInvalidArgument,
              "duplicate edge (" + std::to_string(e.i) + "," + std::to_string(e.j) + ")");
      require(std::binary_search(sorted.begin(), sorted.end(), Edge{e.j, e.i}), ErrorKind::kInvalidArgument,
              "edge (" + std::to_string(e.i) + "," + std::to_string(e.j) + ") lacks its reverse");
    }
  }

  void build_canonical_order() {
    canonical_order_.resize(node_count_);
    std::iota(canonical_order_.begin(), canonical_order_.end(), 0u);
    std::sort(canonical_order_.begin(), canonical_order_.end(), [this](std::uint32_t a, std::uint32_t b) {
      for (std::size_t d = 0; d < dim_; ++d) {
        const double pa = reference_positions_[a * dim_ + d], pb = reference_positions_[b * dim_ + d];
        if (pa != pb) return pa < pb;
      }
      for (std::size_t s = 0; s < static_dim_; ++s) {
        const double fa = static_features_[a * static_dim_ + s], fb = static_features_[b * static_dim_ + s];
        if (fa != fb) return fa < fb;
      }
      return a < b;
    });
    canonical_rank_.resize(node_count_);
    for (std::uint32_t k = 0; k < node_count_; ++k) canonical_rank_[canonical_order_[k]] = k;
  }

  void build_adjacency() {
    adjacency_offsets_.assign(node_count_ + 1, 0);
    for (const auto& e : edges_) ++adjacency_offsets_[e.i + 1];
    for (std::size_t n = 0; n < node_count_; ++n) adjacency_offsets_[n + 1] += adjacency_offsets_[n];
    adjacency_.resize(edges_.size());
    std::vector<std::size_t> cursor(adjacency_offsets_.begin(), adjacency_offsets_.end() - 1);
    for (const auto& e : edges_) adjacency_[cursor[e.i]++] = e.j;
    for (std::size_t n = 0; n < node_count_; ++n)
      std::sort(adjacency_.begin() + static_cast<std::ptrdiff_t>(adjacency_offsets_[n]),
                adjacency_.begin() + static_cast<std::ptrdiff_t>(adjacency_offsets_[n + 1]));
  }

  std::size_t dim_ = 2;
  std::size_t node_count_ = 0;
  std::size_t static_dim_ = kStaticBaseDim;
  std::vector<Edge> edges_;
  std::vector<NodeRole> roles_;
  std::vector<double> static_features_;
  std::vector<double> reference_positions_;
  std::vector<std::uint32_t> canonical_order_;
  std::vector<std::uint32_t> canonical_rank_;
  std::vector<std::size_t> adjacency_offsets_;
  std::vector<std::uint32_t> adjacency_;
};

// Relabels a graph: node n of the input becomes node perm[n] of the output.
inline MeshGraph permute_graph(const MeshGraph& g, std::span<const std::uint32_t> perm) {
  const std::size_t n = g.node_count(), dim = g.dim(), sd = g.static_dim();
  require(perm.size() == n, ErrorKind::kShapeMismatch, "permutation length");
  std::vector<NodeRole> roles(n);
  std::vector<double> feats(n * sd), ref(n * dim);
  for (std::size_t a = 0; a < n; ++a) {
    roles[perm[a]] = g.role(a);
    std::copy_n(g.static_features().data() + a * sd, sd, feats.data() + perm[a] * sd);
    std::copy_n(g.reference_positions().data() + a * dim, dim, ref.data() + perm[a] * dim);
  }
  std::vector<Edge> edges;
  edges.reserve(g.edges().size());
  for (const auto& e : g.edges()) edges.push_back({perm[e.i], perm[e.j]});
  return MeshGraph(dim, std::move(edges), std::move(roles), std::move(feats), sd, std::move(ref));
}

}  // namespace crashsurr
