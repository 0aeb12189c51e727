#pragma once

// Sparse proximity contact: spatial-hash radius search over the current
// geometry, thickness-aware gap computation, and per-node top-k selection.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "crashsurr/error.hpp"
#include "crashsurr/mesh/graph.hpp"

namespace crashsurr::contact {

struct CandidatePair {
  std::uint32_t i;
  std::uint32_t j;
  double distance;
  friend bool operator==(const CandidatePair&, const CandidatePair&) = default;
};

struct ContactPair {
  std::uint32_t i;  // source
  std::uint32_t j;  // partner
  double distance;  // mm
  double gap;       // mm, distance minus mean half-thickness, clamped at 0
};

struct ContactSet {
  std::vector<ContactPair> pairs;
  std::size_t built_at = 0;
  std::size_t k = 1;
  double radius = 0.0;

  bool empty() const { return pairs.empty(); }
  std::size_t size() const { return pairs.size(); }
};

struct ContactParams {
  double radius = 1.0;
  std::size_t k = 16;
  double alpha_init = 1e-3;

  void validate() const {
    require(radius > 0.0, ErrorKind::kInvalidArgument, "contact radius must be positive");
    require(k >= 1, ErrorKind::kInvalidArgument, "contact k must be >= 1");
  }
};

// Default search radius: three undeformed median edge lengths.
inline double default_radius(const MeshGraph& graph) { return 3.0 * graph.median_edge_length(); }

namespace detail {

struct CellKey {
  std::array<std::int64_t, 3> c{};
  friend bool operator==(const CellKey&, const CellKey&) = default;
};

struct CellHash {
  std::size_t operator()(const CellKey& k) const noexcept {
    std::uint64_t h = 14695981039346656037ull;
    for (auto v : k.c) {
      h ^= static_cast<std::uint64_t>(v);
      h *= 1099511628211ull;
    }
    return static_cast<std::size_t>(h);
  }
};

inline double distance(std::span<const double> pos, std::size_t dim, std::size_t a, std::size_t b) {
  double s = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    const double diff = pos[b * dim + d] - pos[a * dim + d];
    s += diff * diff;
  }
  return std::sqrt(s);
}

}  // namespace detail

// All unordered pairs (i < j) with |x_i - x_j| <= radius that are not mesh
// edges, sorted by (i, j). Uses a uniform hash grid of cell size `radius`.
inline std::vector<CandidatePair> radius_search(std::span<const double> positions, const MeshGraph& graph,
                                                double radius) {
  require(radius > 0.0, ErrorKind::kInvalidArgument, "radius_search: radius must be positive");
  const std::size_t dim = graph.dim(), n = graph.node_count();
  require(positions.size() == n * dim, ErrorKind::kShapeMismatch, "radius_search: positions shape");

  auto cell_of = [&](std::size_t node) {
    detail::CellKey key;
    for (std::size_t d = 0; d < dim; ++d)
      key.c[d] = static_cast<std::int64_t>(std::floor(positions[node * dim + d] / radius));
    return key;
  };

  std::unordered_map<detail::CellKey, std::vector<std::uint32_t>, detail::CellHash> grid;
  grid.reserve(n);
  for (std::uint32_t a = 0; a < n; ++a) grid[cell_of(a)].push_back(a);

  std::vector<CandidatePair> out;
  const int span_z = dim == 3 ? 1 : 0;
  for (std::uint32_t a = 0; a < n; ++a) {
    const auto home = cell_of(a);
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dz = -span_z; dz <= span_z; ++dz) {
          detail::CellKey key = home;
          key.c[0] += dx;
          key.c[1] += dy;
          key.c[2] += dz;
          const auto it = grid.find(key);
          if (it == grid.end()) continue;
          for (std::uint32_t b : it->second) {
            if (b <= a || graph.has_edge(a, b)) continue;
            const double dist = detail::distance(positions, dim, a, b);
            if (dist <= radius) out.push_back({a, b, dist});
          }
        }
  }
  std::sort(out.begin(), out.end(), [](const CandidatePair& x, const CandidatePair& y) {
    return x.i != y.i ? x.i < y.i : x.j < y.j;
  });
  return out;
}

// Keeps, for every node, its k nearest candidate partners (ties broken by
// the partner's canonical rank). Each selected unordered pair is stored once;
// its source is the first selecting node in index order, so no node is the
// source of more than k pairs. Output sorted by (i, j).
inline ContactSet filter_and_sparsify(std::span<const CandidatePair> candidates, const MeshGraph& graph,
                                      const ContactParams& params, std::size_t built_at = 0) {
  params.validate();
  const std::size_t n = graph.node_count();
  const auto& rank = graph.canonical_rank();

  struct Option {
    std::uint32_t partner;
    double distance;
  };
  std::vector<std::vector<Option>> options(n);
  for (const auto& c : candidates) {
    require(c.i < n && c.j < n && c.i != c.j, ErrorKind::kInvalidArgument, "filter_and_sparsify: bad candidate");
    options[c.i].push_back({c.j, c.distance});
    options[c.j].push_back({c.i, c.distance});
  }

  ContactSet out;
  out.built_at = built_at;
  out.k = params.k;
  out.radius = params.radius;
  std::vector<std::vector<std::uint32_t>> stored(n);
  for (std::uint32_t a = 0; a < n; ++a) {
    auto& opts = options[a];
    std::sort(opts.begin(), opts.end(), [&](const Option& x, const Option& y) {
      return x.distance != y.distance ? x.distance < y.distance : rank[x.partner] < rank[y.partner];
    });
    if (opts.size() > params.k) opts.resize(params.k);
    for (const auto& o : opts) {
      const auto& seen = stored[o.partner];
      if (std::find(seen.begin(), seen.end(), a) != seen.end()) continue;
      const double half_thickness = 0.5 * (graph.thickness(a) + graph.thickness(o.partner));
      out.pairs.push_back({a, o.partner, o.distance, std::max(0.0, o.distance - half_thickness)});
      stored[a].push_back(o.partner);
    }
  }
  std::sort(out.pairs.begin(), out.pairs.end(), [](const ContactPair& x, const ContactPair& y) {
    return x.i != y.i ? x.i < y.i : x.j < y.j;
  });
  return out;
}

inline ContactSet build_contacts(std::span<const double> positions, const MeshGraph& graph,
                                 const ContactParams& params, std::size_t built_at = 0) {
  const auto candidates = radius_search(positions, graph, params.radius);
  return filter_and_sparsify(candidates, graph, params, built_at);
}

}  // namespace crashsurr::contact
