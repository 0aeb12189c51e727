#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "crashsurr/ad/tensor.hpp"
#include "crashsurr/error.hpp"
#include "crashsurr/mesh/graph.hpp"
#include "crashsurr/mesh/trajectory.hpp"

namespace crashsurr {

// Backward finite difference (x_t - x_prev) / dt.
inline std::vector<double> estimate_velocity(std::span<const double> x_t, std::span<const double> x_prev,
                                             double dt) {
  require(x_t.size() == x_prev.size(), ErrorKind::kShapeMismatch, "estimate_velocity: shape mismatch");
  require(dt > 0.0, ErrorKind::kInvalidArgument, "estimate_velocity: dt must be positive");
  std::vector<double> v(x_t.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = (x_t[i] - x_prev[i]) / dt;
  return v;
}

inline constexpr double kStdFloor = 1e-8;

// Normalisation statistics fitted on the training split.
//
// Dynamic node features are laid out as [v (dim), u (dim), |v|, |u|] where
// u = x - reference position.
struct NormStats {
  std::size_t dim = 0;
  std::vector<double> accel_mean;
  std::vector<double> accel_std;
  std::vector<double> feature_mean;
  std::vector<double> feature_std;
  // Mean undeformed edge length; scales edge, contact and loss quantities.
  double length_scale = 1.0;
  bool fitted = false;

  std::size_t velocity_slot() const { return 0; }
  std::size_t displacement_slot() const { return dim; }
  std::size_t speed_slot() const { return 2 * dim; }
  std::size_t displacement_norm_slot() const { return 2 * dim + 1; }
  static std::size_t dynamic_dim(std::size_t dim) { return 2 * dim + 2; }
};

namespace detail {

struct Welford {
  double count = 0.0;
  double mean = 0.0;
  double m2 = 0.0;
  void push(double x) {
    count += 1.0;
    const double delta = x - mean;
    mean += delta / count;
    m2 += delta * (x - mean);
  }
  double stddev() const { return count > 0.0 ? std::sqrt(m2 / count) : 0.0; }
};

inline double norm_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace detail

// Target accelerations (v_{t+1} - v_t) / dt for t = 0..T-1, row-major
// node_count x dim per transition.
inline std::vector<std::vector<double>> target_accelerations(const Trajectory& traj) {
  std::vector<std::vector<double>> out;
  for (std::size_t t = 0; t + 1 < traj.states.size(); ++t)
    out.push_back(estimate_velocity(traj.states[t + 1].velocities, traj.states[t].velocities, traj.dt));
  return out;
}

// Per-component mean and population standard deviation (floored) of target
// accelerations and dynamic node features, over FREE nodes of the training
// trajectories only.
inline NormStats fit_norm_stats(std::span<const Trajectory> train) {
  require(!train.empty(), ErrorKind::kInvalidArgument, "fit_norm_stats: no trajectories");
  bool enough = false;
  for (const auto& tr : train) enough = enough || tr.horizon() >= 2;
  require(enough, ErrorKind::kInvalidArgument, "fit_norm_stats: need a trajectory with >= 2 transitions");

  const std::size_t dim = train.front().graph->dim();
  const std::size_t fdim = NormStats::dynamic_dim(dim);
  std::vector<detail::Welford> acc(dim), feat(fdim);
  double edge_len_sum = 0.0;
  double edge_count = 0.0;

  for (const auto& tr : train) {
    const auto& g = *tr.graph;
    require(g.dim() == dim, ErrorKind::kShapeMismatch, "fit_norm_stats: mixed spatial dimensions");
    const auto accels = target_accelerations(tr);
    for (std::size_t t = 0; t < accels.size(); ++t) {
      const auto& st = tr.states[t];
      for (std::size_t n = 0; n < g.node_count(); ++n) {
        if (!g.is_free(n)) continue;
        for (std::size_t d = 0; d < dim; ++d) acc[d].push(accels[t][n * dim + d]);
        const auto v = st.velocity(n);
        const auto x = st.position(n);
        const auto ref = g.reference_position(n);
        std::vector<double> u(dim);
        for (std::size_t d = 0; d < dim; ++d) {
          u[d] = x[d] - ref[d];
          feat[d].push(v[d]);
          feat[dim + d].push(u[d]);
        }
        feat[2 * dim].push(detail::norm_of(v));
        feat[2 * dim + 1].push(detail::norm_of(u));
      }
    }
    for (const auto& e : g.edges()) {
      if (e.i > e.j) continue;
      const auto a = g.reference_position(e.i), b = g.reference_position(e.j);
      double s = 0.0;
      for (std::size_t d = 0; d < dim; ++d) s += (b[d] - a[d]) * (b[d] - a[d]);
      edge_len_sum += std::sqrt(s);
      edge_count += 1.0;
    }
  }

  NormStats st;
  st.dim = dim;
  for (const auto& w : acc) {
    st.accel_mean.push_back(w.mean);
    st.accel_std.push_back(std::max(w.stddev(), kStdFloor));
  }
  for (const auto& w : feat) {
    st.feature_mean.push_back(w.mean);
    st.feature_std.push_back(std::max(w.stddev(), kStdFloor));
  }
  st.length_scale = edge_count > 0.0 ? edge_len_sum / edge_count : 1.0;
  st.fitted = true;
  return st;
}

// Which node features a model consumes. Every set starts with the
// normalised velocity followed by the static features.
enum class FeatureSet {
  kKinematic,  // v, static
  kMesh,       // v, static, |v|
  kHybrid,     // v, static, |v|, u, |u|
};

inline std::size_t node_feature_dim(FeatureSet set, std::size_t dim, std::size_t static_dim) {
  switch (set) {
    case FeatureSet::kKinematic: return dim + static_dim;
    case FeatureSet::kMesh: return dim + static_dim + 1;
    case FeatureSet::kHybrid: return 2 * dim + static_dim + 2;
  }
  return 0;
}

// Differentiable node-feature assembly from positions x and velocities v
// (both node_count x dim tensors).
inline ad::Tensor assemble_node_features(const MeshGraph& graph, const ad::Tensor& x, const ad::Tensor& v,
                                         const NormStats& stats, FeatureSet set) {
  require(stats.fitted, ErrorKind::kNotFitted, "normalisation statistics are not fitted");
  const std::size_t n = graph.node_count(), dim = graph.dim();
  require(stats.dim == dim, ErrorKind::kShapeMismatch, "stats dimension does not match graph");
  require(x.rows() == n && x.cols() == dim && v.rows() == n && v.cols() == dim, ErrorKind::kShapeMismatch,
          "assemble_node_features: state shape");

  auto normalise = [&](const ad::Tensor& t, std::size_t slot) {
    std::vector<double> neg_mean(t.cols()), inv_std(t.cols());
    for (std::size_t c = 0; c < t.cols(); ++c) {
      neg_mean[c] = -stats.feature_mean[slot + c];
      inv_std[c] = 1.0 / stats.feature_std[slot + c];
    }
    return ad::mul_row(ad::add_row(t, ad::Tensor::from(1, t.cols(), neg_mean)),
                       ad::Tensor::from(1, t.cols(), inv_std));
  };

  std::vector<ad::Tensor> parts;
  parts.push_back(normalise(v, stats.velocity_slot()));
  parts.push_back(ad::Tensor::from(n, graph.static_dim(), graph.static_features()));
  if (set == FeatureSet::kMesh || set == FeatureSet::kHybrid)
    parts.push_back(normalise(ad::row_norm(v), stats.speed_slot()));
  if (set == FeatureSet::kHybrid) {
    const auto u = ad::sub(x, ad::Tensor::from(n, dim, graph.reference_positions()));
    parts.push_back(normalise(u, stats.displacement_slot()));
    parts.push_back(normalise(ad::row_norm(u), stats.displacement_norm_slot()));
  }
  return ad::concat_cols(parts);
}

inline ad::Tensor assemble_node_features(const MeshGraph& graph, const NodeState& state, const NormStats& stats,
                                         FeatureSet set) {
  return assemble_node_features(graph, ad::Tensor::from(state.node_count, state.dim, state.positions),
                                ad::Tensor::from(state.node_count, state.dim, state.velocities), stats, set);
}

inline std::size_t edge_feature_dim(std::size_t dim) { return 2 * dim + 2; }

// Per-edge [x_j - x_i, |x_j - x_i|, u_j - u_i, |u_j - u_i|] for the edges in
// `edges`, differentiable in x.
inline ad::Tensor build_edge_features(const MeshGraph& graph, const ad::Tensor& x, const std::vector<Edge>& edges) {
  const std::size_t dim = graph.dim();
  require(x.rows() == graph.node_count() && x.cols() == dim, ErrorKind::kShapeMismatch,
          "build_edge_features: state shape");
  ad::Index src(edges.size()), dst(edges.size());
  for (std::size_t k = 0; k < edges.size(); ++k) {
    src[k] = edges[k].i;
    dst[k] = edges[k].j;
  }
  const auto ref = ad::Tensor::from(graph.node_count(), dim, graph.reference_positions());
  const auto u = ad::sub(x, ref);
  const auto rel_x = ad::sub(ad::gather_rows(x, dst), ad::gather_rows(x, src));
  const auto rel_u = ad::sub(ad::gather_rows(u, dst), ad::gather_rows(u, src));
  return ad::concat_cols({rel_x, ad::row_norm(rel_x), rel_u, ad::row_norm(rel_u)});
}

// Plain-value edge features for every edge of the graph, row-major
// edge_count x (2 dim + 2).
inline std::vector<double> build_edge_features(const MeshGraph& graph, const NodeState& state) {
  require(state.node_count == graph.node_count() && state.dim == graph.dim(), ErrorKind::kShapeMismatch,
          "build_edge_features: state does not match graph");
  ad::NoGradGuard guard;
  const auto t = build_edge_features(graph, ad::Tensor::from(state.node_count, state.dim, state.positions),
                                     graph.edges());
  return {t.values().begin(), t.values().end()};
}

}  // namespace crashsurr
