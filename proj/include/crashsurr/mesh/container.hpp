#pragma once

// Trajectory container, version 1. All integers and reals little-endian.
//
//   header      magic "CRSHTRAJ", u32 version, u32 dim, u64 node_count,
//               u32 T, f64 dt, u32 static_dim, u32 design_dim,
//               u64 trajectory_count
//   design      design_dim x { u32 len, name bytes, f64 low, f64 high, f64 nominal }
//   per trajectory:
//     u64 sample_id
//     connectivity   u64 edge_count, edge_count x (u32 i, u32 j)
//     roles          node_count x u8 (0 free, 1 rigid)
//     static         node_count x static_dim x f64
//     reference      node_count x dim x f64
//     velocity       node_count x dim x f64 (initial velocity v_0)
//     positions      (T+1) x node_count x dim x f64
//     design         design_dim x f64
//     survival       u32 A, u32 B
//
// Velocities of frames t >= 1 are not stored; they are reconstructed on load
// by backward differences of the stored positions.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crashsurr/error.hpp"
#include "crashsurr/mesh/features.hpp"
#include "crashsurr/mesh/trajectory.hpp"
#include "crashsurr/util/bytes.hpp"
#include "crashsurr/util/hash.hpp"

namespace crashsurr {

inline constexpr char kContainerMagic[] = "CRSHTRAJ";
inline constexpr std::uint32_t kContainerVersion = 1;

struct TrajectorySet {
  DesignSpace space;
  std::vector<Trajectory> trajectories;
};

namespace detail {

inline void write_trajectory_block(util::ByteWriter& w, const Trajectory& tr) {
  const auto& g = *tr.graph;
  w.put(static_cast<std::uint64_t>(tr.design.id));
  w.put(static_cast<std::uint64_t>(g.edges().size()));
  for (const auto& e : g.edges()) {
    w.put(e.i);
    w.put(e.j);
  }
  for (auto r : g.roles()) w.put(static_cast<std::uint8_t>(r));
  w.put_all(g.static_features());
  w.put_all(g.reference_positions());
  w.put_all(tr.states.front().velocities);
  for (const auto& s : tr.states) w.put_all(s.positions);
  w.put_all(tr.design.values);
  w.put(tr.survival_pair.first);
  w.put(tr.survival_pair.second);
}

}  // namespace detail

// Encoded bytes of one trajectory block, used for per-sample hashes.
inline std::vector<std::uint8_t> encode_trajectory_block(const Trajectory& tr) {
  util::ByteWriter w;
  detail::write_trajectory_block(w, tr);
  return w.take();
}

inline std::vector<std::uint8_t> encode_container(const TrajectorySet& set) {
  require(!set.trajectories.empty(), ErrorKind::kInvalidArgument, "container needs at least one trajectory");
  const auto& first = set.trajectories.front();
  const auto& g0 = *first.graph;
  util::ByteWriter w;
  w.put_bytes(kContainerMagic, 8);
  w.put(kContainerVersion);
  w.put(static_cast<std::uint32_t>(g0.dim()));
  w.put(static_cast<std::uint64_t>(g0.node_count()));
  w.put(static_cast<std::uint32_t>(first.horizon()));
  w.put(first.dt);
  w.put(static_cast<std::uint32_t>(g0.static_dim()));
  w.put(static_cast<std::uint32_t>(set.space.size()));
  w.put(static_cast<std::uint64_t>(set.trajectories.size()));
  for (const auto& v : set.space) {
    w.put_string(v.name);
    w.put(v.low);
    w.put(v.high);
    w.put(v.nominal);
  }
  for (const auto& tr : set.trajectories) {
    tr.validate();
    require(tr.graph->dim() == g0.dim() && tr.graph->node_count() == g0.node_count() &&
                tr.graph->static_dim() == g0.static_dim() && tr.horizon() == first.horizon() && tr.dt == first.dt,
            ErrorKind::kShapeMismatch, "trajectories in one container must share dim, node_count, T and dt");
    require(tr.design.values.size() == set.space.size(), ErrorKind::kShapeMismatch,
            "design vector length does not match design space");
    detail::write_trajectory_block(w, tr);
  }
  return w.take();
}

inline TrajectorySet decode_container(std::vector<std::uint8_t> bytes) {
  util::ByteReader r(std::move(bytes));
  r.expect_magic(kContainerMagic, 8);
  const auto version = r.get<std::uint32_t>();
  require(version == kContainerVersion, ErrorKind::kFormat, "unsupported container version " + std::to_string(version));
  const std::size_t dim = r.get<std::uint32_t>();
  const std::size_t n = r.get<std::uint64_t>();
  const std::size_t horizon = r.get<std::uint32_t>();
  const double dt = r.get<double>();
  const std::size_t static_dim = r.get<std::uint32_t>();
  const std::size_t design_dim = r.get<std::uint32_t>();
  const std::size_t count = r.get<std::uint64_t>();

  TrajectorySet set;
  for (std::size_t k = 0; k < design_dim; ++k) {
    DesignVariable v;
    v.name = r.get_string();
    v.low = r.get<double>();
    v.high = r.get<double>();
    v.nominal = r.get<double>();
    set.space.push_back(v);
  }
  for (std::size_t k = 0; k < count; ++k) {
    Trajectory tr;
    tr.dt = dt;
    tr.design.id = r.get<std::uint64_t>();
    const std::size_t edge_count = r.get<std::uint64_t>();
    std::vector<Edge> edges(edge_count);
    for (auto& e : edges) {
      e.i = r.get<std::uint32_t>();
      e.j = r.get<std::uint32_t>();
    }
    std::vector<NodeRole> roles(n);
    for (auto& role : roles) {
      const auto raw = r.get<std::uint8_t>();
      require(raw <= 1, ErrorKind::kFormat, "bad node role byte");
      role = static_cast<NodeRole>(raw);
    }
    auto feats = r.get_many<double>(n * static_dim);
    auto ref = r.get_many<double>(n * dim);
    auto v0 = r.get_many<double>(n * dim);
    tr.graph = std::make_shared<const MeshGraph>(dim, std::move(edges), std::move(roles), std::move(feats),
                                                 static_dim, std::move(ref));
    std::vector<std::vector<double>> xs;
    for (std::size_t t = 0; t <= horizon; ++t) xs.push_back(r.get_many<double>(n * dim));
    for (std::size_t t = 0; t <= horizon; ++t) {
      auto v = t == 0 ? v0 : estimate_velocity(xs[t], xs[t - 1], dt);
      tr.states.emplace_back(n, dim, xs[t], std::move(v), t);
    }
    tr.design.values = r.get_many<double>(design_dim);
    tr.survival_pair.first = r.get<std::uint32_t>();
    tr.survival_pair.second = r.get<std::uint32_t>();
    tr.validate();
    set.trajectories.push_back(std::move(tr));
  }
  require(r.at_end(), ErrorKind::kFormat, "trailing bytes after container payload");
  return set;
}

inline nlohmann::json container_sidecar(const TrajectorySet& set) {
  const auto& first = set.trajectories.front();
  nlohmann::json j;
  j["format"] = "CRSHTRAJ";
  j["version"] = kContainerVersion;
  j["dim"] = first.graph->dim();
  j["node_count"] = first.graph->node_count();
  j["T"] = first.horizon();
  j["dt_ms"] = first.dt;
  j["static_dim"] = first.graph->static_dim();
  j["trajectory_count"] = set.trajectories.size();
  j["design_variables"] = nlohmann::json::array();
  for (const auto& v : set.space)
    j["design_variables"].push_back({{"name", v.name}, {"low", v.low}, {"high", v.high}, {"nominal", v.nominal}});
  j["sample_ids"] = nlohmann::json::array();
  for (const auto& tr : set.trajectories) j["sample_ids"].push_back(tr.design.id);
  return j;
}

// Writes `path` and a JSON sidecar next to it (`path` + ".json").
inline void write_container(const std::string& path, const TrajectorySet& set) {
  util::write_file(path, encode_container(set));
  util::write_text(path + ".json", container_sidecar(set).dump(2) + "\n");
}

inline TrajectorySet read_container(const std::string& path) { return decode_container(util::read_file(path)); }

}  // namespace crashsurr
