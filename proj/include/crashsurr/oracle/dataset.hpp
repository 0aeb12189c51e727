#pragma once

// Toy side-pole impact. A triangulated 2D lattice (rows along the impact
// direction, row 0 facing the pole) moves at impact_speed toward a fixed
// rigid pole. The pole takes part in the mechanics as a penalty circle and
// in the graph as a ring of RIGID nodes, so surrogates see it only through
// node roles, positions and (for contact models) proximity pairs.
//
// Design variables (toy scale, structure mirrors an 8-variable side-impact DOE):
//   pole_position   lateral pole offset from the lattice centre, mm
//   thickness_sill  thickness of the two front rows, mm
//   thickness_patch thickness of the central third behind them, mm
//   depth_front     bulge of the front row toward the pole, mm
//   width_front     lateral stretch of the front rows, mm
//   depth_sill      shift of the front rows toward the pole, mm
//   curvature_sill  parabolic bend of the front rows, mm
//   impact_speed    initial lattice speed, mm/ms

#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "crashsurr/error.hpp"
#include "crashsurr/mesh/container.hpp"
#include "crashsurr/mesh/graph.hpp"
#include "crashsurr/mesh/trajectory.hpp"
#include "crashsurr/oracle/lhs.hpp"
#include "crashsurr/oracle/mass_spring.hpp"
#include "crashsurr/util/hash.hpp"
#include "crashsurr/util/parallel.hpp"

namespace crashsurr::oracle {

enum DesignSlot : std::size_t {
  kPolePosition = 0,
  kThicknessSill,
  kThicknessPatch,
  kDepthFront,
  kWidthFront,
  kDepthSill,
  kCurvatureSill,
  kImpactSpeed,
  kDesignSlots
};

inline DesignSpace toy_design_space() {
  return {{"pole_position", -200.0, 200.0, 0.0}, {"thickness_sill", 1.2, 1.8, 1.5},
          {"thickness_patch", 0.8, 1.6, 1.2},    {"depth_front", -2.0, 12.0, 5.0},
          {"width_front", -7.0, 7.0, 0.0},       {"depth_sill", -10.0, 10.0, 0.0},
          {"curvature_sill", -10.0, 5.0, -2.5},  {"impact_speed", 7.5, 10.0, 8.75}};
}

inline DesignSample nominal_design(const DesignSpace& space) {
  DesignSample s;
  for (const auto& v : space) s.values.push_back(v.nominal);
  return s;
}

struct OracleConfig {
  std::size_t columns = 24;
  std::size_t rows = 8;
  double spacing = 40.0;          // mm
  double base_thickness = 1.0;    // mm, outside the two thickness regions
  double node_mass = 1.0;         // kg
  double stiffness = 1.5;         // kN/mm per mm of thickness, for a spring of length `spacing`
  double bending_ratio = 0.1;     // second-neighbour springs relative to `stiffness`
  double damping = 0.05;          // kg/ms per spring
  double yield_strain = 0.05;     // 0 disables plasticity
  double pole_radius = 127.0;     // mm
  std::size_t pole_nodes = 24;
  double pole_gap = 40.0;         // mm, initial clearance of the undeformed flat front row
  double contact_stiffness = 2.0e3;  // kN/mm
  double contact_damping = 5.0;      // kg/ms
  double inner_dt = 0.01;         // ms
  double output_dt = 5.0;         // ms
  std::size_t horizon = 15;
  double penetration_tolerance = 0.02;  // fraction of the pole radius

  std::size_t lattice_nodes() const { return rows * columns; }
  std::size_t substeps() const {
    const double ratio = output_dt / inner_dt;
    const auto n = static_cast<std::size_t>(std::llround(ratio));
    require(n >= 1 && std::abs(ratio - static_cast<double>(n)) < 1e-9 * ratio, ErrorKind::kInvalidArgument,
            "output dt must be an integer multiple of the inner dt");
    return n;
  }

  void validate() const {
    require(columns >= 3 && rows >= 4, ErrorKind::kInvalidArgument, "lattice must be at least 3 x 4");
    require(spacing > 0 && node_mass > 0 && stiffness > 0 && base_thickness > 0, ErrorKind::kInvalidArgument,
            "lattice constants must be positive");
    require(pole_radius > 0 && pole_nodes >= 3 && pole_gap >= 0, ErrorKind::kInvalidArgument, "bad pole geometry");
    require(inner_dt > 0 && output_dt > 0 && horizon >= 1, ErrorKind::kInvalidArgument, "bad time stepping");
    substeps();
  }

  nlohmann::json to_json() const {
    return {{"columns", columns},
            {"rows", rows},
            {"spacing", spacing},
            {"base_thickness", base_thickness},
            {"node_mass", node_mass},
            {"stiffness", stiffness},
            {"bending_ratio", bending_ratio},
            {"damping", damping},
            {"yield_strain", yield_strain},
            {"pole_radius", pole_radius},
            {"pole_nodes", pole_nodes},
            {"pole_gap", pole_gap},
            {"contact_stiffness", contact_stiffness},
            {"contact_damping", contact_damping},
            {"inner_dt", inner_dt},
            {"output_dt", output_dt},
            {"horizon", horizon},
            {"penetration_tolerance", penetration_tolerance}};
  }
};

// Everything needed to integrate one design.
struct PoleImpactSetup {
  std::shared_ptr<const MeshGraph> graph;
  std::vector<double> positions;
  std::vector<double> velocities;
  std::vector<Spring> springs;
  PenaltyCircle pole;
  NodePair survival_pair;
};

inline PoleImpactSetup build_pole_impact(const DesignSample& design, const OracleConfig& cfg) {
  cfg.validate();
  const auto& d = design.values;
  require(d.size() == kDesignSlots, ErrorKind::kShapeMismatch, "pole impact needs 8 design values");
  const std::size_t nx = cfg.columns, ny = cfg.rows, nl = cfg.lattice_nodes();
  const std::size_t n = nl + cfg.pole_nodes;
  const double half_width = 0.5 * static_cast<double>(nx - 1) * cfg.spacing;
  auto id = [nx](std::size_t r, std::size_t c) { return static_cast<std::uint32_t>(r * nx + c); };

  PoleImpactSetup s;
  s.positions.assign(n * 2, 0.0);
  s.velocities.assign(n * 2, 0.0);
  std::vector<double> thickness(n, cfg.base_thickness);
  std::vector<NodeRole> roles(n, NodeRole::kFree);

  for (std::size_t r = 0; r < ny; ++r) {
    for (std::size_t c = 0; c < nx; ++c) {
      double x = static_cast<double>(c) * cfg.spacing - half_width;
      double y = static_cast<double>(r) * cfg.spacing;
      const double xi = x / half_width;
      if (r <= 1) {
        x += d[kWidthFront] * xi;
        y += -d[kDepthSill] + d[kCurvatureSill] * xi * xi;
        thickness[id(r, c)] = d[kThicknessSill];
      } else if (std::abs(xi) <= 1.0 / 3.0) {
        thickness[id(r, c)] = d[kThicknessPatch];
      }
      if (r == 0) y -= d[kDepthFront] * (1.0 - xi * xi);
      s.positions[2 * id(r, c)] = x;
      s.positions[2 * id(r, c) + 1] = y;
      s.velocities[2 * id(r, c) + 1] = -d[kImpactSpeed];
    }
  }

  s.pole = {d[kPolePosition], -cfg.pole_gap - cfg.pole_radius, cfg.pole_radius, cfg.contact_stiffness,
            cfg.contact_damping};
  for (std::size_t k = 0; k < cfg.pole_nodes; ++k) {
    const double theta = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(cfg.pole_nodes);
    const std::size_t node = nl + k;
    s.positions[2 * node] = s.pole.cx + cfg.pole_radius * std::cos(theta);
    s.positions[2 * node + 1] = s.pole.cy + cfg.pole_radius * std::sin(theta);
    roles[node] = NodeRole::kRigid;
    thickness[node] = 0.0;
  }

  auto dist = [&](std::uint32_t a, std::uint32_t b) {
    return std::hypot(s.positions[2 * b] - s.positions[2 * a], s.positions[2 * b + 1] - s.positions[2 * a + 1]);
  };
  std::vector<std::pair<std::uint32_t, std::uint32_t>> mesh_pairs;
  auto spring = [&](std::uint32_t a, std::uint32_t b, double scale, bool in_graph) {
    const double rest = dist(a, b);
    const double t = 0.5 * (thickness[a] + thickness[b]);
    s.springs.push_back({a, b, rest, scale * cfg.stiffness * t * cfg.spacing / rest, cfg.damping});
    if (in_graph) mesh_pairs.emplace_back(a, b);
  };
  for (std::size_t r = 0; r < ny; ++r) {
    for (std::size_t c = 0; c < nx; ++c) {
      if (c + 1 < nx) spring(id(r, c), id(r, c + 1), 1.0, true);
      if (r + 1 < ny) spring(id(r, c), id(r + 1, c), 1.0, true);
      if (r + 1 < ny && c + 1 < nx) {
        spring(id(r, c), id(r + 1, c + 1), 1.0, true);
        spring(id(r, c + 1), id(r + 1, c), 1.0, true);
      }
      if (cfg.bending_ratio > 0.0) {
        if (c + 2 < nx) spring(id(r, c), id(r, c + 2), cfg.bending_ratio, false);
        if (r + 2 < ny) spring(id(r, c), id(r + 2, c), cfg.bending_ratio, false);
      }
    }
  }
  for (std::size_t k = 0; k < cfg.pole_nodes; ++k)
    mesh_pairs.emplace_back(static_cast<std::uint32_t>(nl + k),
                            static_cast<std::uint32_t>(nl + (k + 1) % cfg.pole_nodes));

  for (std::size_t a = 0; a < nl; ++a) {
    const double gap = std::hypot(s.positions[2 * a] - s.pole.cx, s.positions[2 * a + 1] - s.pole.cy) -
                       cfg.pole_radius;
    require(gap > 0.0, ErrorKind::kInvalidArgument, "design places the lattice inside the pole");
  }

  s.graph = std::make_shared<const MeshGraph>(2, MeshGraph::symmetric_edges(mesh_pairs), roles,
                                              MeshGraph::make_static_features(roles, thickness), kStaticBaseDim,
                                              s.positions);
  s.survival_pair = {id(1, nx / 2), id(ny - 2, nx / 2)};
  return s;
}

struct SimulationDiagnostics {
  double stable_dt = 0.0;
  double max_penetration = 0.0;             // mm, over all output frames
  std::vector<double> energy;               // kinetic + potential per output frame
};

inline Trajectory simulate(const DesignSample& design, const OracleConfig& cfg, const DesignSpace& space,
                           SimulationDiagnostics* diag = nullptr) {
  design.check_within(space);
  auto setup = build_pole_impact(design, cfg);
  const std::size_t n = setup.graph->node_count();
  std::vector<bool> movable(n);
  for (std::size_t a = 0; a < n; ++a) movable[a] = setup.graph->is_free(a);
  MassSpringSystem sys(2, setup.positions, setup.velocities, std::vector<double>(n, cfg.node_mass), movable);
  for (const auto& sp : setup.springs) sys.add_spring(sp);
  sys.set_circle(setup.pole);
  sys.set_yield_strain(cfg.yield_strain);
  sys.check_stability(cfg.inner_dt);

  Trajectory tr;
  tr.graph = setup.graph;
  tr.dt = cfg.output_dt;
  tr.design = design;
  tr.survival_pair = setup.survival_pair;
  tr.states.emplace_back(n, 2, setup.positions, setup.velocities, 0);
  if (diag != nullptr) {
    diag->stable_dt = sys.stable_dt();
    diag->energy.push_back(sys.kinetic_energy() + sys.potential_energy());
  }
  const std::size_t sub = cfg.substeps();
  for (std::size_t t = 1; t <= cfg.horizon; ++t) {
    for (std::size_t k = 0; k < sub; ++k) sys.step(cfg.inner_dt);
    const auto& x = sys.positions();
    // Stored velocities are the output-rate finite differences, so that
    // x_{t+1} = x_t + dt v_{t+1} holds exactly for the stored frames.
    auto v = estimate_velocity(x, tr.states.back().positions, cfg.output_dt);
    tr.states.emplace_back(n, 2, x, std::move(v), t);
    const double pen = sys.max_penetration();
    require(pen <= cfg.penetration_tolerance * cfg.pole_radius, ErrorKind::kStability,
            "pole penetration " + std::to_string(pen) + " mm exceeds tolerance at frame " + std::to_string(t));
    if (diag != nullptr) {
      diag->max_penetration = std::max(diag->max_penetration, pen);
      diag->energy.push_back(sys.kinetic_energy() + sys.potential_energy());
    }
  }
  tr.validate();
  return tr;
}

struct GeneratedDataset {
  TrajectorySet set;
  nlohmann::json manifest;
};

// `slices` > 1 draws a sliced Latin hypercube (see lhs_sample) so that the
// design can later be split into distribution-matched subsets. Samples are
// simulated on up to `threads` threads; the output does not depend on it.
inline GeneratedDataset generate_dataset(std::size_t n, const DesignSpace& space, const OracleConfig& cfg,
                                         std::uint64_t seed, std::size_t slices = 1, std::size_t threads = 1) {
  GeneratedDataset out;
  out.set.space = space;
  const auto designs = lhs_sample(n, space, seed, slices);
  std::vector<Trajectory> trajectories(designs.size());
  util::parallel_for(designs.size(), threads, [&](std::size_t k) {
    try {
      trajectories[k] = simulate(designs[k], cfg, space);
    } catch (const Error& e) {
      throw Error(e.kind(), "sample " + std::to_string(designs[k].id) + ": " + e.message());
    }
  });
  nlohmann::json samples = nlohmann::json::array();
  for (auto& tr : trajectories) {
    samples.push_back({{"id", tr.design.id},
                       {"design", tr.design.values},
                       {"block_sha256", util::sha256_hex(encode_trajectory_block(tr))}});
    out.set.trajectories.push_back(std::move(tr));
  }
  out.manifest = {
      {"count", n}, {"seed", seed}, {"slices", slices}, {"oracle", cfg.to_json()}, {"samples", samples}};
  return out;
}

}  // namespace crashsurr::oracle
