#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "crashsurr/error.hpp"
#include "crashsurr/mesh/graph.hpp"

namespace crashsurr {

// Positions (mm) and velocities (mm/ms) of every node at one output frame,
// stored row-major as node_count x dim.
struct NodeState {
  std::size_t node_count = 0;
  std::size_t dim = 2;
  std::vector<double> positions;
  std::vector<double> velocities;
  std::size_t time_index = 0;

  NodeState() = default;
  NodeState(std::size_t n, std::size_t d, std::vector<double> x, std::vector<double> v, std::size_t t)
      : node_count(n), dim(d), positions(std::move(x)), velocities(std::move(v)), time_index(t) {
    validate();
  }

  std::span<const double> position(std::size_t n) const { return {positions.data() + n * dim, dim}; }
  std::span<const double> velocity(std::size_t n) const { return {velocities.data() + n * dim, dim}; }

  void validate() const {
    require(positions.size() == node_count * dim && velocities.size() == node_count * dim,
            ErrorKind::kShapeMismatch, "node state buffers do not match node_count x dim");
    for (double v : positions)
      require(std::isfinite(v), ErrorKind::kNonFinite, "non-finite position at t=" + std::to_string(time_index));
    for (double v : velocities)
      require(std::isfinite(v), ErrorKind::kNonFinite, "non-finite velocity at t=" + std::to_string(time_index));
  }
};

struct DesignVariable {
  std::string name;
  double low = 0.0;
  double high = 1.0;
  double nominal = 0.0;
};

using DesignSpace = std::vector<DesignVariable>;

struct DesignSample {
  std::uint64_t id = 0;
  std::vector<double> values;

  void check_within(const DesignSpace& space) const {
    require(values.size() == space.size(), ErrorKind::kShapeMismatch, "design vector length");
    for (std::size_t k = 0; k < values.size(); ++k) {
      require(values[k] >= space[k].low && values[k] <= space[k].high, ErrorKind::kInvalidArgument,
              "design variable " + space[k].name + " = " + std::to_string(values[k]) + " outside [" +
                  std::to_string(space[k].low) + ", " + std::to_string(space[k].high) + "]");
    }
  }
};

using NodePair = std::pair<std::uint32_t, std::uint32_t>;

// T+1 frames of one simulation sharing a graph and a constant output step.
struct Trajectory {
  std::shared_ptr<const MeshGraph> graph;
  std::vector<NodeState> states;
  double dt = 5.0;
  DesignSample design;
  NodePair survival_pair{0, 0};

  std::size_t horizon() const { return states.empty() ? 0 : states.size() - 1; }

  void validate() const {
    require(graph != nullptr, ErrorKind::kInvalidArgument, "trajectory without graph");
    require(!states.empty(), ErrorKind::kInvalidArgument, "trajectory without states");
    require(dt > 0.0, ErrorKind::kInvalidArgument, "trajectory dt must be positive");
    require(survival_pair.first < graph->node_count() && survival_pair.second < graph->node_count(),
            ErrorKind::kInvalidArgument, "survival pair index out of range");
    const auto& first = states.front();
    for (std::size_t k = 0; k < states.size(); ++k) {
      const auto& s = states[k];
      require(s.time_index == k, ErrorKind::kInvalidArgument,
              "state " + std::to_string(k) + " has time_index " + std::to_string(s.time_index));
      require(s.node_count == graph->node_count() && s.dim == graph->dim(), ErrorKind::kShapeMismatch,
              "state shape does not match graph");
      s.validate();
      for (std::size_t n = 0; n < s.node_count; ++n) {
        if (graph->is_free(n)) continue;
        for (std::size_t d = 0; d < s.dim; ++d)
          require(s.positions[n * s.dim + d] == first.positions[n * s.dim + d], ErrorKind::kInvalidArgument,
                  "RIGID node " + std::to_string(n) + " moves at t=" + std::to_string(k));
      }
    }
  }
};

}  // namespace crashsurr
