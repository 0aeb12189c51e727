#pragma once

// Closed-loop autoregressive rollout with a forward Euler update:
//   v_{t+1} = v_t + dt a_t,  x_{t+1} = x_t + dt v_{t+1}
// applied to FREE nodes only. Contacts (if the model has a contact block)
// are rebuilt from the predicted positions before every step.

#include <chrono>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "crashsurr/ad/tensor.hpp"
#include "crashsurr/contact/contact.hpp"
#include "crashsurr/error.hpp"
#include "crashsurr/mesh/features.hpp"
#include "crashsurr/mesh/trajectory.hpp"
#include "crashsurr/nn/model.hpp"

namespace crashsurr::rollout {

using ad::Tensor;

inline NodeState euler_step(const NodeState& s, std::span<const double> a, double dt, const MeshGraph& g,
                            std::size_t step = 0) {
  require(a.size() == s.positions.size() && s.node_count == g.node_count() && s.dim == g.dim(),
          ErrorKind::kShapeMismatch, "euler_step: shape mismatch");
  for (double x : a)
    require(std::isfinite(x), ErrorKind::kNonFinite, "non-finite acceleration at step " + std::to_string(step));
  NodeState out = s;
  out.time_index = s.time_index + 1;
  const std::size_t dim = s.dim;
  for (std::size_t n = 0; n < s.node_count; ++n) {
    if (!g.is_free(n)) continue;
    for (std::size_t d = 0; d < dim; ++d) {
      const std::size_t k = n * dim + d;
      out.velocities[k] = s.velocities[k] + dt * a[k];
      out.positions[k] = s.positions[k] + dt * out.velocities[k];
    }
  }
  return out;
}

// 1 for FREE rows, 0 for RIGID rows (node_count x 1).
inline Tensor free_mask(const MeshGraph& g) {
  const std::size_t count = g.node_count();
  std::vector<double> m(count);
  for (std::size_t n = 0; n < count; ++n) m[n] = g.is_free(n) ? 1.0 : 0.0;
  return Tensor::from(count, 1, std::move(m));
}

// Differentiable counterpart of euler_step; produces the same bits.
inline std::pair<Tensor, Tensor> euler_step(const Tensor& x, const Tensor& v, const Tensor& a, double dt,
                                            const Tensor& mask, std::size_t step = 0) {
  for (double e : a.values())
    require(std::isfinite(e), ErrorKind::kNonFinite, "non-finite acceleration at step " + std::to_string(step));
  const auto v_next = ad::add(v, ad::mul_col(ad::scale(a, dt), mask));
  const auto x_next = ad::add(x, ad::mul_col(ad::scale(v_next, dt), mask));
  return {x_next, v_next};
}

// Physical accelerations from normalised predictions: a = a_bar * std + mean.
inline Tensor denormalise(const Tensor& a_bar, const NormStats& stats) {
  return ad::add_row(ad::mul_row(a_bar, Tensor::from(1, stats.dim, stats.accel_std)),
                     Tensor::from(1, stats.dim, stats.accel_mean));
}

struct RolloutOptions {
  // Detach the state every `truncation` steps (0 = backpropagate through all).
  std::size_t truncation = 0;
};

struct RolloutTensors {
  std::vector<Tensor> positions;  // predicted frames start+1 .. start+steps
  std::vector<Tensor> velocities;
  std::vector<std::size_t> contact_counts;
};

// Core loop from a seed state at frame `start`. Differentiable when grad
// mode is on and the model parameters require gradients.
inline RolloutTensors rollout_tensors(const nn::Surrogate& model, const MeshGraph& g, const NormStats& stats,
                                      const Tensor& x_start, const Tensor& v_start, std::size_t start,
                                      std::size_t steps, double dt, const RolloutOptions& opts = {}) {
  require(dt > 0.0, ErrorKind::kInvalidArgument, "rollout: dt must be positive");
  const nn::CanonicalGraph cg(g);
  const auto mask = free_mask(g);
  const auto cparams = model.has_contact() ? model.contact_params(g) : contact::ContactParams{};
  RolloutTensors out;
  Tensor x = x_start, v = v_start;
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t t = start + s;
    contact::ContactSet contacts;
    const contact::ContactSet* cptr = nullptr;
    if (model.has_contact()) {
      contacts = contact::build_contacts(x.values(), g, cparams, t);
      cptr = &contacts;
      out.contact_counts.push_back(contacts.size());
    } else {
      out.contact_counts.push_back(0);
    }
    const auto a = denormalise(model.forward(g, cg, x, v, stats, cptr), stats);
    std::tie(x, v) = euler_step(x, v, a, dt, mask, t);
    for (double e : x.values())
      require(std::isfinite(e), ErrorKind::kNonFinite, "rollout produced a non-finite state at step " +
                                                           std::to_string(t + 1));
    out.positions.push_back(x);
    out.velocities.push_back(v);
    if (opts.truncation > 0 && (s + 1) % opts.truncation == 0) {
      x = x.detach();
      v = v.detach();
    }
  }
  return out;
}

struct RolloutResult {
  Trajectory predicted;
  std::vector<std::size_t> per_step_contact_counts;
  double wall_time = 0.0;  // seconds
};

namespace detail {

inline RolloutResult assemble(const Trajectory& like, const NodeState& seed, const RolloutTensors& rt,
                              double wall) {
  RolloutResult r;
  r.predicted.graph = like.graph;
  r.predicted.dt = like.dt;
  r.predicted.design = like.design;
  r.predicted.survival_pair = like.survival_pair;
  r.predicted.states.push_back(seed);
  const std::size_t n = seed.node_count, dim = seed.dim;
  for (std::size_t s = 0; s < rt.positions.size(); ++s) {
    const auto xs = rt.positions[s].values(), vs = rt.velocities[s].values();
    r.predicted.states.emplace_back(n, dim, std::vector<double>(xs.begin(), xs.end()),
                                    std::vector<double>(vs.begin(), vs.end()), seed.time_index + s + 1);
  }
  r.per_step_contact_counts = rt.contact_counts;
  r.wall_time = wall;
  return r;
}

}  // namespace detail

// Inference rollout seeded from (x_0, v_0) of `reference`; produces frames
// 1..steps (defaults to the reference horizon). Earlier frames of the
// reference are never read.
inline RolloutResult rollout(const nn::Surrogate& model, const Trajectory& reference, const NormStats& stats,
                             std::size_t steps = 0) {
  require(!reference.states.empty(), ErrorKind::kInvalidArgument, "rollout: empty reference trajectory");
  if (steps == 0) steps = reference.horizon();
  ad::NoGradGuard guard;
  const auto t0 = std::chrono::steady_clock::now();
  const auto& g = *reference.graph;
  const auto& s0 = reference.states.front();
  const auto rt = rollout_tensors(model, g, stats, Tensor::from(s0.node_count, s0.dim, s0.positions),
                                  Tensor::from(s0.node_count, s0.dim, s0.velocities), 0, steps, reference.dt);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return detail::assemble(reference, s0, rt, wall);
}

// Rollout seeded from two consecutive frames: v_1 = (x_1 - x_0) / dt, then
// frames 2..horizon are predicted. The returned trajectory holds frame 0,
// frame 1 and the predictions.
inline RolloutResult rollout_from_two(const nn::Surrogate& model, const Trajectory& reference,
                                      const NormStats& stats) {
  require(reference.states.size() >= 2, ErrorKind::kInvalidArgument, "rollout: need two seed frames");
  ad::NoGradGuard guard;
  const auto t0 = std::chrono::steady_clock::now();
  const auto& g = *reference.graph;
  const auto& s0 = reference.states[0];
  NodeState s1 = reference.states[1];
  s1.velocities = estimate_velocity(s1.positions, s0.positions, reference.dt);
  const auto rt = rollout_tensors(model, g, stats, Tensor::from(s1.node_count, s1.dim, s1.positions),
                                  Tensor::from(s1.node_count, s1.dim, s1.velocities), 1, reference.horizon() - 1,
                                  reference.dt);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  auto r = detail::assemble(reference, s1, rt, wall);
  r.predicted.states.insert(r.predicted.states.begin(), s0);
  r.per_step_contact_counts.insert(r.per_step_contact_counts.begin(), 0);
  return r;
}

// Zero-acceleration baseline: pure inertial motion from (x_0, v_0).
inline Trajectory drift_rollout(const Trajectory& reference) {
  require(!reference.states.empty(), ErrorKind::kInvalidArgument, "drift: empty reference trajectory");
  Trajectory out;
  out.graph = reference.graph;
  out.dt = reference.dt;
  out.design = reference.design;
  out.survival_pair = reference.survival_pair;
  out.states.push_back(reference.states.front());
  const std::vector<double> zero(reference.states.front().positions.size(), 0.0);
  for (std::size_t t = 0; t < reference.horizon(); ++t)
    out.states.push_back(euler_step(out.states.back(), zero, reference.dt, *reference.graph, t));
  return out;
}

}  // namespace crashsurr::rollout
