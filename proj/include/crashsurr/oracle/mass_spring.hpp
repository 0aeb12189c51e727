#pragma once

// Explicit mass-spring dynamics used as the ground-truth generator.
//
// Springs carry an axial dashpot and optional perfect plasticity (the rest
// length follows the current length once the strain leaves [-yield, yield]).
// A fixed rigid circle pushes nodes out with a penalty force. Integration is
// semi-implicit Euler: v += dt F(x, v) / m, then x += dt v.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "crashsurr/error.hpp"

namespace crashsurr::oracle {

struct Spring {
  std::uint32_t i = 0;
  std::uint32_t j = 0;
  double rest = 0.0;
  double stiffness = 0.0;
  double damping = 0.0;
};

struct PenaltyCircle {
  double cx = 0.0;
  double cy = 0.0;
  double radius = 1.0;
  double stiffness = 0.0;
  double damping = 0.0;  // acts on approaching normal velocity only
};

class MassSpringSystem {
 public:
  MassSpringSystem(std::size_t dim, std::vector<double> positions, std::vector<double> velocities,
                   std::vector<double> masses, std::vector<bool> movable)
      : dim_(dim), x_(std::move(positions)), v_(std::move(velocities)), m_(std::move(masses)),
        movable_(std::move(movable)) {
    require(dim_ == 2 || dim_ == 3, ErrorKind::kInvalidArgument, "mass-spring: dim must be 2 or 3");
    const std::size_t n = m_.size();
    require(x_.size() == n * dim_ && v_.size() == n * dim_ && movable_.size() == n, ErrorKind::kShapeMismatch,
            "mass-spring: buffer sizes");
    for (double m : m_) require(m > 0.0, ErrorKind::kInvalidArgument, "mass-spring: masses must be positive");
    force_.assign(x_.size(), 0.0);
  }

  void add_spring(Spring s) {
    require(s.i < m_.size() && s.j < m_.size() && s.i != s.j, ErrorKind::kInvalidArgument, "mass-spring: bad spring");
    require(s.rest > 0.0 && s.stiffness >= 0.0 && s.damping >= 0.0, ErrorKind::kInvalidArgument,
            "mass-spring: bad spring constants");
    springs_.push_back(s);
  }

  void set_circle(const PenaltyCircle& c) {
    require(dim_ == 2, ErrorKind::kInvalidArgument, "penalty circle is 2D only");
    circle_ = c;
  }

  void set_yield_strain(double eps) { yield_ = eps; }

  std::size_t node_count() const { return m_.size(); }
  const std::vector<double>& positions() const { return x_; }
  const std::vector<double>& velocities() const { return v_; }
  const std::vector<Spring>& springs() const { return springs_; }

  // Gershgorin bound on the largest squared angular frequency of the
  // linearised system: max_i (2 sum_j k_ij + k_penalty) / m_i.
  double omega_squared_bound() const {
    std::vector<double> row(m_.size(), 0.0);
    for (const auto& s : springs_) {
      row[s.i] += 2.0 * s.stiffness;
      row[s.j] += 2.0 * s.stiffness;
    }
    double w2 = 0.0;
    for (std::size_t n = 0; n < m_.size(); ++n) {
      if (!movable_[n]) continue;
      const double penalty = circle_ ? circle_->stiffness : 0.0;
      w2 = std::max(w2, (row[n] + penalty) / m_[n]);
    }
    return w2;
  }

  // Same construction for the damping matrix: max_i (2 sum_j c_ij + c_penalty) / m_i.
  double damping_rate_bound() const {
    std::vector<double> row(m_.size(), 0.0);
    for (const auto& s : springs_) {
      row[s.i] += 2.0 * s.damping;
      row[s.j] += 2.0 * s.damping;
    }
    double r = 0.0;
    for (std::size_t n = 0; n < m_.size(); ++n) {
      if (!movable_[n]) continue;
      const double penalty = circle_ ? circle_->damping : 0.0;
      r = std::max(r, (row[n] + penalty) / m_[n]);
    }
    return r;
  }

  // Largest stable step for a damped oscillator of frequency omega and
  // damping ratio zeta: (2 / omega) (sqrt(1 + zeta^2) - zeta).
  double stable_dt() const {
    const double w2 = omega_squared_bound();
    if (w2 <= 0.0) return std::numeric_limits<double>::infinity();
    const double w = std::sqrt(w2);
    const double zeta = damping_rate_bound() / (2.0 * w);
    return 2.0 / w * (std::sqrt(1.0 + zeta * zeta) - zeta);
  }

  void check_stability(double dt) const {
    const double limit = stable_dt();
    require(dt <= limit, ErrorKind::kStability,
            "inner time step " + std::to_string(dt) + " ms exceeds the stability bound " + std::to_string(limit) +
                " ms");
  }

  void step(double dt) {
    compute_forces();
    const std::size_t n = m_.size();
    for (std::size_t a = 0; a < n; ++a) {
      if (!movable_[a]) continue;
      const double inv_m = 1.0 / m_[a];
      for (std::size_t d = 0; d < dim_; ++d) {
        const std::size_t k = a * dim_ + d;
        v_[k] += dt * force_[k] * inv_m;
        x_[k] += dt * v_[k];
      }
    }
    if (yield_ > 0.0) apply_plasticity();
  }

  double kinetic_energy() const {
    double e = 0.0;
    for (std::size_t a = 0; a < m_.size(); ++a) {
      if (!movable_[a]) continue;
      double s = 0.0;
      for (std::size_t d = 0; d < dim_; ++d) s += v_[a * dim_ + d] * v_[a * dim_ + d];
      e += 0.5 * m_[a] * s;
    }
    return e;
  }

  // Elastic spring energy plus the penalty-layer energy.
  double potential_energy() const {
    double e = 0.0;
    for (const auto& s : springs_) {
      const double stretch = length(s.i, s.j) - s.rest;
      e += 0.5 * s.stiffness * stretch * stretch;
    }
    if (circle_) {
      for (std::size_t a = 0; a < m_.size(); ++a) {
        if (!movable_[a]) continue;
        const double depth = circle_->radius - circle_distance(a);
        if (depth > 0.0) e += 0.5 * circle_->stiffness * depth * depth;
      }
    }
    return e;
  }

  // Deepest penetration of any movable node into the circle (0 if none).
  double max_penetration() const {
    if (!circle_) return 0.0;
    double worst = 0.0;
    for (std::size_t a = 0; a < m_.size(); ++a)
      if (movable_[a]) worst = std::max(worst, circle_->radius - circle_distance(a));
    return worst;
  }

 private:
  double length(std::uint32_t i, std::uint32_t j) const {
    double s = 0.0;
    for (std::size_t d = 0; d < dim_; ++d) {
      const double diff = x_[j * dim_ + d] - x_[i * dim_ + d];
      s += diff * diff;
    }
    return std::sqrt(s);
  }

  double circle_distance(std::size_t a) const {
    const double dx = x_[a * dim_] - circle_->cx, dy = x_[a * dim_ + 1] - circle_->cy;
    return std::sqrt(dx * dx + dy * dy);
  }

  void compute_forces() {
    std::fill(force_.begin(), force_.end(), 0.0);
    double dir[3];
    for (const auto& s : springs_) {
      const double len = length(s.i, s.j);
      if (len <= 0.0) continue;
      double rel_v = 0.0;
      for (std::size_t d = 0; d < dim_; ++d) {
        dir[d] = (x_[s.j * dim_ + d] - x_[s.i * dim_ + d]) / len;
        rel_v += (v_[s.j * dim_ + d] - v_[s.i * dim_ + d]) * dir[d];
      }
      const double f = s.stiffness * (len - s.rest) + s.damping * rel_v;
      for (std::size_t d = 0; d < dim_; ++d) {
        force_[s.i * dim_ + d] += f * dir[d];
        force_[s.j * dim_ + d] -= f * dir[d];
      }
    }
    if (!circle_) return;
    const auto& c = *circle_;
    for (std::size_t a = 0; a < m_.size(); ++a) {
      if (!movable_[a]) continue;
      const double dist = circle_distance(a);
      const double depth = c.radius - dist;
      if (depth <= 0.0 || dist <= 0.0) continue;
      const double nx = (x_[a * dim_] - c.cx) / dist, ny = (x_[a * dim_ + 1] - c.cy) / dist;
      const double vn = v_[a * dim_] * nx + v_[a * dim_ + 1] * ny;
      const double f = c.stiffness * depth + (vn < 0.0 ? -c.damping * vn : 0.0);
      force_[a * dim_] += f * nx;
      force_[a * dim_ + 1] += f * ny;
    }
  }

  void apply_plasticity() {
    for (auto& s : springs_) {
      const double len = length(s.i, s.j);
      const double hi = s.rest * (1.0 + yield_), lo = s.rest * (1.0 - yield_);
      if (len > hi) s.rest = len / (1.0 + yield_);
      else if (len < lo) s.rest = len / (1.0 - yield_);
    }
  }

  std::size_t dim_;
  std::vector<double> x_, v_, m_;
  std::vector<bool> movable_;
  std::vector<Spring> springs_;
  std::optional<PenaltyCircle> circle_;
  double yield_ = 0.0;
  std::vector<double> force_;
};

}  // namespace crashsurr::oracle
