#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "crashsurr/ad/tensor.hpp"
#include "crashsurr/error.hpp"

namespace crashsurr::ad {

// Cosine annealing from `initial` down to `floor` over `total_steps`; the
// rate stays at `floor` afterwards.
struct CosineSchedule {
  double initial = 1e-4;
  double floor = 0.0;
  std::size_t total_steps = 1;

  double at(std::size_t step) const {
    if (total_steps == 0 || step >= total_steps) return floor;
    const double progress = static_cast<double>(step) / static_cast<double>(total_steps);
    return floor + 0.5 * (initial - floor) * (1.0 + std::cos(std::numbers::pi * progress));
  }
};

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

struct OptimState {
  AdamWConfig hyper;
  CosineSchedule schedule;
  std::size_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  double base_lr() const { return schedule.initial; }
  double current_lr() const { return schedule.at(step); }
};

inline OptimState make_optim_state(const std::vector<Tensor>& params, AdamWConfig hyper,
                                   CosineSchedule schedule) {
  OptimState st;
  st.hyper = hyper;
  st.schedule = schedule;
  for (const auto& p : params) {
    st.first_moment.emplace_back(p.size(), 0.0);
    st.second_moment.emplace_back(p.size(), 0.0);
  }
  return st;
}

// Decoupled weight decay: p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + wd * p).
// Returns the learning rate used for this step.
inline double adamw_step(std::vector<Tensor>& params, OptimState& st) {
  require(params.size() == st.first_moment.size(), ErrorKind::kShapeMismatch,
          "adamw_step: parameter count does not match optimizer state");
  for (const auto& p : params)
    require(p.has_grad(), ErrorKind::kInvalidArgument, "adamw_step: parameter without gradient");

  const double lr = st.current_lr();
  const auto& h = st.hyper;
  const double t = static_cast<double>(st.step + 1);
  const double bc1 = 1.0 - std::pow(h.beta1, t);
  const double bc2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto values = params[k].mutable_values();
    const auto grad = params[k].grad();
    auto& m = st.first_moment[k];
    auto& v = st.second_moment[k];
    require(m.size() == values.size(), ErrorKind::kShapeMismatch, "adamw_step: moment shape");
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grad[i];
      m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g;
      v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      values[i] -= lr * (mhat / (std::sqrt(vhat) + h.eps) + h.weight_decay * values[i]);
    }
  }
  ++st.step;
  return lr;
}

// Rescales all gradients so their global L2 norm is at most `max_norm`.
// Returns the norm before clipping.
inline double clip_grad_norm(std::vector<Tensor>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params)
    for (double g : p.grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double k = max_norm / norm;
    for (auto& p : params) {
      auto& g = p.node()->grad;
      for (auto& gi : g) gi *= k;
    }
  }
  return norm;
}

inline void zero_grads(std::vector<Tensor>& params) {
  for (auto& p : params) p.zero_grad();
}

}  // namespace crashsurr::ad
