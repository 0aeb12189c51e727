#pragma once

// Rollout training: each optimisation step runs one full closed-loop
// rollout of one training trajectory with gradients, then AdamW.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crashsurr/ad/optim.hpp"
#include "crashsurr/ad/tensor.hpp"
#include "crashsurr/error.hpp"
#include "crashsurr/mesh/features.hpp"
#include "crashsurr/mesh/trajectory.hpp"
#include "crashsurr/nn/model.hpp"
#include "crashsurr/rollout/rollout.hpp"
#include "crashsurr/util/parallel.hpp"

namespace crashsurr::train {

using ad::Tensor;

// Mean over FREE nodes and steps t = 1..T of |x_pred - x_ref|^2 (mm^2).
inline double position_loss(const Trajectory& pred, const Trajectory& ref) {
  require(pred.states.size() == ref.states.size() && ref.horizon() >= 1, ErrorKind::kShapeMismatch,
          "position_loss: horizons differ");
  const auto& g = *ref.graph;
  const std::size_t free = g.free_count(), dim = g.dim();
  require(free > 0, ErrorKind::kInvalidArgument, "position_loss: no FREE nodes");
  double sum = 0.0;
  for (std::size_t t = 1; t <= ref.horizon(); ++t) {
    const auto& p = pred.states[t].positions;
    const auto& r = ref.states[t].positions;
    require(p.size() == r.size(), ErrorKind::kShapeMismatch, "position_loss: state shapes differ");
    for (std::size_t n = 0; n < g.node_count(); ++n) {
      if (!g.is_free(n)) continue;
      for (std::size_t d = 0; d < dim; ++d) {
        const double e = p[n * dim + d] - r[n * dim + d];
        sum += e * e;
      }
    }
  }
  return sum / static_cast<double>(free * ref.horizon());
}

// Differentiable loss of a rollout against its reference, in units of
// length_scale^2 (multiply by length_scale^2 for mm^2).
inline Tensor rollout_loss(const rollout::RolloutTensors& rt, const Trajectory& ref, const Tensor& mask,
                           double length_scale) {
  const auto& g = *ref.graph;
  require(rt.positions.size() == ref.horizon(), ErrorKind::kShapeMismatch, "rollout_loss: horizon mismatch");
  Tensor total;
  for (std::size_t s = 0; s < rt.positions.size(); ++s) {
    const auto& target = ref.states[s + 1].positions;
    const auto diff = ad::mul_col(ad::sub(rt.positions[s], Tensor::from(g.node_count(), g.dim(), target)), mask);
    const auto sq = ad::sum(ad::mul(diff, diff));
    total = s == 0 ? sq : ad::add(total, sq);
  }
  const double denom = static_cast<double>(g.free_count() * ref.horizon()) * length_scale * length_scale;
  return ad::scale(total, 1.0 / denom);
}

struct TrainConfig {
  std::size_t epochs = 100;
  double lr = 1e-4;
  double lr_floor = 0.0;
  double weight_decay = 1e-4;
  std::size_t patience = 18;
  double clip_norm = 1.0;
  std::uint64_t seed = 0;
  std::size_t truncation = 0;  // 0 = backpropagate through the full rollout
  std::size_t threads = 1;     // validation rollouts only; results do not depend on it

  void validate() const {
    require(epochs >= 1, ErrorKind::kInvalidArgument, "train: epochs must be >= 1");
    require(lr > 0.0 && lr_floor >= 0.0 && lr_floor <= lr, ErrorKind::kInvalidArgument,
            "train: need lr > 0 and 0 <= lr_floor <= lr");
    require(patience >= 1, ErrorKind::kInvalidArgument, "train: patience must be >= 1");
    require(clip_norm > 0.0 && weight_decay >= 0.0, ErrorKind::kInvalidArgument, "train: bad clip or decay");
    require(threads >= 1, ErrorKind::kInvalidArgument, "train: threads must be >= 1");
  }

  nlohmann::json to_json() const {
    return {{"epochs", epochs},   {"lr", lr},         {"lr_floor", lr_floor},   {"weight_decay", weight_decay},
            {"patience", patience}, {"clip_norm", clip_norm}, {"seed", seed}, {"truncation", truncation}};
  }
};

struct EpochRecord {
  std::size_t epoch = 0;       // 0 = before any update
  double train_loss = 0.0;     // mm^2, mean over the epoch's steps (NaN at epoch 0)
  double val_loss = 0.0;       // mm^2
  double lr = 0.0;             // learning rate of the epoch's last step
  double grad_norm = 0.0;      // mean pre-clip gradient norm
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val = 0.0;
  bool stopped_early = false;
  bool diverged = false;
  std::string message;

  std::string history_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "epoch,train_loss_mm2,val_loss_mm2,lr,grad_norm,seconds\n";
    for (const auto& r : history)
      os << r.epoch << ',' << r.train_loss << ',' << r.val_loss << ',' << r.lr << ',' << r.grad_norm << ','
         << r.seconds << '\n';
    return os.str();
  }
};

// Mean position loss (mm^2) of inference rollouts over a set.
inline double validation_loss(const nn::Surrogate& model, const std::vector<Trajectory>& set, const NormStats& stats,
                              std::size_t threads = 1) {
  require(!set.empty(), ErrorKind::kInvalidArgument, "validation set is empty");
  std::vector<double> losses(set.size());
  util::parallel_for(set.size(), threads, [&](std::size_t k) {
    losses[k] = position_loss(rollout::rollout(model, set[k], stats).predicted, set[k]);
  });
  double sum = 0.0;
  for (double l : losses) sum += l;
  return sum / static_cast<double>(set.size());
}

using EpochCallback = std::function<void(const EpochRecord&)>;

namespace detail {

inline std::vector<std::vector<double>> snapshot(const nn::ParameterSet& ps) {
  std::vector<std::vector<double>> out;
  for (const auto& p : ps.items()) out.emplace_back(p.tensor.values().begin(), p.tensor.values().end());
  return out;
}

inline void restore(nn::ParameterSet& ps, const std::vector<std::vector<double>>& snap) {
  const auto& items = ps.items();
  for (std::size_t k = 0; k < items.size(); ++k) {
    Tensor t = items[k].tensor;
    auto dst = t.mutable_values();
    std::copy(snap[k].begin(), snap[k].end(), dst.begin());
  }
}

}  // namespace detail

// Trains in place. On return the model holds the best-validation weights.
// `stats` must be fitted on `train_set` only.
inline TrainResult train(nn::Surrogate& model, const std::vector<Trajectory>& train_set,
                         const std::vector<Trajectory>& val_set, const NormStats& stats, const TrainConfig& cfg,
                         const EpochCallback& on_epoch = {}) {
  cfg.validate();
  require(!train_set.empty(), ErrorKind::kInvalidArgument, "train: empty training set");
  require(stats.fitted, ErrorKind::kNotFitted, "train: normalisation statistics are not fitted");

  auto params = model.parameters().tensors();
  ad::AdamWConfig hyper;
  hyper.weight_decay = cfg.weight_decay;
  auto opt = ad::make_optim_state(params, hyper, {cfg.lr, cfg.lr_floor, cfg.epochs * train_set.size()});
  std::mt19937_64 rng(cfg.seed);
  rollout::RolloutOptions ropts;
  ropts.truncation = cfg.truncation;
  const double l2 = stats.length_scale * stats.length_scale;

  TrainResult res;
  auto t0 = std::chrono::steady_clock::now();
  res.best_val = validation_loss(model, val_set, stats, cfg.threads);
  res.history.push_back({0, std::nan(""), res.best_val, opt.current_lr(), 0.0, 0.0});
  if (on_epoch) on_epoch(res.history.back());
  auto best = detail::snapshot(model.parameters());
  std::size_t since_best = 0;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochRecord rec;
    rec.epoch = epoch;
    double loss_sum = 0.0, norm_sum = 0.0;
    try {
      for (std::size_t idx : order) {
        const auto& tr = train_set[idx];
        const auto& g = *tr.graph;
        const auto& s0 = tr.states.front();
        const auto rt = rollout::rollout_tensors(model, g, stats, Tensor::from(s0.node_count, s0.dim, s0.positions),
                                                 Tensor::from(s0.node_count, s0.dim, s0.velocities), 0, tr.horizon(),
                                                 tr.dt, ropts);
        const auto loss = rollout_loss(rt, tr, rollout::free_mask(g), stats.length_scale);
        require(std::isfinite(loss.item()), ErrorKind::kDiverged,
                "training loss is not finite at epoch " + std::to_string(epoch));
        ad::zero_grads(params);
        ad::backward(loss);
        norm_sum += ad::clip_grad_norm(params, cfg.clip_norm);
        rec.lr = ad::adamw_step(params, opt);
        loss_sum += loss.item() * l2;
      }
      rec.val_loss = validation_loss(model, val_set, stats, cfg.threads);
      require(std::isfinite(rec.val_loss), ErrorKind::kDiverged,
              "validation loss is not finite at epoch " + std::to_string(epoch));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kDiverged && e.kind() != ErrorKind::kNonFinite) throw;
      res.diverged = true;
      res.message = e.what();
      break;
    }
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.grad_norm = norm_sum / static_cast<double>(order.size());
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    res.history.push_back(rec);
    bool stop = false;
    if (rec.val_loss < res.best_val) {
      res.best_val = rec.val_loss;
      res.best_epoch = epoch;
      best = detail::snapshot(model.parameters());
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      res.stopped_early = stop = true;
    }
    // Called after the best-weights snapshot of this epoch has been taken.
    if (on_epoch) on_epoch(rec);
    if (stop) break;
  }
  detail::restore(model.parameters(), best);
  return res;
}

}  // namespace crashsurr::train
