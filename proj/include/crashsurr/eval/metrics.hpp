#pragma once

// Rollout error metrics. Displacements are measured from frame 0 of each
// trajectory: u_t = x_t - x_0.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "crashsurr/error.hpp"
#include "crashsurr/mesh/trajectory.hpp"

namespace crashsurr::eval {

struct RmseSeries {
  std::vector<double> per_step;  // RMSE_t for t = 1..T
  double mean = 0.0;             // RMSE_mu
  double final = 0.0;            // RMSE_T
  double relative = 0.0;         // RMSE_T / RMS ground-truth displacement at T
};

namespace detail {

inline void check_comparable(const Trajectory& pred, const Trajectory& ref) {
  require(pred.states.size() == ref.states.size(), ErrorKind::kShapeMismatch,
          "trajectories have different horizons (" + std::to_string(pred.horizon()) + " vs " +
              std::to_string(ref.horizon()) + ")");
  require(pred.dt == ref.dt, ErrorKind::kShapeMismatch, "trajectories have different dt");
  require(ref.horizon() >= 1, ErrorKind::kInvalidArgument, "trajectory has no steps");
  for (std::size_t t = 0; t < ref.states.size(); ++t)
    require(pred.states[t].node_count == ref.states[t].node_count && pred.states[t].dim == ref.states[t].dim,
            ErrorKind::kShapeMismatch, "state shapes differ at t=" + std::to_string(t));
}

}  // namespace detail

inline RmseSeries rmse_series(const Trajectory& pred, const Trajectory& ref) {
  detail::check_comparable(pred, ref);
  const std::size_t T = ref.horizon();
  const auto& p0 = pred.states.front().positions;
  const auto& r0 = ref.states.front().positions;
  const double n = static_cast<double>(ref.states.front().node_count);
  RmseSeries out;
  double sum = 0.0;
  for (std::size_t t = 1; t <= T; ++t) {
    const auto& p = pred.states[t].positions;
    const auto& r = ref.states[t].positions;
    double sq = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double e = (p[k] - p0[k]) - (r[k] - r0[k]);
      sq += e * e;
    }
    out.per_step.push_back(std::sqrt(sq / n));
    sum += out.per_step.back();
  }
  out.mean = sum / static_cast<double>(T);
  out.final = out.per_step.back();

  double gt = 0.0;
  const auto& rT = ref.states[T].positions;
  for (std::size_t k = 0; k < rT.size(); ++k) gt += (rT[k] - r0[k]) * (rT[k] - r0[k]);
  const double gt_rms = std::sqrt(gt / n);
  if (gt_rms > 0.0) {
    out.relative = out.final / gt_rms;
  } else {
    require(out.final == 0.0, ErrorKind::kInvalidArgument,
            "relative RMSE undefined: reference has zero final displacement but prediction does not");
    out.relative = 0.0;
  }
  return out;
}

inline double pair_distance(const NodeState& s, NodePair pair) {
  double sq = 0.0;
  for (std::size_t d = 0; d < s.dim; ++d) {
    const double diff = s.positions[pair.first * s.dim + d] - s.positions[pair.second * s.dim + d];
    sq += diff * diff;
  }
  return std::sqrt(sq);
}

struct SurvivalSeries {
  std::vector<double> predicted;  // d_t for t = 0..T
  std::vector<double> reference;
  std::vector<double> error;      // e_t = d_pred,t - d_ref,t; positive = surrogate leaves more space
  double final_error = 0.0;
};

inline SurvivalSeries survival_space(const Trajectory& pred, const Trajectory& ref) {
  detail::check_comparable(pred, ref);
  require(pred.survival_pair == ref.survival_pair, ErrorKind::kInvalidArgument, "survival pairs differ");
  SurvivalSeries out;
  for (std::size_t t = 0; t < ref.states.size(); ++t) {
    out.predicted.push_back(pair_distance(pred.states[t], pred.survival_pair));
    out.reference.push_back(pair_distance(ref.states[t], ref.survival_pair));
    out.error.push_back(out.predicted.back() - out.reference.back());
  }
  out.final_error = out.error.back();
  return out;
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population (ddof = 0)
};

inline MeanStd mean_std(const std::vector<double>& v) {
  require(!v.empty(), ErrorKind::kInvalidArgument, "mean_std: empty input");
  MeanStd m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m.mean) * (x - m.mean);
  m.std = std::sqrt(ss / static_cast<double>(v.size()));
  return m;
}

struct SampleReport {
  std::uint64_t id = 0;
  RmseSeries rmse;
  SurvivalSeries survival;
};

struct EvalReport {
  std::vector<SampleReport> samples;
  double rmse_mu = 0.0;            // mean over samples of RMSE_mu
  MeanStd rmse_final;
  double relative_rmse = 0.0;      // mean over samples
  MeanStd survival_final;          // final-step e_surv over samples
  std::vector<double> rmse_per_step;       // set mean of RMSE_t
  std::vector<double> survival_per_step;   // set mean of e_surv_t (t = 0..T)
};

inline EvalReport evaluate_set(const std::vector<Trajectory>& preds, const std::vector<Trajectory>& refs) {
  require(!refs.empty() && preds.size() == refs.size(), ErrorKind::kShapeMismatch,
          "evaluate: need matching non-empty prediction and reference sets");
  EvalReport rep;
  std::vector<double> mus, finals, rels, surv;
  for (std::size_t s = 0; s < refs.size(); ++s) {
    require(preds[s].design.id == refs[s].design.id, ErrorKind::kInvalidArgument,
            "evaluate: sample ids differ at position " + std::to_string(s));
    SampleReport sr{refs[s].design.id, rmse_series(preds[s], refs[s]), survival_space(preds[s], refs[s])};
    mus.push_back(sr.rmse.mean);
    finals.push_back(sr.rmse.final);
    rels.push_back(sr.rmse.relative);
    surv.push_back(sr.survival.final_error);
    if (rep.rmse_per_step.empty()) {
      rep.rmse_per_step.assign(sr.rmse.per_step.size(), 0.0);
      rep.survival_per_step.assign(sr.survival.error.size(), 0.0);
    }
    require(sr.rmse.per_step.size() == rep.rmse_per_step.size(), ErrorKind::kShapeMismatch,
            "evaluate: samples have different horizons");
    for (std::size_t t = 0; t < sr.rmse.per_step.size(); ++t) rep.rmse_per_step[t] += sr.rmse.per_step[t];
    for (std::size_t t = 0; t < sr.survival.error.size(); ++t) rep.survival_per_step[t] += sr.survival.error[t];
    rep.samples.push_back(std::move(sr));
  }
  const double n = static_cast<double>(refs.size());
  for (auto& v : rep.rmse_per_step) v /= n;
  for (auto& v : rep.survival_per_step) v /= n;
  rep.rmse_mu = mean_std(mus).mean;
  rep.rmse_final = mean_std(finals);
  rep.relative_rmse = mean_std(rels).mean;
  rep.survival_final = mean_std(surv);
  return rep;
}

}  // namespace crashsurr::eval
