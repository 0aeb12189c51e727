#pragma once

// DOE-aware train/val/test split with distributional diagnostics.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crashsurr/error.hpp"
#include "crashsurr/mesh/trajectory.hpp"

namespace crashsurr::eval {

// sup_x |F_a(x) - F_b(x)| over the empirical CDFs.
inline double ks_statistic(std::span<const double> a, std::span<const double> b) {
  require(!a.empty() && !b.empty(), ErrorKind::kInvalidArgument, "ks_statistic: empty sample");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = static_cast<double>(sa.size()), nb = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double best = 0.0;
  while (i < sa.size() || j < sb.size()) {
    double x;
    if (j == sb.size() || (i < sa.size() && sa[i] <= sb[j])) x = sa[i];
    else x = sb[j];
    while (i < sa.size() && sa[i] <= x) ++i;
    while (j < sb.size() && sb[j] <= x) ++j;
    best = std::max(best, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return best;
}

// 1-D Wasserstein-1 as the integral over u in [0, 1] of |Q_a(u) - Q_b(u)|
// with piecewise-constant empirical quantile functions.
inline double wasserstein1(std::span<const double> a, std::span<const double> b) {
  require(!a.empty() && !b.empty(), ErrorKind::kInvalidArgument, "wasserstein1: empty sample");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const std::size_t na = sa.size(), nb = sb.size();
  // Breakpoints k/na and l/nb, merged exactly via integer cross-multiplication.
  std::size_t i = 0, j = 0;
  double u_prev = 0.0, total = 0.0;
  while (i < na && j < nb) {
    const std::size_t next_a = (i + 1) * nb, next_b = (j + 1) * na;  // both scaled by na*nb
    const std::size_t step = std::min(next_a, next_b);
    const double u = static_cast<double>(step) / static_cast<double>(na * nb);
    total += (u - u_prev) * std::abs(sa[i] - sb[j]);
    u_prev = u;
    if (next_a == step) ++i;
    if (next_b == step) ++j;
  }
  return total;
}

enum class SplitName : std::uint8_t { kTrain = 0, kVal = 1, kTest = 2 };

inline const char* to_string(SplitName s) {
  switch (s) {
    case SplitName::kTrain: return "train";
    case SplitName::kVal: return "val";
    case SplitName::kTest: return "test";
  }
  return "?";
}

struct PairDiagnostics {
  SplitName a;
  SplitName b;
  std::vector<double> ks;           // per design variable
  std::vector<double> wasserstein;  // per design variable
};

struct SplitReport {
  std::vector<std::uint64_t> ids;
  std::vector<SplitName> assignment;  // parallel to ids
  std::vector<std::string> variables;
  std::vector<PairDiagnostics> pairs;  // train-val, train-test, val-test
  double max_ks = 0.0;
  double ks_threshold = 0.35;
  bool passed = false;
  std::size_t attempts = 0;
  std::uint64_t seed = 0;

  std::vector<std::uint64_t> members(SplitName s) const {
    std::vector<std::uint64_t> out;
    for (std::size_t k = 0; k < ids.size(); ++k)
      if (assignment[k] == s) out.push_back(ids[k]);
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["seed"] = seed;
    j["ks_threshold"] = ks_threshold;
    j["max_ks"] = max_ks;
    j["passed"] = passed;
    j["attempts"] = attempts;
    for (auto s : {SplitName::kTrain, SplitName::kVal, SplitName::kTest}) j["splits"][to_string(s)] = members(s);
    nlohmann::json diag = nlohmann::json::array();
    for (const auto& p : pairs) {
      for (std::size_t v = 0; v < variables.size(); ++v)
        diag.push_back({{"pair", std::string(to_string(p.a)) + "-" + to_string(p.b)},
                        {"variable", variables[v]},
                        {"ks", p.ks[v]},
                        {"wasserstein1", p.wasserstein[v]}});
    }
    j["diagnostics"] = diag;
    return j;
  }
};

struct SplitOptions {
  std::array<double, 3> ratios{0.6, 0.2, 0.2};
  double ks_threshold = 0.35;
  std::size_t max_attempts = 64;
  std::size_t max_swap_passes = 50;
};

namespace detail {

inline std::array<std::size_t, 3> split_counts(std::size_t n, const std::array<double, 3>& r) {
  std::array<std::size_t, 3> c{};
  c[1] = static_cast<std::size_t>(std::llround(r[1] * static_cast<double>(n)));
  c[2] = static_cast<std::size_t>(std::llround(r[2] * static_cast<double>(n)));
  for (std::size_t k = 1; k < 3; ++k)
    if (r[k] > 0.0 && c[k] == 0) c[k] = 1;
  require(c[1] + c[2] < n, ErrorKind::kInvalidArgument, "split: too few samples for the requested ratios");
  c[0] = n - c[1] - c[2];
  return c;
}

// Diagnostics of an assignment over normalised design values (column-major per variable).
inline void diagnose(const std::vector<std::vector<double>>& cols, const std::vector<SplitName>& assign,
                     SplitReport& rep) {
  static constexpr std::array<std::array<SplitName, 2>, 3> kPairs{
      {{SplitName::kTrain, SplitName::kVal}, {SplitName::kTrain, SplitName::kTest}, {SplitName::kVal, SplitName::kTest}}};
  rep.pairs.clear();
  rep.max_ks = 0.0;
  std::array<std::vector<double>, 3> parts;
  for (const auto& pr : kPairs) {
    PairDiagnostics pd{pr[0], pr[1], {}, {}};
    for (const auto& col : cols) {
      for (auto& p : parts) p.clear();
      for (std::size_t k = 0; k < col.size(); ++k) parts[static_cast<std::size_t>(assign[k])].push_back(col[k]);
      const auto& a = parts[static_cast<std::size_t>(pr[0])];
      const auto& b = parts[static_cast<std::size_t>(pr[1])];
      if (a.empty() || b.empty()) {
        pd.ks.push_back(0.0);
        pd.wasserstein.push_back(0.0);
        continue;
      }
      pd.ks.push_back(ks_statistic(a, b));
      pd.wasserstein.push_back(wasserstein1(a, b));
      rep.max_ks = std::max(rep.max_ks, pd.ks.back());
    }
    rep.pairs.push_back(std::move(pd));
  }
}

// Score used by the swap search, compared lexicographically: worst KS, how
// many (pair, variable) cells attain it, then the KS sum.
struct KsScore {
  double worst = 0.0;
  std::size_t at_worst = 0;
  double sum = 0.0;
  friend bool operator<(const KsScore& x, const KsScore& y) {
    if (x.worst != y.worst) return x.worst < y.worst;
    if (x.at_worst != y.at_worst) return x.at_worst < y.at_worst;
    return x.sum < y.sum - 1e-12;
  }
};

inline KsScore ks_score(const std::vector<std::vector<double>>& cols, const std::vector<SplitName>& assign) {
  SplitReport tmp;
  diagnose(cols, assign, tmp);
  KsScore s;
  s.worst = tmp.max_ks;
  for (const auto& p : tmp.pairs)
    for (double k : p.ks) {
      s.sum += k;
      if (k >= tmp.max_ks - 1e-12) ++s.at_worst;
    }
  return s;
}

}  // namespace detail

// Round-robin dealing along a random projection of the design space,
// refined by pairwise swaps between splits that lower the worst KS
// statistic. Retries with fresh projections until the KS gate holds.
inline SplitReport try_make_split(const std::vector<DesignSample>& samples, const DesignSpace& space,
                                  std::uint64_t seed, const SplitOptions& opt = {}) {
  require(!samples.empty(), ErrorKind::kInvalidArgument, "split: no samples");
  const double rsum = opt.ratios[0] + opt.ratios[1] + opt.ratios[2];
  require(std::abs(rsum - 1.0) < 1e-9 && opt.ratios[0] > 0.0 && opt.ratios[1] >= 0.0 && opt.ratios[2] >= 0.0,
          ErrorKind::kInvalidArgument, "split: ratios must be non-negative and sum to 1");
  require(opt.max_attempts >= 1, ErrorKind::kInvalidArgument, "split: need at least one attempt");
  const std::size_t n = samples.size(), nv = space.size();
  const auto counts = detail::split_counts(n, opt.ratios);

  std::vector<std::vector<double>> cols(nv, std::vector<double>(n));
  for (std::size_t k = 0; k < n; ++k) {
    samples[k].check_within(space);
    for (std::size_t v = 0; v < nv; ++v)
      cols[v][k] = (samples[k].values[v] - space[v].low) / (space[v].high - space[v].low);
  }

  SplitReport best;
  best.max_ks = 2.0;
  for (std::size_t attempt = 0; attempt < opt.max_attempts; ++attempt) {
    std::mt19937_64 rng(seed + attempt);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> dir(nv);
    for (auto& d : dir) d = normal(rng);
    std::vector<double> proj(n, 0.0);
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t v = 0; v < nv; ++v) proj[k] += dir[v] * cols[v][k];
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return proj[a] < proj[b]; });

    // Deal: at each rank give the sample to the split furthest behind its quota.
    std::vector<SplitName> assign(n);
    std::array<std::size_t, 3> dealt{};
    for (std::size_t p = 0; p < n; ++p) {
      std::size_t pick = 0;
      double worst = -1e300;
      for (std::size_t s = 0; s < 3; ++s) {
        if (dealt[s] >= counts[s]) continue;
        const double deficit = static_cast<double>(counts[s]) * static_cast<double>(p + 1) / static_cast<double>(n) -
                               static_cast<double>(dealt[s]);
        if (deficit > worst) {
          worst = deficit;
          pick = s;
        }
      }
      assign[order[p]] = static_cast<SplitName>(pick);
      ++dealt[pick];
    }

    auto score = detail::ks_score(cols, assign);
    for (std::size_t pass = 0; pass < opt.max_swap_passes && score.worst > opt.ks_threshold; ++pass) {
      bool improved = false;
      for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
          if (assign[a] == assign[b]) continue;
          std::swap(assign[a], assign[b]);
          const auto s = detail::ks_score(cols, assign);
          if (s < score) {
            score = s;
            improved = true;
          } else {
            std::swap(assign[a], assign[b]);
          }
        }
      }
      if (!improved) break;
    }

    if (score.worst < best.max_ks) {
      best = SplitReport{};
      best.assignment = assign;
      detail::diagnose(cols, assign, best);
      best.attempts = attempt + 1;
    }
    if (best.max_ks <= opt.ks_threshold) break;
  }
  for (const auto& s : samples) best.ids.push_back(s.id);
  for (const auto& v : space) best.variables.push_back(v.name);
  best.ks_threshold = opt.ks_threshold;
  best.passed = best.max_ks <= opt.ks_threshold;
  best.seed = seed;
  if (!best.passed) best.attempts = opt.max_attempts;
  return best;
}

// As try_make_split, but an unmet KS gate is an error carrying the best report.
class SplitUnreachable : public Error {
 public:
  explicit SplitUnreachable(SplitReport best)
      : Error(ErrorKind::kUnreachable, "split: KS threshold " + std::to_string(best.ks_threshold) +
                                           " not met; best max KS " + std::to_string(best.max_ks)),
        best_(std::move(best)) {}
  const SplitReport& best() const { return best_; }

 private:
  SplitReport best_;
};

inline SplitReport make_split(const std::vector<DesignSample>& samples, const DesignSpace& space, std::uint64_t seed,
                              const SplitOptions& opt = {}) {
  auto rep = try_make_split(samples, space, seed, opt);
  if (!rep.passed) throw SplitUnreachable(std::move(rep));
  return rep;
}

}  // namespace crashsurr::eval
