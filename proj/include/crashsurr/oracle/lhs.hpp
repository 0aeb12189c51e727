#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "crashsurr/error.hpp"
#include "crashsurr/mesh/trajectory.hpp"

namespace crashsurr::oracle {

// Stratum of `value` among n equal-width strata of [low, high]; the upper
// bound belongs to the last stratum.
inline std::size_t stratum_of(double value, double low, double high, std::size_t n) {
  const double u = (value - low) / (high - low);
  const auto s = static_cast<std::size_t>(std::floor(u * static_cast<double>(n)));
  return std::min(s, n - 1);
}

// Latin hypercube: in every dimension the n samples occupy the n strata
// exactly once, with uniform jitter inside the stratum.
//
// With slices > 1 (n divisible by slices) the design is a sliced Latin
// hypercube: samples [s*m, (s+1)*m), m = n / slices, additionally form a
// Latin hypercube of m coarse strata on their own. Each coarse stratum holds
// `slices` fine strata, dealt one per slice.
//
// Values are nudged until they land in their intended stratum under
// stratum_of, which only matters for jitter draws that round onto a stratum
// boundary.
inline std::vector<DesignSample> lhs_sample(std::size_t n, const DesignSpace& space, std::uint64_t seed,
                                            std::size_t slices = 1) {
  require(n >= 1, ErrorKind::kInvalidArgument, "lhs: need at least one sample");
  require(slices >= 1 && n % slices == 0, ErrorKind::kInvalidArgument, "lhs: sample count must divide into slices");
  for (const auto& v : space)
    require(std::isfinite(v.low) && std::isfinite(v.high) && v.low < v.high, ErrorKind::kInvalidArgument,
            "lhs: invalid bounds for " + v.name);

  const std::size_t m = n / slices;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(0.0, 1.0);
  std::vector<DesignSample> out(n);
  for (std::size_t s = 0; s < n; ++s) {
    out[s].id = s;
    out[s].values.resize(space.size());
  }
  std::vector<std::size_t> strata(n), coarse(m), fine(slices);
  for (std::size_t d = 0; d < space.size(); ++d) {
    const auto& var = space[d];
    // fine_of[k][s]: fine stratum of coarse stratum k handed to slice s.
    std::vector<std::vector<std::size_t>> fine_of(m);
    for (std::size_t k = 0; k < m; ++k) {
      std::iota(fine.begin(), fine.end(), k * slices);
      std::shuffle(fine.begin(), fine.end(), rng);
      fine_of[k] = fine;
    }
    for (std::size_t sl = 0; sl < slices; ++sl) {
      std::iota(coarse.begin(), coarse.end(), std::size_t{0});
      std::shuffle(coarse.begin(), coarse.end(), rng);
      for (std::size_t j = 0; j < m; ++j) strata[sl * m + j] = fine_of[coarse[j]][sl];
    }
    for (std::size_t s = 0; s < n; ++s) {
      const double u = (static_cast<double>(strata[s]) + jitter(rng)) / static_cast<double>(n);
      double value = std::clamp(var.low + u * (var.high - var.low), var.low, var.high);
      while (stratum_of(value, var.low, var.high, n) < strata[s]) value = std::nextafter(value, var.high);
      while (stratum_of(value, var.low, var.high, n) > strata[s]) value = std::nextafter(value, var.low);
      out[s].values[d] = value;
    }
  }
  return out;
}

}  // namespace crashsurr::oracle
