#pragma once

// Shared helpers for the unit suites: a seeded case generator and a few
// numeric comparisons.

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>

#include <gtest/gtest.h>

#include "rgsf/rng.hpp"
#include "rgsf/types.hpp"

namespace rgsf::test {

// Runs `body(rng, case_index)` for `cases` independent streams of one seed.
// On failure the case index is in the scoped trace, so a single case can be
// replayed from (seed, index).
inline void for_all(int cases, std::uint64_t seed, const std::function<void(CounterRng&, int)>& body) {
  for (int c = 0; c < cases; ++c) {
    SCOPED_TRACE("generated case " + std::to_string(c) + " of seed " + std::to_string(seed));
    CounterRng rng(seed, 100 + static_cast<std::uint64_t>(c));
    body(rng, c);
    if (::testing::Test::HasFatalFailure()) return;
  }
}

inline int uniform_int(CounterRng& rng, int lo, int hi) {
  return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

inline CVec random_cvec(CounterRng& rng, Eigen::Index n) {
  CVec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = cplx(rng.normal(), rng.normal());
  return v;
}

inline double rel_err(const CVec& x, const CVec& ref) {
  const double d = ref.norm();
  return d == 0.0 ? x.norm() : (x - ref).norm() / d;
}

}  // namespace rgsf::test
