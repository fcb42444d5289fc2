#pragma once

// Special-function kernels: Wigner d/D functions in the normalization used
// throughout the library, the flat (n, m, mu) index map, Gauss-Legendre rules
// and spherical Bessel/Hankel functions.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "rgsf/errors.hpp"
#include "rgsf/types.hpp"

namespace rgsf {

/// Number of band-limited Wigner D-functions, (n_max+1)(2n_max+1)(2n_max+3)/3.
constexpr std::size_t wigner_count(int n_max) {
  const auto n = static_cast<std::size_t>(n_max);
  return (n + 1) * (2 * n + 1) * (2 * n + 3) / 3;
}

struct WignerIndex {
  int n = 0;
  int m = 0;
  int mu = 0;
  std::size_t flat = 0;

  friend bool operator==(const WignerIndex&, const WignerIndex&) = default;
};

/// Flat ordering of the band-limited basis.
///
/// Blocks are laid out lexicographically in (mu, m), each ascending from
/// -n_max to n_max; inside a block the degree runs n_min..n_max with
/// n_min = max(|m|, |mu|). Every (mu, m) block is therefore one contiguous
/// index range, which is what the block-diagonal concentration matrix and the
/// RGSF transforms slice on.
class IndexMap {
public:
  static constexpr int kMaxBandLimit = 128;

  explicit IndexMap(int n_max) : n_max_(n_max) {
    if (n_max < 0 || n_max > kMaxBandLimit) {
      throw ParameterError("band-limit must lie in [0, " + std::to_string(kMaxBandLimit) +
                           "], got " + std::to_string(n_max));
    }
    const int side = 2 * n_max + 1;
    offsets_.resize(static_cast<std::size_t>(side) * side + 1, 0);
    std::size_t acc = 0;
    for (int mu = -n_max; mu <= n_max; ++mu) {
      for (int m = -n_max; m <= n_max; ++m) {
        offsets_[block_id(mu, m)] = acc;
        acc += static_cast<std::size_t>(n_max - std::max(std::abs(m), std::abs(mu)) + 1);
      }
    }
    offsets_.back() = acc;
  }

  int n_max() const { return n_max_; }
  std::size_t size() const { return offsets_.back(); }
  std::size_t block_count() const { return offsets_.size() - 1; }

  std::size_t block_id(int mu, int m) const {
    check_orders(mu, m);
    const int side = 2 * n_max_ + 1;
    return static_cast<std::size_t>((mu + n_max_) * side + (m + n_max_));
  }

  /// (mu, m) of a block id.
  std::pair<int, int> block_orders(std::size_t id) const {
    if (id >= block_count()) throw IndexError("block id out of range");
    const int side = 2 * n_max_ + 1;
    const int i = static_cast<int>(id);
    return {i / side - n_max_, i % side - n_max_};
  }

  static int n_min(int mu, int m) { return std::max(std::abs(m), std::abs(mu)); }

  std::size_t block_offset(std::size_t id) const { return offsets_.at(id); }
  std::size_t block_dim(std::size_t id) const { return offsets_.at(id + 1) - offsets_.at(id); }

  std::size_t flat(int n, int m, int mu) const {
    check(n, m, mu);
    return offsets_[block_id(mu, m)] + static_cast<std::size_t>(n - n_min(mu, m));
  }

  WignerIndex at(int n, int m, int mu) const { return {n, m, mu, flat(n, m, mu)}; }

  WignerIndex index(std::size_t flat_index) const {
    if (flat_index >= size()) throw IndexError("flat index out of range");
    const auto it = std::upper_bound(offsets_.begin(), offsets_.end(), flat_index);
    const auto id = static_cast<std::size_t>(it - offsets_.begin()) - 1;
    const auto [mu, m] = block_orders(id);
    const int n = n_min(mu, m) + static_cast<int>(flat_index - offsets_[id]);
    return {n, m, mu, flat_index};
  }

  void check(int n, int m, int mu) const {
    if (n < 0 || n > n_max_ || std::abs(m) > n || std::abs(mu) > n) {
      throw IndexError("invalid Wigner index (n=" + std::to_string(n) + ", m=" + std::to_string(m) +
                       ", mu=" + std::to_string(mu) + ") for n_max=" + std::to_string(n_max_));
    }
  }

private:
  void check_orders(int mu, int m) const {
    if (std::abs(mu) > n_max_ || std::abs(m) > n_max_) {
      throw IndexError("block orders (mu=" + std::to_string(mu) + ", m=" + std::to_string(m) +
                       ") exceed n_max=" + std::to_string(n_max_));
    }
  }

  int n_max_;
  std::vector<std::size_t> offsets_;
};

inline double log_factorial(int k) {
  if (k < 0) throw ParameterError("factorial of a negative integer");
  return std::lgamma(static_cast<double>(k) + 1.0);
}

namespace detail {

inline void check_d_index(int n, int mu, int m) {
  if (n < 0 || std::abs(m) > n || std::abs(mu) > n) {
    throw IndexError("invalid Wigner d index (n=" + std::to_string(n) + ", mu=" + std::to_string(mu) +
                     ", m=" + std::to_string(m) + ")");
  }
}

// Log-space evaluation of one or all terms of the factorial sum. Exponent-0
// powers are skipped so beta = 0 and beta = pi stay finite.
inline double d_sum_unnormalized(int n, int mu, int m, double beta, int sigma_lo, int sigma_hi) {
  const double c = std::cos(0.5 * beta);
  const double s = std::sin(0.5 * beta);
  const double log_c = std::log(std::abs(c));
  const double log_s = std::log(std::abs(s));
  const double log_pref = 0.5 * (log_factorial(n + m) + log_factorial(n - m) + log_factorial(n + mu) +
                                 log_factorial(n - mu));
  double sum = 0.0;
  for (int sigma = sigma_lo; sigma <= sigma_hi; ++sigma) {
    const int pc = 2 * n - 2 * sigma + m - mu;
    const int ps = 2 * sigma - m + mu;
    if ((pc > 0 && c == 0.0) || (ps > 0 && s == 0.0)) continue;
    double log_term = log_pref - log_factorial(sigma) - log_factorial(n + m - sigma) -
                      log_factorial(n - mu - sigma) - log_factorial(mu - m + sigma);
    if (pc > 0) log_term += pc * log_c;
    if (ps > 0) log_term += ps * log_s;
    double term = std::exp(log_term);
    if ((sigma & 1) != 0) term = -term;
    if (pc > 0 && c < 0.0 && (pc & 1) != 0) term = -term;
    if (ps > 0 && s < 0.0 && (ps & 1) != 0) term = -term;
    sum += term;
  }
  if (((mu - m) & 1) != 0) sum = -sum;
  return sum;
}

}  // namespace detail

/// Wigner d-function by the explicit factorial sum, normalized by sqrt((2n+1)/2).
/// Subject to cancellation for large n; used as the reference evaluator.
inline double wigner_d_direct(int n, int mu, int m, double beta) {
  detail::check_d_index(n, mu, m);
  const int lo = std::max(0, m - mu);
  const int hi = std::min(n + m, n - mu);
  return std::sqrt((2.0 * n + 1.0) / 2.0) * detail::d_sum_unnormalized(n, mu, m, beta, lo, hi);
}

/// Normalized d_n^{mu m}(beta) for n = n_min..n_max at fixed (mu, m).
///
/// Seeded at n_min, where the factorial sum has a single term, then advanced
/// with the three-term recursion in degree.
inline void wigner_d_column(int mu, int m, int n_max, double beta, double* out) {
  const int n0 = IndexMap::n_min(mu, m);
  if (n0 > n_max) throw IndexError("block (mu, m) is empty for this band-limit");
  const int sigma0 = std::max(0, m - mu);
  const double seed = detail::d_sum_unnormalized(n0, mu, m, beta, sigma0, sigma0);
  const double x = std::cos(beta);
  const double mm = static_cast<double>(m);
  const double uu = static_cast<double>(mu);

  double prev = 0.0;  // unnormalized d at j - 1
  double cur = seed;  // unnormalized d at j
  out[0] = std::sqrt((2.0 * n0 + 1.0) / 2.0) * cur;
  for (int j = n0; j < n_max; ++j) {
    const double jd = j;
    const double j1 = jd + 1.0;
    const double lead = j1 * (2.0 * jd + 1.0) / std::sqrt((j1 * j1 - mm * mm) * (j1 * j1 - uu * uu));
    double next;
    if (j == 0) {
      next = lead * x * cur;
    } else {
      const double shift = mm * uu / (jd * j1);
      const double back = std::sqrt((jd * jd - mm * mm) * (jd * jd - uu * uu)) / (jd * (2.0 * jd + 1.0));
      next = lead * ((x - shift) * cur - back * prev);
    }
    prev = cur;
    cur = next;
    out[j + 1 - n0] = std::sqrt((2.0 * j + 3.0) / 2.0) * cur;
  }
}

inline std::vector<double> wigner_d_column(int mu, int m, int n_max, double beta) {
  std::vector<double> out(static_cast<std::size_t>(n_max - IndexMap::n_min(mu, m) + 1));
  wigner_d_column(mu, m, n_max, beta, out.data());
  return out;
}

/// Normalized Wigner d-function d_n^{mu m}(beta), evaluated by recursion.
inline double wigner_d(int n, int mu, int m, double beta) {
  detail::check_d_index(n, mu, m);
  const auto column = wigner_d_column(mu, m, n, beta);
  return column.back();
}

/// D_n^{mu m}(alpha, beta, gamma) = (4 pi^2)^{-1/2} e^{-i mu alpha} d_n^{mu m}(beta) e^{-i m gamma}.
inline cplx wigner_D(const WignerIndex& idx, double alpha, double beta, double gamma) {
  const double d = wigner_d(idx.n, idx.mu, idx.m, beta);
  const double phase = -(idx.mu * alpha + idx.m * gamma);
  return (d / kTwoPi) * cplx(std::cos(phase), std::sin(phase));
}

// ---------------------------------------------------------------------------
// Quadrature

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  int order() const { return static_cast<int>(nodes.size()); }

  /// Affine map of the rule from [-1, 1] onto [a, b].
  QuadratureRule mapped(double a, double b) const {
    QuadratureRule r;
    r.nodes.resize(nodes.size());
    r.weights.resize(weights.size());
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (b + a);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      r.nodes[i] = mid + half * nodes[i];
      r.weights[i] = half * weights[i];
    }
    return r;
  }
};

/// P_n(x) and P_n'(x) by the Bonnet recursion.
inline std::pair<double, double> legendre_p(int n, double x) {
  if (n < 0) throw ParameterError("Legendre degree must be non-negative");
  double p0 = 1.0;
  double p1 = x;
  if (n == 0) return {1.0, 0.0};
  for (int k = 2; k <= n; ++k) {
    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  // n (x P_n - P_{n-1}) / (x^2 - 1); only called off the endpoints.
  const double dp = n * (x * p1 - p0) / (x * x - 1.0);
  return {p1, dp};
}

inline QuadratureRule gauss_legendre(int order) {
  if (order < 1 || order > 256) {
    throw ParameterError("Gauss-Legendre order must lie in [1, 256], got " + std::to_string(order));
  }
  QuadratureRule rule;
  rule.nodes.resize(static_cast<std::size_t>(order));
  rule.weights.resize(static_cast<std::size_t>(order));
  const int half = (order + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (order + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      const auto [p, d] = legendre_p(order, x);
      dp = d;
      const double dx = p / d;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    dp = legendre_p(order, x).second;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    // Descending Newton roots; store ascending and mirror.
    rule.nodes[static_cast<std::size_t>(i)] = -x;
    rule.nodes[static_cast<std::size_t>(order - 1 - i)] = x;
    rule.weights[static_cast<std::size_t>(i)] = w;
    rule.weights[static_cast<std::size_t>(order - 1 - i)] = w;
  }
  if (order % 2 == 1) rule.nodes[static_cast<std::size_t>(order / 2)] = 0.0;
  return rule;
}

// ---------------------------------------------------------------------------
// Spherical Bessel functions

/// j_0..j_n at x > 0. Upward recursion while stable (n < x), otherwise
/// Miller's downward recursion normalized against j_0.
inline std::vector<double> spherical_bessel_j_all(int n, double x) {
  if (x <= 0.0) throw DomainError("spherical Bessel argument must be positive");
  if (n < 0) throw ParameterError("spherical Bessel order must be non-negative");
  std::vector<double> j(static_cast<std::size_t>(n) + 1);
  const double j0 = std::sin(x) / x;
  if (n < x) {
    j[0] = j0;
    if (n >= 1) j[1] = std::sin(x) / (x * x) - std::cos(x) / x;
    for (int k = 1; k < n; ++k) j[k + 1] = (2.0 * k + 1.0) / x * j[k] - j[k - 1];
    return j;
  }
  const int start = n + 20 + static_cast<int>(std::sqrt(40.0 * (n + 1)));
  double up = 0.0;
  double cur = 1e-300;
  for (int k = start; k > 0; --k) {
    const double down = (2.0 * k + 1.0) / x * cur - up;
    up = cur;
    cur = down;
    if (k - 1 <= n) j[static_cast<std::size_t>(k - 1)] = cur;
    if (std::abs(cur) > 1e250) {
      // Rescale to stay in range; stored entries rescale with it.
      const double f = 1e-250;
      cur *= f;
      up *= f;
      for (int q = k - 1; q <= n; ++q) j[static_cast<std::size_t>(q)] *= f;
    }
  }
  // Normalize with whichever of j_0 / j_1 is better conditioned.
  const double j1 = std::sin(x) / (x * x) - std::cos(x) / x;
  const double scale = (std::abs(j0) > std::abs(j1) || n == 0) ? j0 / j[0] : j1 / j[1];
  for (auto& v : j) v *= scale;
  return j;
}

/// y_0..y_n at x > 0 by upward recursion (stable for the Neumann branch).
inline std::vector<double> spherical_bessel_y_all(int n, double x) {
  if (x <= 0.0) throw DomainError("spherical Bessel argument must be positive");
  if (n < 0) throw ParameterError("spherical Bessel order must be non-negative");
  std::vector<double> y(static_cast<std::size_t>(n) + 1);
  y[0] = -std::cos(x) / x;
  if (n >= 1) y[1] = -std::cos(x) / (x * x) - std::sin(x) / x;
  for (int k = 1; k < n; ++k) y[k + 1] = (2.0 * k + 1.0) / x * y[k] - y[k - 1];
  return y;
}

/// Outgoing spherical Hankel functions h_0^{(1)}..h_n^{(1)} at x > 0.
inline std::vector<cplx> spherical_hankel1_all(int n, double x) {
  const auto j = spherical_bessel_j_all(n, x);
  const auto y = spherical_bessel_y_all(n, x);
  std::vector<cplx> h(j.size());
  for (std::size_t k = 0; k < h.size(); ++k) h[k] = cplx(j[k], y[k]);
  return h;
}

inline cplx spherical_hankel1(int n, double x) { return spherical_hankel1_all(n, x).back(); }

}  // namespace rgsf
