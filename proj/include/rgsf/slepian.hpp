#pragma once

// Rotation Group Slepian Functions on a latitudinal belt.
//
// The concentration matrix of the band-limited Wigner D-functions on
// R = [0, 2pi) x [theta1, theta2] x [0, 2pi) is block diagonal in (mu, m).
// Each block is a small dense symmetric matrix of belt integrals of products
// of d-functions; its eigenvectors are the RGSF expansion coefficients and its
// eigenvalues the concentrations on R.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "rgsf/errors.hpp"
#include "rgsf/specfun.hpp"
#include "rgsf/types.hpp"

namespace rgsf {

struct BeltRegion {
  double theta1 = 0.0;
  double theta2 = kPi;

  static BeltRegion full() { return {0.0, kPi}; }

  void validate() const {
    if (!(theta1 >= 0.0 && theta1 < theta2 && theta2 <= kPi)) {
      throw ParameterError("belt requires 0 <= theta1 < theta2 <= pi, got [" + std::to_string(theta1) + ", " +
                           std::to_string(theta2) + "]");
    }
  }

  bool contains(double beta) const { return beta >= theta1 && beta <= theta2; }
  bool is_full() const { return theta1 == 0.0 && theta2 == kPi; }
  double width() const { return theta2 - theta1; }

  /// Fraction of SO(3) volume (sin beta measure) lying in the belt.
  double area_fraction() const { return 0.5 * (std::cos(theta1) - std::cos(theta2)); }
};

struct ConcentrationBlock {
  int mu = 0;
  int m = 0;
  int n_min = 0;
  RMat matrix;        // belt integrals, rows/cols indexed by n - n_min
  RVec eigenvalues;   // descending concentrations on R
  RVec complements;   // 1 - eigenvalues, evaluated directly on R^c
  RMat eigenvectors;  // column i is the i-th eigenvector

  std::size_t dim() const { return static_cast<std::size_t>(matrix.rows()); }
};

struct SymmetricEigen {
  RVec values;
  RMat vectors;
  int sweeps = 0;
};

/// Cyclic Jacobi eigendecomposition of a dense symmetric matrix.
///
/// Rotations sweep until the off-diagonal Frobenius norm drops to `tol`.
/// Eigenpairs come back sorted by descending eigenvalue (ties broken by the
/// position of each vector's first nonzero entry) and each eigenvector is
/// signed so its largest-magnitude entry is positive.
inline SymmetricEigen jacobi_eigen(RMat a, double tol = 1e-13, int max_sweeps = 100) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n) throw ShapeError("jacobi_eigen needs a square matrix");
  RMat v = RMat::Identity(n, n);
  auto off_norm = [&] {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
  };
  int sweep = 0;
  for (; sweep < max_sweeps && off_norm() > tol; ++sweep) {
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  auto first_nonzero = [&](Eigen::Index col) {
    for (Eigen::Index k = 0; k < n; ++k)
      if (std::abs(v(k, col)) > 1e-12) return k;
    return n;
  };
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) {
    if (a(x, x) != a(y, y)) return a(x, x) > a(y, y);
    return first_nonzero(x) < first_nonzero(y);
  });

  SymmetricEigen out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  out.sweeps = sweep;
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = order[static_cast<std::size_t>(k)];
    out.values(k) = a(src, src);
    RVec col = v.col(src);
    Eigen::Index arg = 0;
    for (Eigen::Index r = 1; r < n; ++r)
      if (std::abs(col(r)) > std::abs(col(arg)) + 1e-14) arg = r;
    if (col(arg) < 0.0) col = -col;
    out.vectors.col(k) = col;
  }
  return out;
}

namespace detail {

// Rows: sqrt(w_q) d_n^{mu m}(beta_q) for n = n_min..n_max over a rule in
// x = cos(beta). The Gram matrix of these rows is the belt integral matrix.
inline RMat weighted_d_samples(int mu, int m, int n_max, const QuadratureRule& rule_x) {
  const auto dim = static_cast<Eigen::Index>(n_max - IndexMap::n_min(mu, m) + 1);
  RMat samples(dim, rule_x.order());
  std::vector<double> column(static_cast<std::size_t>(dim));
  for (int q = 0; q < rule_x.order(); ++q) {
    const double beta = std::acos(std::clamp(rule_x.nodes[static_cast<std::size_t>(q)], -1.0, 1.0));
    wigner_d_column(mu, m, n_max, beta, column.data());
    const double sw = std::sqrt(rule_x.weights[static_cast<std::size_t>(q)]);
    for (Eigen::Index k = 0; k < dim; ++k) samples(k, q) = sw * column[static_cast<std::size_t>(k)];
  }
  return samples;
}

// In x = cos(beta) the block integrands are polynomials of degree <= 2 n_max.
inline int belt_rule_order(int n_max) { return 2 * n_max + 2; }

inline QuadratureRule belt_rule(const BeltRegion& belt, int n_max) {
  return gauss_legendre(belt_rule_order(n_max)).mapped(std::cos(belt.theta2), std::cos(belt.theta1));
}

// R^c as up to two x-intervals: (cos theta2 .. -1) and (1 .. cos theta1).
inline QuadratureRule complement_rule(const BeltRegion& belt, int n_max) {
  QuadratureRule out;
  const auto base = gauss_legendre(belt_rule_order(n_max));
  auto append = [&](double a, double b) {
    if (b - a <= 0.0) return;
    const auto r = base.mapped(a, b);
    out.nodes.insert(out.nodes.end(), r.nodes.begin(), r.nodes.end());
    out.weights.insert(out.weights.end(), r.weights.begin(), r.weights.end());
  };
  append(-1.0, std::cos(belt.theta2));
  append(std::cos(belt.theta1), 1.0);
  return out;
}

// Concentrations as sums of squares so they stay strictly positive even
// where the true value is far below machine epsilon.
inline RVec rayleigh_energies(const RMat& samples, const RMat& vectors) {
  if (samples.cols() == 0) return RVec::Zero(vectors.cols());
  return (vectors.transpose() * samples).rowwise().squaredNorm();
}

}  // namespace detail

/// Belt integral matrix of one (mu, m) block and its eigendecomposition.
///
/// Eigenvectors come from cyclic Jacobi on the belt matrix. Each eigenvalue
/// is then re-evaluated as the quadrature energy of its eigenvector on R, and
/// 1 - lambda as the energy on R^c; both are sums of squares, so
/// concentrations below machine epsilon stay positive.
inline ConcentrationBlock build_concentration_block(int mu, int m, const BeltRegion& belt, int n_max) {
  belt.validate();
  if (n_max < 0 || std::abs(mu) > n_max || std::abs(m) > n_max) {
    throw IndexError("block (mu=" + std::to_string(mu) + ", m=" + std::to_string(m) + ") invalid for n_max=" +
                     std::to_string(n_max));
  }
  ConcentrationBlock block;
  block.mu = mu;
  block.m = m;
  block.n_min = IndexMap::n_min(mu, m);

  const RMat samples = detail::weighted_d_samples(mu, m, n_max, detail::belt_rule(belt, n_max));
  block.matrix = samples * samples.transpose();
  block.matrix = 0.5 * (block.matrix + block.matrix.transpose()).eval();

  auto eig = jacobi_eigen(block.matrix);
  const RMat outside = detail::weighted_d_samples(mu, m, n_max, detail::complement_rule(belt, n_max));
  const RVec inside_energy = detail::rayleigh_energies(samples, eig.vectors);
  const RVec outside_energy = detail::rayleigh_energies(outside, eig.vectors);

  // Refinement can reorder values inside clusters narrower than round-off.
  const auto dim = static_cast<Eigen::Index>(eig.values.size());
  std::vector<Eigen::Index> order(static_cast<std::size_t>(dim));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index x, Eigen::Index y) { return inside_energy(x) > inside_energy(y); });
  block.eigenvalues.resize(dim);
  block.complements.resize(dim);
  block.eigenvectors.resize(dim, dim);
  for (Eigen::Index k = 0; k < dim; ++k) {
    const Eigen::Index src = order[static_cast<std::size_t>(k)];
    block.eigenvalues(k) = inside_energy(src);
    block.complements(k) = outside_energy(src);
    block.eigenvectors.col(k) = eig.vectors.col(src);
  }
  return block;
}

/// Recomputes 1 - lambda for each stored eigenvector by quadrature on R^c
/// (used after loading a cache, which stores only lambda).
inline void refresh_complements(ConcentrationBlock& block, const BeltRegion& belt, int n_max) {
  const RMat outside = detail::weighted_d_samples(block.mu, block.m, n_max, detail::complement_rule(belt, n_max));
  block.complements = detail::rayleigh_energies(outside, block.eigenvectors);
}

/// All RGSFs for a belt and band-limit, with the lambda_c partition.
///
/// Coefficient vectors in the RGSF domain use the same block-contiguous flat
/// layout as the Wigner-D domain: inside block (mu, m) the entry at offset i
/// belongs to the block's i-th most concentrated function.
class RgsfBasis {
public:
  RgsfBasis(BeltRegion belt, int n_max, std::vector<ConcentrationBlock> blocks, double lambda_c)
      : belt_(belt), index_(n_max), blocks_(std::move(blocks)) {
    if (blocks_.size() != index_.block_count()) throw ShapeError("block count does not match band-limit");
    lambda_.resize(static_cast<Eigen::Index>(index_.size()));
    complement_.resize(lambda_.size());
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      const auto& blk = blocks_[b];
      if (index_.block_id(blk.mu, blk.m) != b) throw ShapeError("blocks are not in canonical (mu, m) order");
      if (blk.dim() != index_.block_dim(b)) throw ShapeError("block dimension mismatch");
      const auto off = static_cast<Eigen::Index>(index_.block_offset(b));
      const auto dim = static_cast<Eigen::Index>(blk.dim());
      lambda_.segment(off, dim) = blk.eigenvalues;
      complement_.segment(off, dim) =
          blk.complements.size() == dim ? blk.complements : (RVec::Ones(dim) - blk.eigenvalues).eval();
    }
    global_order_.resize(index_.size());
    std::iota(global_order_.begin(), global_order_.end(), std::size_t{0});
    // Flat position already encodes (block lexicographic, within-block rank).
    std::stable_sort(global_order_.begin(), global_order_.end(),
                     [&](std::size_t x, std::size_t y) { return lambda_(static_cast<Eigen::Index>(x)) >
                                                                lambda_(static_cast<Eigen::Index>(y)); });
    set_cutoff(lambda_c);
  }

  /// Re-partition without touching the eigendecompositions.
  void set_cutoff(double lambda_c) {
    if (!(lambda_c > 0.0 && lambda_c < 1.0)) {
      throw ParameterError("lambda_c must lie in (0, 1), got " + std::to_string(lambda_c));
    }
    lambda_c_ = lambda_c;
    kept_.clear();
    for (std::size_t k = 0; k < index_.size(); ++k)
      if (lambda_(static_cast<Eigen::Index>(k)) >= lambda_c) kept_.push_back(k);
  }

  RgsfBasis with_cutoff(double lambda_c) const {
    RgsfBasis copy = *this;
    copy.set_cutoff(lambda_c);
    return copy;
  }

  const BeltRegion& belt() const { return belt_; }
  int n_max() const { return index_.n_max(); }
  const IndexMap& index() const { return index_; }
  std::size_t size() const { return index_.size(); }
  const std::vector<ConcentrationBlock>& blocks() const { return blocks_; }
  const ConcentrationBlock& block(int mu, int m) const { return blocks_[index_.block_id(mu, m)]; }

  /// Concentrations in RGSF flat order.
  const RVec& concentrations() const { return lambda_; }
  /// 1 - concentrations, evaluated directly on R^c.
  const RVec& complements() const { return complement_; }
  const std::vector<std::size_t>& global_order() const { return global_order_; }

  double lambda_c() const { return lambda_c_; }
  /// Flat RGSF positions with lambda >= lambda_c, ascending.
  const std::vector<std::size_t>& kept() const { return kept_; }
  std::size_t kept_count() const { return kept_.size(); }
  std::size_t truncated_count() const { return size() - kept_.size(); }
  bool is_kept(std::size_t flat) const { return lambda_(static_cast<Eigen::Index>(flat)) >= lambda_c_; }

private:
  BeltRegion belt_;
  IndexMap index_;
  std::vector<ConcentrationBlock> blocks_;
  RVec lambda_;
  RVec complement_;
  std::vector<std::size_t> global_order_;
  double lambda_c_ = 0.5;
  std::vector<std::size_t> kept_;
};

inline RgsfBasis build_basis(const BeltRegion& belt, int n_max, double lambda_c) {
  belt.validate();
  if (!(lambda_c > 0.0 && lambda_c < 1.0)) {
    throw ParameterError("lambda_c must lie in (0, 1), got " + std::to_string(lambda_c));
  }
  const IndexMap index(n_max);
  std::vector<ConcentrationBlock> blocks;
  blocks.reserve(index.block_count());
  for (std::size_t b = 0; b < index.block_count(); ++b) {
    const auto [mu, m] = index.block_orders(b);
    blocks.push_back(build_concentration_block(mu, m, belt, n_max));
  }
  return RgsfBasis(belt, n_max, std::move(blocks), lambda_c);
}

/// g_i^{mu m}(alpha, beta, gamma) for the block's rank-i function (0-based).
inline cplx evaluate_rgsf(const RgsfBasis& basis, int mu, int m, int rank, double alpha, double beta,
                          double gamma) {
  const auto& blk = basis.block(mu, m);
  if (rank < 0 || static_cast<std::size_t>(rank) >= blk.dim()) {
    throw IndexError("RGSF rank " + std::to_string(rank) + " out of range for block (" + std::to_string(mu) +
                     ", " + std::to_string(m) + ")");
  }
  const auto d = wigner_d_column(mu, m, basis.n_max(), beta);
  double s = 0.0;
  for (std::size_t k = 0; k < d.size(); ++k) s += blk.eigenvectors(static_cast<Eigen::Index>(k), rank) * d[k];
  const double phase = -(mu * alpha + m * gamma);
  return (s / kTwoPi) * cplx(std::cos(phase), std::sin(phase));
}

namespace detail {
inline void check_length(const RgsfBasis& basis, Eigen::Index len, const char* what) {
  if (static_cast<std::size_t>(len) != basis.size()) {
    throw ShapeError(std::string(what) + " has length " + std::to_string(len) + ", expected " +
                     std::to_string(basis.size()));
  }
}
}  // namespace detail

/// U a: per-block eigenvector transpose, no concentration scaling.
inline CVec to_rgsf_unscaled(const RgsfBasis& basis, const CVec& a) {
  detail::check_length(basis, a.size(), "Wigner-D coefficient vector");
  CVec out(a.size());
  const auto& index = basis.index();
  for (std::size_t b = 0; b < index.block_count(); ++b) {
    const auto off = static_cast<Eigen::Index>(index.block_offset(b));
    const auto dim = static_cast<Eigen::Index>(index.block_dim(b));
    out.segment(off, dim) = basis.blocks()[b].eigenvectors.transpose().cast<cplx>() * a.segment(off, dim);
  }
  return out;
}

/// a' = sqrt(Lambda) U a.
inline CVec to_rgsf_coeffs(const RgsfBasis& basis, const CVec& a) {
  CVec out = to_rgsf_unscaled(basis, a);
  for (Eigen::Index k = 0; k < out.size(); ++k) out(k) *= std::sqrt(basis.concentrations()(k));
  return out;
}

/// a = U^* Lambda^{-1/2} a'.
inline CVec from_rgsf_coeffs(const RgsfBasis& basis, const CVec& a_prime) {
  detail::check_length(basis, a_prime.size(), "RGSF coefficient vector");
  const auto& lambda = basis.concentrations();
  CVec scaled(a_prime.size());
  for (Eigen::Index k = 0; k < a_prime.size(); ++k) {
    const bool needed = a_prime(k) != cplx(0.0) || basis.is_kept(static_cast<std::size_t>(k));
    if (needed && !(lambda(k) > 0.0)) {
      throw NumericError("non-positive concentration at RGSF index " + std::to_string(k));
    }
    scaled(k) = a_prime(k) == cplx(0.0) ? cplx(0.0) : a_prime(k) / std::sqrt(lambda(k));
  }
  CVec out(a_prime.size());
  const auto& index = basis.index();
  for (std::size_t b = 0; b < index.block_count(); ++b) {
    const auto off = static_cast<Eigen::Index>(index.block_offset(b));
    const auto dim = static_cast<Eigen::Index>(index.block_dim(b));
    out.segment(off, dim) = basis.blocks()[b].eigenvectors.cast<cplx>() * scaled.segment(off, dim);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sparsity bounds

/// Count of RGSFs (equivalently Wigner D-functions) with |m|, |mu| <= m_max.
inline std::int64_t sparsity_bound_bounded_orders(int n_max, int m_max) {
  if (n_max < 0 || m_max < 0 || m_max > n_max) {
    throw ParameterError("need 0 <= m_max <= n_max, got m_max=" + std::to_string(m_max) + ", n_max=" +
                         std::to_string(n_max));
  }
  const std::int64_t q = m_max;
  const std::int64_t n = n_max;
  return (q + 1) * (2 * q + 1) * (2 * q + 3) / 3 + (n - q) * (2 * q + 1) * (2 * q + 1);
}

/// The k-sparse bound exactly as the closed form reads; can go negative for
/// small k.
inline std::int64_t sparsity_bound_k_sparse_formula(int n_max, std::int64_t k) {
  const auto side = static_cast<std::int64_t>(std::floor(std::sqrt(static_cast<double>(k))));
  const std::int64_t m_max = (side % 2 == 1) ? (side - 1) / 2 : side / 2;
  const std::int64_t n_m = sparsity_bound_bounded_orders(n_max, static_cast<int>(std::min<std::int64_t>(m_max, n_max)));
  return n_m + (k - n_m) * (n_max - m_max - 1);
}

/// Worst case: the k largest (mu, m) block dimensions summed.
inline std::int64_t greedy_block_sparsity(int n_max, std::int64_t k) {
  const IndexMap index(n_max);
  std::vector<std::int64_t> dims;
  dims.reserve(index.block_count());
  for (std::size_t b = 0; b < index.block_count(); ++b) dims.push_back(static_cast<std::int64_t>(index.block_dim(b)));
  std::sort(dims.begin(), dims.end(), std::greater<>());
  const auto take = static_cast<std::size_t>(std::min<std::int64_t>(k, static_cast<std::int64_t>(dims.size())));
  return std::accumulate(dims.begin(), dims.begin() + static_cast<std::ptrdiff_t>(take), std::int64_t{0});
}

/// Bound on the sparsity of a' for a k-sparse a: the closed form, clamped
/// below by the greedy worst case so it stays a valid bound for every k.
inline std::int64_t sparsity_bound_k_sparse(int n_max, std::int64_t k) {
  const std::int64_t limit = static_cast<std::int64_t>(2 * n_max + 1) * (2 * n_max + 1) - 1;
  if (k < 1 || k > limit) {
    throw ParameterError("k must lie in [1, " + std::to_string(limit) + "], got " + std::to_string(k));
  }
  return std::max(sparsity_bound_k_sparse_formula(n_max, k), greedy_block_sparsity(n_max, k));
}

}  // namespace rgsf
