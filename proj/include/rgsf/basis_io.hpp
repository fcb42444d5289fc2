#pragma once

// RGSF1 basis cache.
//
// Layout (little-endian):
//   "RGSF1"                      5 bytes
//   u32 n_max, u32 block_count
//   f64 theta1, f64 theta2, f64 lambda_c
//   per block: i32 mu, i32 m, u32 dim, dim*dim f64 eigenvectors (row-major),
//              dim f64 eigenvalues
// The belt matrices and R^c complements are recomputed on load; both are
// deterministic functions of the header.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rgsf/errors.hpp"
#include "rgsf/hash.hpp"
#include "rgsf/slepian.hpp"

namespace rgsf {

static_assert(std::endian::native == std::endian::little, "basis cache I/O assumes a little-endian host");

inline constexpr char kBasisMagic[5] = {'R', 'G', 'S', 'F', '1'};

namespace detail {

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::ifstream& in, const std::string& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw IoError(path + ": truncated basis cache");
  return v;
}

}  // namespace detail

/// Key for the (n_max, theta1, theta2) triple; lambda_c is not part of it since
/// re-partitioning never touches the eigendecompositions.
inline std::string basis_cache_key(int n_max, const BeltRegion& belt) {
  Fnv1a h;
  const std::int32_t n = n_max;
  h.update(&n, sizeof n).update(&belt.theta1, sizeof(double)).update(&belt.theta2, sizeof(double));
  return "rgsf_n" + std::to_string(n_max) + "_" + h.hex();
}

inline nlohmann::json basis_sidecar(const RgsfBasis& basis) {
  return {{"format", "RGSF1"},
          {"n_max", basis.n_max()},
          {"block_count", basis.blocks().size()},
          {"eigenpairs", basis.size()},
          {"theta1", basis.belt().theta1},
          {"theta2", basis.belt().theta2},
          {"lambda_c", basis.lambda_c()},
          {"kept_count", basis.kept_count()},
          {"cache_key", basis_cache_key(basis.n_max(), basis.belt())}};
}

inline void write_basis(const RgsfBasis& basis, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(kBasisMagic, sizeof kBasisMagic);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(basis.n_max()));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(basis.blocks().size()));
  detail::put<double>(out, basis.belt().theta1);
  detail::put<double>(out, basis.belt().theta2);
  detail::put<double>(out, basis.lambda_c());
  for (const auto& blk : basis.blocks()) {
    const auto dim = static_cast<Eigen::Index>(blk.dim());
    detail::put<std::int32_t>(out, blk.mu);
    detail::put<std::int32_t>(out, blk.m);
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(dim));
    for (Eigen::Index r = 0; r < dim; ++r)
      for (Eigen::Index c = 0; c < dim; ++c) detail::put<double>(out, blk.eigenvectors(r, c));
    for (Eigen::Index k = 0; k < dim; ++k) detail::put<double>(out, blk.eigenvalues(k));
  }
  if (!out) throw IoError("write failed: " + path);
}

inline void write_basis_sidecar(const RgsfBasis& basis, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << basis_sidecar(basis).dump(2) << '\n';
}

inline RgsfBasis read_basis(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[5];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kBasisMagic, sizeof magic) != 0)
    throw IoError(path + ": not an RGSF1 basis cache");
  const auto n_max = static_cast<int>(detail::get<std::uint32_t>(in, path));
  const auto count = detail::get<std::uint32_t>(in, path);
  BeltRegion belt{detail::get<double>(in, path), detail::get<double>(in, path)};
  const double lambda_c = detail::get<double>(in, path);
  belt.validate();
  const IndexMap index(n_max);
  if (count != index.block_count()) throw IoError(path + ": block count does not match n_max");

  std::vector<ConcentrationBlock> blocks(count);
  for (std::uint32_t b = 0; b < count; ++b) {
    auto& blk = blocks[b];
    blk.mu = detail::get<std::int32_t>(in, path);
    blk.m = detail::get<std::int32_t>(in, path);
    const auto dim = static_cast<Eigen::Index>(detail::get<std::uint32_t>(in, path));
    if (index.block_id(blk.mu, blk.m) != b || static_cast<std::size_t>(dim) != index.block_dim(b))
      throw IoError(path + ": block record out of order or wrong size");
    blk.n_min = IndexMap::n_min(blk.mu, blk.m);
    blk.eigenvectors.resize(dim, dim);
    for (Eigen::Index r = 0; r < dim; ++r)
      for (Eigen::Index c = 0; c < dim; ++c) blk.eigenvectors(r, c) = detail::get<double>(in, path);
    blk.eigenvalues.resize(dim);
    for (Eigen::Index k = 0; k < dim; ++k) blk.eigenvalues(k) = detail::get<double>(in, path);
    const RMat samples = detail::weighted_d_samples(blk.mu, blk.m, n_max, detail::belt_rule(belt, n_max));
    blk.matrix = samples * samples.transpose();
    blk.matrix = 0.5 * (blk.matrix + blk.matrix.transpose()).eval();
    refresh_complements(blk, belt, n_max);
  }
  return RgsfBasis(belt, n_max, std::move(blocks), lambda_c);
}

}  // namespace rgsf
