#pragma once

#include <stdexcept>
#include <string>

namespace rgsf {

// Every library failure derives from rgsf::Error so callers (the CLI in
// particular) can map families of errors onto exit codes.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// (n, m, mu) outside |m| <= n, |mu| <= n <= n_max, or a bad block/rank.
class IndexError : public Error {
public:
  using Error::Error;
};

// Out-of-range scalar parameter (quadrature order, lambda_c, M = 0, ...).
class ParameterError : public Error {
public:
  using Error::Error;
};

// Vector/matrix dimensions that do not conform.
class ShapeError : public Error {
public:
  using Error::Error;
};

// Argument outside a function's mathematical domain (x <= 0 for Hankel, r <= 0).
class DomainError : public Error {
public:
  using Error::Error;
};

// Degenerate numerics: non-positive concentration, vanishing Hankel factor,
// all-zero reference field.
class NumericError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

// Input files that do not match the resolved run configuration.
class ConsistencyError : public Error {
public:
  using Error::Error;
};

}  // namespace rgsf
