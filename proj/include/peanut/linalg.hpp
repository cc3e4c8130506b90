#pragma once

#include "peanut/types.hpp"

#include <cmath>
#include <cstdint>
#include <random>

namespace peanut {

template <typename Derived>
typename Derived::RealScalar frobenius_norm(const Eigen::MatrixBase<Derived>& m) {
  return m.norm();
}

template <typename Derived>
typename Derived::RealScalar squared_frobenius_norm(const Eigen::MatrixBase<Derived>& m) {
  return m.squaredNorm();
}

/// ||C C^T||_F computed as ||C^T C||_F; the two Grams share their nonzero spectrum.
template <typename Derived>
typename Derived::RealScalar gram_frobenius_norm(const Eigen::MatrixBase<Derived>& c) {
  if (c.size() == 0) return 0;
  if (c.cols() <= c.rows()) return (c.transpose() * c).norm();
  return (c * c.transpose()).norm();
}

template <typename Scalar>
struct EigenResult {
  VectorX<Scalar> vector;
  Scalar value = 0;
  Index iterations = 0;
  bool converged = false;
};

struct PowerIterationOptions {
  double tol = 1e-10;
  Index max_iter = 1000;
  std::uint64_t jitter_seed = 0x9e3779b97f4a7c15ULL;
  double jitter = 1e-6;
};

namespace detail {

// Power iteration on v -> Z (Z^T v) from a given start vector. Returns the
// last iterate; `converged` is set when ||ZZ^T u - lambda u|| <= tol * lambda.
template <typename Scalar, typename Apply>
EigenResult<Scalar> power_iterate(const Apply& apply, VectorX<Scalar> u, Scalar tol, Index max_iter,
                                  std::mt19937_64& rng, Scalar jitter) {
  EigenResult<Scalar> out;
  std::uniform_real_distribution<Scalar> unit(Scalar(-1), Scalar(1));
  auto rescue = [&](VectorX<Scalar>& v) {
    for (Index i = 0; i < v.size(); ++i) v(i) += jitter * unit(rng);
    v.normalize();
  };
  u.normalize();
  for (Index it = 1; it <= max_iter; ++it) {
    VectorX<Scalar> w = apply(u);
    const Scalar lambda = u.dot(w);
    const Scalar residual = (w - lambda * u).norm();
    out.iterations = it;
    out.vector = u;
    out.value = lambda;
    if (lambda > Scalar(0) && residual <= tol * lambda) {
      out.converged = true;
      return out;
    }
    const Scalar norm = w.norm();
    if (norm == Scalar(0) || !std::isfinite(norm)) {
      // Start collapsed into the null space of ZZ^T.
      rescue(u);
      continue;
    }
    u = w / norm;
  }
  return out;
}

}  // namespace detail

/// Dominant eigenpair of Z Z^T by power iteration, using the factored product
/// Z (Z^T v) when d < N. Starts from the normalized all-ones vector, then
/// confirms the result with a restart from a jittered copy of the converged
/// vector; the restart recovers the dominant eigenspace when the all-ones start
/// happened to be orthogonal to it.
template <typename Derived>
EigenResult<typename Derived::Scalar> dominant_eigenvector_gram(
    const Eigen::MatrixBase<Derived>& z, const PowerIterationOptions& opts = {}) {
  using Scalar = typename Derived::Scalar;
  require(opts.tol > 0, ErrorCode::InvalidArgument, "tolerance must be positive");
  require(opts.max_iter >= 1, ErrorCode::InvalidArgument, "max_iter must be at least 1");
  require(z.rows() > 0 && (z.array() != Scalar(0)).any(), ErrorCode::DegenerateEmbedding,
          "degenerate embedding: Z is all zero, the dominant eigenvector is undefined");

  const MatrixX<Scalar> zm = z;
  const Index n = zm.rows();
  const bool factored = zm.cols() < n;
  const MatrixX<Scalar> gram = factored ? MatrixX<Scalar>() : MatrixX<Scalar>(zm * zm.transpose());
  auto apply = [&](const VectorX<Scalar>& v) -> VectorX<Scalar> {
    if (factored) return zm * (zm.transpose() * v);
    return gram * v;
  };

  std::mt19937_64 rng(opts.jitter_seed);
  const auto tol = static_cast<Scalar>(opts.tol);
  const auto jitter = static_cast<Scalar>(opts.jitter);
  EigenResult<Scalar> first = detail::power_iterate<Scalar>(apply, VectorX<Scalar>::Ones(n), tol,
                                                            opts.max_iter, rng, jitter);
  if (n == 1) return first;

  std::uniform_real_distribution<Scalar> unit(Scalar(-1), Scalar(1));
  VectorX<Scalar> kick(n);
  for (Index i = 0; i < n; ++i) kick(i) = unit(rng);
  kick -= first.vector.dot(kick) * first.vector;
  if (kick.norm() > Scalar(0)) kick *= jitter / kick.norm();
  EigenResult<Scalar> second = detail::power_iterate<Scalar>(apply, first.vector + kick, tol,
                                                             opts.max_iter, rng, jitter);
  second.iterations += first.iterations;
  if (second.value >= first.value) return second;
  first.iterations = second.iterations;
  return first;
}

}  // namespace peanut
