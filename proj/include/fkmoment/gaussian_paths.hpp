#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/Core>

#include "fkmoment/errors.hpp"
#include "fkmoment/kernels.hpp"
#include "fkmoment/random.hpp"

namespace fkmoment {

/// Values of a d-dimensional Brownian motion started at `start`, observed at
/// `times` (any order). Values are stored row-major, one row per time.
struct PathValues {
  Point start;
  std::vector<double> times;
  std::vector<double> values;
  /// order[k] is the index of the k-th smallest time.
  std::vector<std::size_t> order;

  std::size_t dim() const noexcept { return start.size(); }
  std::size_t size() const noexcept { return times.size(); }
  std::span<const double> at(std::size_t j) const { return {values.data() + j * dim(), dim()}; }
};

/// Samples B at the given times: sort, draw independent N(0, gap) increments
/// per coordinate, accumulate, and write back in the caller's order.
inline PathValues sample_brownian_at(std::span<const double> times, std::span<const double> start, Stream& rng) {
  if (start.empty()) throw std::invalid_argument("Brownian start point must have positive dimension");
  const std::size_t d = start.size();
  const std::size_t n = times.size();
  PathValues out;
  out.start.assign(start.begin(), start.end());
  out.times.assign(times.begin(), times.end());
  out.values.resize(n * d);
  out.order.resize(n);
  for (double t : times)
    if (t < 0.0) throw std::domain_error("Brownian motion queried at a negative time");
  std::iota(out.order.begin(), out.order.end(), std::size_t{0});
  std::stable_sort(out.order.begin(), out.order.end(), [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });
  Point current(start.begin(), start.end());
  double previous = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = out.order[k];
    const double gap = times[j] - previous;
    if (gap > 0.0) {
      const double sd = std::sqrt(gap);
      for (std::size_t c = 0; c < d; ++c) current[c] += sd * rng.normal();
    }
    std::copy(current.begin(), current.end(), out.values.begin() + static_cast<std::ptrdiff_t>(j * d));
    previous = times[j];
  }
  return out;
}

/// Per-coordinate covariance of Z_j = W1(t_j) - W2(s_j) for independent
/// Brownian motions W1, W2 from the origin:
///   Sigma_jk = min(t_j, t_k) + min(s_j, s_k).
/// Rows follow the (t, s) pairs in lexicographic order, which makes every
/// symmetric functional of Z exactly invariant under joint permutations.
class DifferenceCovariance {
 public:
  DifferenceCovariance(std::span<const double> t_times, std::span<const double> s_times) {
    if (t_times.size() != s_times.size()) throw std::invalid_argument("time lists must have equal length");
    if (t_times.empty()) throw std::invalid_argument("difference covariance needs at least one time pair");
    const std::size_t n = t_times.size();
    pairs_.resize(n);
    for (std::size_t j = 0; j < n; ++j) pairs_[j] = {t_times[j], s_times[j]};
    std::sort(pairs_.begin(), pairs_.end());
    matrix_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k)
        matrix_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) =
            std::min(pairs_[j].first, pairs_[k].first) + std::min(pairs_[j].second, pairs_[k].second);
  }

  std::size_t size() const noexcept { return pairs_.size(); }
  const Eigen::MatrixXd& matrix() const noexcept { return matrix_; }
  double operator()(std::size_t j, std::size_t k) const {
    return matrix_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
  }

 private:
  std::vector<std::pair<double, double>> pairs_;
  Eigen::MatrixXd matrix_;
};

inline DifferenceCovariance difference_covariance(std::span<const double> t_times, std::span<const double> s_times) {
  return {t_times, s_times};
}

namespace detail {

// E[prod_j p_h(o + Z_j)] for Z ~ N(0, Sigma) in each of d coordinates:
//   (2 pi h)^(-nd/2) det(I + Sigma/h)^(-d/2) exp(-|o|^2 1'(hI + Sigma)^(-1) 1 / 2).
// One Cholesky factor of hI + Sigma (+ jitter) gives both the determinant and
// the quadratic form. Works for fixed-size and dynamic Eigen matrices.
template <class Matrix>
double gaussian_product_from_covariance(Matrix m, double h, std::size_t d, double offset_sq) {
  const Eigen::Index n = m.rows();
  const double jitter = 1e-12 * m.trace() / static_cast<double>(n);
  for (Eigen::Index j = 0; j < n; ++j) m(j, j) += h + jitter;
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) throw NumericError("Cholesky factorization of the difference covariance failed");
  const auto& lower = llt.matrixL();
  double log_det = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) log_det += 2.0 * std::log(llt.matrixLLT()(j, j));
  double quad = 0.0;
  if (offset_sq != 0.0) {
    using Vector = Eigen::Matrix<double, Matrix::RowsAtCompileTime, 1>;
    Vector ones = Vector::Ones(n);
    lower.solveInPlace(ones);
    quad = ones.squaredNorm();
  }
  const double nd = static_cast<double>(n) * static_cast<double>(d);
  const double dd = static_cast<double>(d);
  // log det(I + Sigma/h) = log det(hI + Sigma) - n log h
  const double log_val = -0.5 * nd * std::log(2.0 * std::numbers::pi * h) -
                         0.5 * dd * (log_det - static_cast<double>(n) * std::log(h)) - 0.5 * offset_sq * quad;
  return std::exp(log_val);
}

}  // namespace detail

/// E[prod_j p_h(offset + Z_j)] with Z distributed per `sigma` in every coordinate.
inline double gaussian_product_expectation(const DifferenceCovariance& sigma, double h, std::size_t d,
                                           std::span<const double> offset) {
  if (!(h > 0.0)) throw std::invalid_argument("heat kernel bandwidth must be positive");
  if (offset.size() != d) throw std::invalid_argument("offset dimension mismatch");
  return detail::gaussian_product_from_covariance<Eigen::MatrixXd>(sigma.matrix(), h, d, squared_norm(offset));
}

}  // namespace fkmoment
