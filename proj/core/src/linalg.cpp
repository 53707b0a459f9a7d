#include "cat/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cat/error.hpp"

namespace cat {

namespace {

constexpr int kMaxSweeps = 100;
constexpr double kRelativeOffTolerance = 1e-12;

double off_diagonal_norm(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

// Zeroes a(p,q) with one rotation, applied to both sides of `a` and
// accumulated into the columns of `v`.
void rotate(Matrix& a, Matrix& v, std::size_t p, std::size_t q) {
  const double apq = a(p, q);
  const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
  const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
  const double c = 1.0 / std::sqrt(t * t + 1.0);
  const double s = t * c;
  const std::size_t n = a.rows();
  for (std::size_t r = 0; r < n; ++r) {
    if (r == p || r == q) continue;
    const double arp = a(r, p);
    const double arq = a(r, q);
    a(r, p) = a(p, r) = c * arp - s * arq;
    a(r, q) = a(q, r) = s * arp + c * arq;
  }
  a(p, p) -= t * apq;
  a(q, q) += t * apq;
  a(p, q) = a(q, p) = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const double vrp = v(r, p);
    const double vrq = v(r, q);
    v(r, p) = c * vrp - s * vrq;
    v(r, q) = s * vrp + c * vrq;
  }
}

}  // namespace

SymmetricEigen jacobi_eigen(const Matrix& m) {
  if (m.rows() != m.cols()) fail(ErrorKind::dimension, "eigendecomposition of a non-square matrix");
  const std::size_t n = m.rows();
  Matrix a = m;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) a(i, j) = a(j, i) = 0.5 * (m(i, j) + m(j, i));
  Matrix v = Matrix::identity(n);
  const double threshold = kRelativeOffTolerance * frobenius_norm(a);

  int sweeps = 0;
  while (off_diagonal_norm(a) > threshold) {
    if (sweeps == kMaxSweeps) {
      fail(ErrorKind::numeric, "Jacobi eigensolver did not converge in " +
                                   std::to_string(kMaxSweeps) + " sweeps");
    }
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q)
        if (a(p, q) != 0.0) rotate(a, v, p, q);
    ++sweeps;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });
  SymmetricEigen out;
  out.sweeps = sweeps;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = a(order[j], order[j]);
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, j) = v(r, order[j]);
  }
  return out;
}

Matrix sqrtm_psd(const Matrix& m) {
  if (m.rows() != m.cols()) fail(ErrorKind::dimension, "sqrtm of a non-square matrix");
  const double scale = std::max(1.0, frobenius_norm(m));
  if (asymmetry(m) > 1e-9 * scale) fail(ErrorKind::domain, "sqrtm_psd input is not symmetric");
  const std::size_t n = m.rows();
  if (n == 0) return m;
  const SymmetricEigen eig = jacobi_eigen(m);
  const double largest = std::max(0.0, eig.values.back());
  std::vector<double> roots(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double lambda = eig.values[j];
    if (lambda < -1e-8 * largest || (largest == 0.0 && lambda < 0.0)) {
      fail(ErrorKind::numeric, "matrix is not positive semidefinite (eigenvalue " +
                                   std::to_string(lambda) + ")");
    }
    roots[j] = std::sqrt(std::max(0.0, lambda));
  }
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = i; k < n; ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += eig.vectors(i, j) * roots[j] * eig.vectors(k, j);
      out(i, k) = out(k, i) = s;
    }
  }
  return out;
}

}  // namespace cat
