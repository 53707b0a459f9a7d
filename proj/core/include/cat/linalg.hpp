#pragma once

#include <vector>

#include "cat/matrix.hpp"

namespace cat {

struct SymmetricEigen {
  std::vector<double> values;  // ascending
  Matrix vectors;              // column j is the eigenvector of values[j]
  int sweeps = 0;
};

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm falls below
/// 1e-12 * ||m||_F, at most 100 sweeps.
SymmetricEigen jacobi_eigen(const Matrix& m);

/// Principal square root of a symmetric PSD matrix. Eigenvalues down to
/// -1e-8 * lambda_max are clamped to zero; anything more negative throws.
Matrix sqrtm_psd(const Matrix& m);

}  // namespace cat
