#pragma once

#include <vector>

namespace updm {

// Dense helpers on row-major buffers, sized for the project's 16x16 systems.

// Solves A * X = B for X, with A symmetric positive definite [n x n] and
// B [n x m]. Throws if the Cholesky factorization breaks down.
std::vector<double> cholesky_solve(const std::vector<double>& a, int n,
                                   const std::vector<double>& b, int m);

// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
// Eigenvalues are returned in descending order, eigenvectors as rows of
// `vectors` (row i pairs with eigenvalue i), deterministically signed so the
// largest-magnitude component of each vector is positive.
void jacobi_eigen_sym(const std::vector<double>& a, int n, std::vector<double>& values,
                      std::vector<double>& vectors);

}  // namespace updm
