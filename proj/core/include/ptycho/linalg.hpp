#pragma once

#include <complex>
#include <vector>

#include "ptycho/block_vector.hpp"

namespace ptycho {

/// Dense row-major complex matrix, just enough for the small dense paths
/// (oracle assembly, spectral norms). Not a general linear algebra type.
struct DenseMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<cplx> a;

  DenseMatrix() = default;
  DenseMatrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, cplx(0.0, 0.0)) {}

  cplx& at(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
  const cplx& at(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }
};

DenseMatrix matmul(const DenseMatrix& x, const DenseMatrix& y);
DenseMatrix adjoint(const DenseMatrix& x);

/// Largest eigenvalue of a Hermitian PSD matrix by power iteration.
/// The matrix is squared twice first so the iteration converges at the
/// fourth power of the spectral gap; the result is accurate to ~1e-10
/// relative on the instances this library builds.
double hermitian_max_eigenvalue(const DenseMatrix& h);

/// Spectral norm (largest singular value) of a general dense matrix,
/// computed as sqrt(lambda_max(A* A)).
double spectral_norm(const DenseMatrix& m);

/// Eigenvalues of a small real symmetric matrix (row-major, dim x dim)
/// via cyclic Jacobi sweeps. Returns the full spectrum, unsorted.
std::vector<double> symmetric_eigenvalues(std::vector<double> mat, int dim);

}  // namespace ptycho
