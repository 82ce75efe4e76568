#include "ptycho/linalg.hpp"

#include <cmath>
#include <stdexcept>

namespace ptycho {

DenseMatrix matmul(const DenseMatrix& x, const DenseMatrix& y) {
  if (x.cols != y.rows) throw std::invalid_argument("matmul: dimension mismatch");
  DenseMatrix out(x.rows, y.cols);
  for (int i = 0; i < x.rows; ++i) {
    for (int k = 0; k < x.cols; ++k) {
      const cplx xik = x.at(i, k);
      if (xik == cplx(0.0, 0.0)) continue;
      const cplx* yrow = &y.a[static_cast<std::size_t>(k) * y.cols];
      cplx* orow = &out.a[static_cast<std::size_t>(i) * out.cols];
      for (int j = 0; j < y.cols; ++j) orow[j] += xik * yrow[j];
    }
  }
  return out;
}

DenseMatrix adjoint(const DenseMatrix& x) {
  DenseMatrix out(x.cols, x.rows);
  for (int i = 0; i < x.rows; ++i)
    for (int j = 0; j < x.cols; ++j) out.at(j, i) = std::conj(x.at(i, j));
  return out;
}

namespace {

void matvec(const DenseMatrix& m, const std::vector<cplx>& v, std::vector<cplx>& out) {
  out.assign(m.rows, cplx(0.0, 0.0));
  for (int i = 0; i < m.rows; ++i) {
    cplx acc(0.0, 0.0);
    const cplx* row = &m.a[static_cast<std::size_t>(i) * m.cols];
    for (int j = 0; j < m.cols; ++j) acc += row[j] * v[j];
    out[i] = acc;
  }
}

double vec_norm(const std::vector<cplx>& v) {
  double s = 0.0;
  for (const auto& e : v) s += std::norm(e);
  return std::sqrt(s);
}

}  // namespace

double hermitian_max_eigenvalue(const DenseMatrix& h) {
  if (h.rows != h.cols) throw std::invalid_argument("hermitian_max_eigenvalue: matrix not square");
  const int n = h.rows;
  if (n == 0) return 0.0;
  if (n == 1) return h.at(0, 0).real();

  // Two squarings: power iteration then sees (lambda2/lambda1)^4 per step.
  DenseMatrix h2 = matmul(h, h);
  DenseMatrix h4 = matmul(h2, h2);

  // Deterministic start vector with irrational-looking components so it is
  // never orthogonal to the top eigenspace on structured instances.
  std::vector<cplx> v(n), w;
  for (int i = 0; i < n; ++i) {
    v[i] = cplx(std::cos(0.7 * i + 0.3), std::sin(1.3 * i + 0.1));
  }
  double nv = vec_norm(v);
  for (auto& e : v) e /= nv;

  double prev = 0.0;
  for (int it = 0; it < 600; ++it) {
    matvec(h4, v, w);
    const double rayleigh4 = vec_norm(w);  // |H^4 v| with |v| = 1, converges to lambda^4
    if (rayleigh4 == 0.0) return 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) v[i] = w[i] / rayleigh4;
    const double lam = std::pow(rayleigh4, 0.25);
    if (it > 3 && std::abs(lam - prev) <= 1e-12 * std::max(1.0, lam)) return lam;
    prev = lam;
  }
  return prev;
}

double spectral_norm(const DenseMatrix& m) {
  DenseMatrix h = matmul(adjoint(m), m);
  return std::sqrt(std::max(0.0, hermitian_max_eigenvalue(h)));
}

std::vector<double> symmetric_eigenvalues(std::vector<double> mat, int dim) {
  if (dim == 0) return {};
  if (static_cast<std::size_t>(dim) * dim != mat.size())
    throw std::invalid_argument("symmetric_eigenvalues: size mismatch");
  auto at = [&](int i, int j) -> double& { return mat[static_cast<std::size_t>(i) * dim + j]; };

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < dim; ++i)
      for (int j = i + 1; j < dim; ++j) off += at(i, j) * at(i, j);
    if (off < 1e-30) break;

    for (int p = 0; p < dim; ++p) {
      for (int q = p + 1; q < dim; ++q) {
        const double apq = at(p, q);
        if (apq == 0.0) continue;
        const double theta = (at(q, q) - at(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < dim; ++k) {
          const double akp = at(k, p), akq = at(k, q);
          at(k, p) = c * akp - s * akq;
          at(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < dim; ++k) {
          const double apk = at(p, k), aqk = at(q, k);
          at(p, k) = c * apk - s * aqk;
          at(q, k) = s * apk + c * aqk;
        }
      }
    }
  }

  std::vector<double> eig(dim);
  for (int i = 0; i < dim; ++i) eig[i] = at(i, i);
  return eig;
}

}  // namespace ptycho
