#include "ptycho/objective.hpp"

#include <cmath>
#include <stdexcept>

namespace ptycho {

BlockVector QuadraticOperatorFamily::coefficient_backproject(const BlockVector& z,
                                                             const CoefficientFn& coeff) const {
  const std::vector<double> q = quad_values(z);
  std::vector<double> c(q.size());
  for (std::size_t j = 0; j < q.size(); ++j) c[j] = coeff(j, q[j]);
  return weighted_backproject(z, c);
}

// --- DenseQuadraticFamily ---------------------------------------------------

DenseQuadraticFamily::DenseQuadraticFamily(int blocks, int side, std::vector<DenseMatrix> ops)
    : blocks_(blocks), side_(side), ops_(std::move(ops)) {
  const int dim = blocks * side * side;
  if (dim > 4096) throw std::invalid_argument("DenseQuadraticFamily: dimension gated to <= 4096");
  for (const auto& q : ops_) {
    if (q.rows != dim || q.cols != dim)
      throw std::invalid_argument("DenseQuadraticFamily: operator dimension mismatch");
  }
}

std::vector<double> DenseQuadraticFamily::quad_values(const BlockVector& z) const {
  const int dim = static_cast<int>(z.size());
  std::vector<double> out(ops_.size(), 0.0);
  for (std::size_t j = 0; j < ops_.size(); ++j) {
    const DenseMatrix& q = ops_[j];
    KahanSum acc;
    for (int r = 0; r < dim; ++r) {
      cplx row(0.0, 0.0);
      const cplx* qr = &q.a[static_cast<std::size_t>(r) * dim];
      for (int c = 0; c < dim; ++c) row += qr[c] * z[c];
      acc.add((std::conj(z[r]) * row).real());
    }
    out[j] = acc.value();
  }
  return out;
}

BlockVector DenseQuadraticFamily::weighted_backproject(const BlockVector& z,
                                                       std::span<const double> c) const {
  if (c.size() != ops_.size())
    throw std::invalid_argument("weighted_backproject: coefficient count mismatch");
  const int dim = static_cast<int>(z.size());
  BlockVector out(blocks_, side_);
  for (std::size_t j = 0; j < ops_.size(); ++j) {
    if (c[j] == 0.0) continue;
    const DenseMatrix& q = ops_[j];
    for (int r = 0; r < dim; ++r) {
      cplx row(0.0, 0.0);
      const cplx* qr = &q.a[static_cast<std::size_t>(r) * dim];
      for (int col = 0; col < dim; ++col) row += qr[col] * z[col];
      out[r] += c[j] * row;
    }
  }
  return out;
}

double DenseQuadraticFamily::sum_norm_bound() const {
  if (ops_.empty()) return 0.0;
  const int dim = ops_.front().rows;
  DenseMatrix sum(dim, dim);
  for (const auto& q : ops_)
    for (std::size_t i = 0; i < q.a.size(); ++i) sum.a[i] += q.a[i];
  return hermitian_max_eigenvalue(sum);
}

// --- weights and coupling ----------------------------------------------------

void RegularizerWeights::validate(int blocks) const {
  if (!(eps > 0.0)) throw std::invalid_argument("RegularizerWeights: eps must be > 0");
  if (alpha_t < 0.0 || alpha_s < 0.0)
    throw std::invalid_argument("RegularizerWeights: weights must be >= 0");
  if (!kappa.empty() && static_cast<int>(kappa.size()) != blocks - 1)
    throw std::invalid_argument("RegularizerWeights: kappa must have blocks-1 entries");
  for (double k : kappa)
    if (!(k > 0.0)) throw std::invalid_argument("RegularizerWeights: kappa entries must be > 0");
}

std::vector<double> RegularizerWeights::resolved_kappa(int blocks) const {
  if (!kappa.empty()) return kappa;
  return std::vector<double>(std::max(0, blocks - 1), 1.0);
}

SmoothnessCoupling::SmoothnessCoupling(std::vector<double> kappa, int blocks)
    : blocks_(blocks), kappa_(std::move(kappa)) {
  if (blocks_ < 1) throw std::invalid_argument("SmoothnessCoupling: blocks must be >= 1");
  if (static_cast<int>(kappa_.size()) != blocks_ - 1)
    throw std::invalid_argument("SmoothnessCoupling: kappa must have blocks-1 entries");
  if (blocks_ == 1) {
    spectral_norm_ = 0.0;
    return;
  }
  std::vector<double> k(static_cast<std::size_t>(blocks_) * blocks_, 0.0);
  for (int i = 0; i < blocks_; ++i)
    for (int j = 0; j < blocks_; ++j) k[static_cast<std::size_t>(i) * blocks_ + j] = entry(i, j);
  double max_abs = 0.0;
  for (double e : symmetric_eigenvalues(std::move(k), blocks_)) max_abs = std::max(max_abs, std::abs(e));
  spectral_norm_ = max_abs;
}

double SmoothnessCoupling::entry(int i, int j) const {
  if (i == j) {
    double v = 0.0;
    if (i > 0) v += kappa_[i - 1];
    if (i < blocks_ - 1) v += kappa_[i];
    return v;
  }
  if (i == j + 1) return -kappa_[j];
  if (j == i + 1) return -kappa_[i];
  return 0.0;
}

BlockVector SmoothnessCoupling::apply(const BlockVector& z) const {
  if (z.blocks() != blocks_) throw std::invalid_argument("SmoothnessCoupling: block count mismatch");
  BlockVector out(z.blocks(), z.side());
  const std::size_t g = z.grid_size();
  for (int l = 0; l < blocks_; ++l) {
    auto dst = out.block(l);
    for (int lp = 0; lp < blocks_; ++lp) {
      const double klp = entry(l, lp);
      if (klp == 0.0) continue;
      auto src = z.block(lp);
      for (std::size_t i = 0; i < g; ++i) dst[i] += klp * src[i];
    }
  }
  return out;
}

double coupling_norm(const std::vector<double>& kappa, int blocks) {
  return SmoothnessCoupling(kappa, blocks).spectral_norm();
}

// --- loss pieces --------------------------------------------------------------

double amplitude_loss(const QuadraticOperatorFamily& ops, const BlockVector& z,
                      std::span<const double> y, double eps) {
  if (y.size() != ops.count()) throw std::invalid_argument("amplitude_loss: measurement count mismatch");
  const std::vector<double> q = ops.quad_values(z);
  KahanSum acc;
  for (std::size_t j = 0; j < q.size(); ++j) {
    const double r = std::sqrt(q[j] + eps) - std::sqrt(y[j] + eps);
    acc.add(r * r);
  }
  return acc.value();
}

BlockVector amplitude_loss_grad(const QuadraticOperatorFamily& ops, const BlockVector& z,
                                std::span<const double> y, double eps) {
  if (y.size() != ops.count())
    throw std::invalid_argument("amplitude_loss_grad: measurement count mismatch");
  return ops.coefficient_backproject(z, [&](std::size_t j, double q) {
    return 1.0 - std::sqrt(y[j] + eps) / std::sqrt(q + eps);
  });
}

double tikhonov(const BlockVector& z) { return z.norm_sq(); }

BlockVector tikhonov_grad(const BlockVector& z) { return z; }

double smoothness(const BlockVector& z, const std::vector<double>& kappa) {
  if (z.blocks() == 1) return 0.0;
  if (static_cast<int>(kappa.size()) != z.blocks() - 1)
    throw std::invalid_argument("smoothness: kappa must have blocks-1 entries");
  KahanSum acc;
  const std::size_t g = z.grid_size();
  for (int l = 0; l + 1 < z.blocks(); ++l) {
    auto a = z.block(l);
    auto b = z.block(l + 1);
    for (std::size_t i = 0; i < g; ++i) acc.add(kappa[l] * std::norm(b[i] - a[i]));
  }
  return acc.value();
}

BlockVector smoothness_grad(const BlockVector& z, const SmoothnessCoupling& coupling) {
  if (z.blocks() == 1) return BlockVector(z.blocks(), z.side());
  return coupling.apply(z);
}

double hessian_bound(const QuadraticOperatorFamily& ops, const RegularizerWeights& weights, int blocks) {
  weights.validate(blocks);
  const double alpha = weights.alpha_t + weights.alpha_s * coupling_norm(weights.resolved_kappa(blocks), blocks);
  return ops.sum_norm_bound() + alpha;
}

// --- RegularizedObjective ------------------------------------------------------

RegularizedObjective::RegularizedObjective(const QuadraticOperatorFamily& ops, std::vector<double> y,
                                           RegularizerWeights weights, int blocks)
    : ops_(ops),
      y_(std::move(y)),
      weights_(std::move(weights)),
      coupling_(weights_.resolved_kappa(blocks), blocks) {
  weights_.validate(blocks);
  if (y_.size() != ops_.count())
    throw std::invalid_argument("RegularizedObjective: measurement count mismatch");
}

double RegularizedObjective::value(const BlockVector& z) const {
  double v = amplitude_loss(ops_, z, y_, weights_.eps);
  if (weights_.alpha_t != 0.0) v += weights_.alpha_t * tikhonov(z);
  if (weights_.alpha_s != 0.0) v += weights_.alpha_s * smoothness(z, coupling_.kappa());
  return v;
}

BlockVector RegularizedObjective::wgrad(const BlockVector& z) const {
  BlockVector g = amplitude_loss_grad(ops_, z, y_, weights_.eps);
  if (weights_.alpha_t != 0.0) g.axpy(cplx(weights_.alpha_t, 0.0), z);
  if (weights_.alpha_s != 0.0) g.axpy(cplx(weights_.alpha_s, 0.0), coupling_.apply(z));
  return g;
}

double RegularizedObjective::data_loss(const BlockVector& z) const {
  return amplitude_loss(ops_, z, y_, weights_.eps);
}

double RegularizedObjective::hessian_bound() const {
  return ops_.sum_norm_bound() + weights_.alpha_t + weights_.alpha_s * coupling_.spectral_norm();
}

}  // namespace ptycho
