#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "ptycho/block_vector.hpp"
#include "ptycho/linalg.hpp"
#include "ptycho/optimizer.hpp"

namespace ptycho {

/// A family of Hermitian PSD measurement operators Q_j, exposed only through
/// the two reductions the amplitude loss needs: the quadratic values
/// z* Q_j z for all j, and the weighted sum  sum_j c_j Q_j z. Implementations
/// also supply an upper bound on |sum_j Q_j| for step-size selection.
class QuadraticOperatorFamily {
 public:
  virtual ~QuadraticOperatorFamily() = default;

  virtual std::size_t count() const = 0;
  virtual std::vector<double> quad_values(const BlockVector& z) const = 0;
  virtual BlockVector weighted_backproject(const BlockVector& z, std::span<const double> c) const = 0;
  virtual double sum_norm_bound() const = 0;

  /// sum_j coeff(j, z* Q_j z) Q_j z. Equivalent to quad_values followed by
  /// weighted_backproject; implementations may share the forward pass
  /// between the two, which must not change the result in any bit.
  using CoefficientFn = std::function<double(std::size_t, double)>;
  virtual BlockVector coefficient_backproject(const BlockVector& z, const CoefficientFn& coeff) const;
};

/// Explicit dense operators; for small instances and oracle-style checks.
/// The spectral-norm bound is computed from the assembled sum, gated to
/// total dimension <= 4096.
class DenseQuadraticFamily final : public QuadraticOperatorFamily {
 public:
  DenseQuadraticFamily(int blocks, int side, std::vector<DenseMatrix> ops);

  std::size_t count() const override { return ops_.size(); }
  std::vector<double> quad_values(const BlockVector& z) const override;
  BlockVector weighted_backproject(const BlockVector& z, std::span<const double> c) const override;
  double sum_norm_bound() const override;

  const DenseMatrix& op(std::size_t j) const { return ops_[j]; }

 private:
  int blocks_;
  int side_;
  std::vector<DenseMatrix> ops_;
};

/// Weights of the regularized amplitude objective
///   J(z) = L_eps(z) + alpha_t |z|^2 + alpha_s * smoothness(z; kappa).
struct RegularizerWeights {
  double eps = 1e-8;
  double alpha_t = 0.0;
  double alpha_s = 0.0;
  std::vector<double> kappa;  // blocks-1 positive entries; empty means all ones

  void validate(int blocks) const;
  std::vector<double> resolved_kappa(int blocks) const;
};

/// The tridiagonal inter-block coupling matrix behind the smoothness
/// penalty sum_l kappa_l |z_{l+1} - z_l|^2, with its cached spectral norm.
class SmoothnessCoupling {
 public:
  SmoothnessCoupling(std::vector<double> kappa, int blocks);

  int blocks() const { return blocks_; }
  double entry(int i, int j) const;
  const std::vector<double>& kappa() const { return kappa_; }
  double spectral_norm() const { return spectral_norm_; }

  /// out block l = sum_{l'} K(l,l') z_{l'}
  BlockVector apply(const BlockVector& z) const;

 private:
  int blocks_;
  std::vector<double> kappa_;
  double spectral_norm_;
};

/// Spectral norm of the coupling matrix for the given weights.
double coupling_norm(const std::vector<double>& kappa, int blocks);

// --- amplitude loss and regularizers ---------------------------------------

/// L_eps(z) = sum_j [ sqrt(z* Q_j z + eps) - sqrt(y_j + eps) ]^2
double amplitude_loss(const QuadraticOperatorFamily& ops, const BlockVector& z,
                      std::span<const double> y, double eps);

/// Wirtinger gradient of amplitude_loss:
///   sum_j [ 1 - sqrt(y_j + eps)/sqrt(z* Q_j z + eps) ] Q_j z.
BlockVector amplitude_loss_grad(const QuadraticOperatorFamily& ops, const BlockVector& z,
                                std::span<const double> y, double eps);

double tikhonov(const BlockVector& z);
BlockVector tikhonov_grad(const BlockVector& z);

double smoothness(const BlockVector& z, const std::vector<double>& kappa);
BlockVector smoothness_grad(const BlockVector& z, const SmoothnessCoupling& coupling);

/// Upper bound on the Wirtinger-Hessian quadratic form of the regularized
/// objective: sum_norm_bound + alpha_t + alpha_s |K|.
double hessian_bound(const QuadraticOperatorFamily& ops, const RegularizerWeights& weights, int blocks);

/// The regularized amplitude objective as an optimizer-ready Objective.
class RegularizedObjective final : public Objective {
 public:
  RegularizedObjective(const QuadraticOperatorFamily& ops, std::vector<double> y,
                       RegularizerWeights weights, int blocks);

  double value(const BlockVector& z) const override;
  BlockVector wgrad(const BlockVector& z) const override;

  /// Data term alone, for trace columns.
  double data_loss(const BlockVector& z) const;
  double hessian_bound() const;

  const RegularizerWeights& weights() const { return weights_; }
  const SmoothnessCoupling& coupling() const { return coupling_; }
  std::span<const double> measurements() const { return y_; }

 private:
  const QuadraticOperatorFamily& ops_;
  std::vector<double> y_;
  RegularizerWeights weights_;
  SmoothnessCoupling coupling_;
};

}  // namespace ptycho
