#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ptycho/block_vector.hpp"

namespace ptycho {

/// Raised when a mathematical guarantee the caller is responsible for
/// (step-size bound, decrease inequality) fails at runtime.
struct ContractViolation : std::runtime_error {
  explicit ContractViolation(const std::string& what) : std::runtime_error(what) {}
};

/// A real-valued objective of a complex block vector together with its
/// Wirtinger gradient (conjugate of the z-derivative). For real f the
/// directional derivative of t -> f(z + t u) at 0 equals 2 Re<wgrad(z), u>.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual double value(const BlockVector& z) const = 0;
  virtual BlockVector wgrad(const BlockVector& z) const = 0;
};

/// Step-size selection rule for gradient descent. `base` is the safe
/// constant step (1/B for a Hessian bound B). With backtracking enabled the
/// search starts at base * tau^-depth and shrinks by tau, so the accepted
/// step always lies in [base, base * tau^-depth].
struct StepRule {
  double base = 1.0;       // mu_c
  bool backtrack = false;  // false: constant step
  double tau = 0.5;        // decrease factor, in (0,1)
  int depth = 0;           // N: number of enlargement levels above base

  static StepRule constant(double mu_c) { return {mu_c, false, 0.5, 0}; }
  static StepRule armijo(double mu_c, double tau, int depth) { return {mu_c, true, tau, depth}; }

  void validate() const {
    if (!(base > 0.0)) throw std::invalid_argument("StepRule: base step must be > 0");
    if (backtrack && !(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("StepRule: tau must be in (0,1)");
    if (backtrack && depth < 0) throw std::invalid_argument("StepRule: depth must be >= 0");
  }
};

struct StepRecord {
  int step = 0;          // t, 1-based
  double value = 0.0;    // f(z^t), after the update
  double grad_sq = 0.0;  // |grad f(z^{t-1})|^2, before the update
  double mu = 0.0;       // accepted step size
  int trials = 0;        // line-search evaluations (0 for the constant rule)
};

struct DescentTrace {
  double initial_value = 0.0;  // f(z^0)
  std::vector<StepRecord> steps;
};

struct AgaResult {
  double mu = 0.0;
  int trials = 0;
};

/// Backtracking search for the largest step in {mu_c tau^(j-depth)} that
/// satisfies the sufficient-decrease condition
///   f(z - mu g) - f(z) <= -mu |g|^2.
/// `g` must be obj.wgrad(z). If mu_c <= 1/B for the objective's Hessian
/// bound B, trial depth (step mu_c) always succeeds; exhausting all
/// depth+1 trials means that precondition was violated and raises
/// ContractViolation.
AgaResult aga_select(const Objective& obj, const BlockVector& z, const BlockVector& g, double mu_c,
                     double tau, int depth);

/// Called after every accepted step with the record and the new iterate.
using StepObserver = std::function<void(const StepRecord&, const BlockVector&)>;

struct DescentResult {
  BlockVector point;
  DescentTrace trace;
};

/// Gradient descent z^t = z^{t-1} - mu_t wgrad(z^{t-1}) for a fixed number
/// of steps. Aborts on non-finite objective or gradient values. A positive
/// `stop_grad_sq` ends the run before a step whose squared gradient norm is
/// already at or below it; the default keeps the fixed budget.
DescentResult descend(const Objective& obj, const BlockVector& z0, int steps, const StepRule& rule,
                      const StepObserver& observer = {}, double stop_grad_sq = 0.0);

struct Certificate {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds() const { return lhs <= rhs; }
};

/// Stationarity certificate for a completed constant-step (or AGA) run:
/// the smallest recorded squared gradient norm is at most
/// f(z^0) / (mu_c * (T+1)) where T+1 is the number of recorded steps.
Certificate min_grad_certificate(const DescentTrace& trace, double mu_c, double initial_value);

}  // namespace ptycho
