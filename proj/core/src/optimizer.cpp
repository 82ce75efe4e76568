#include "ptycho/optimizer.hpp"

#include <cmath>
#include <sstream>

namespace ptycho {

namespace {

struct TrialOutcome {
  double mu = 0.0;
  int trials = 0;
  BlockVector point;
  double value = 0.0;
};

// Core of the backtracking search; takes the already-known f(z) so the
// descent loop never re-evaluates the current objective value.
TrialOutcome run_backtracking(const Objective& obj, const BlockVector& z, const BlockVector& g,
                              double f_z, double grad_sq, double mu_c, double tau, int depth) {
  for (int j = 0; j <= depth; ++j) {
    // Trial j tests mu_c * tau^(j-depth); j == depth lands on mu_c exactly.
    const double mu = mu_c * std::pow(tau, static_cast<double>(j - depth));
    BlockVector candidate = z;
    candidate.axpy(cplx(-mu, 0.0), g);
    const double f_candidate = obj.value(candidate);
    if (f_candidate - f_z <= -mu * grad_sq) {
      return {mu, j + 1, std::move(candidate), f_candidate};
    }
  }
  std::ostringstream msg;
  msg << "backtracking exhausted after " << (depth + 1) << " trials; final trial step " << mu_c
      << " failed the decrease condition (base step exceeds 1/B?)";
  throw ContractViolation(msg.str());
}

}  // namespace

AgaResult aga_select(const Objective& obj, const BlockVector& z, const BlockVector& g, double mu_c,
                     double tau, int depth) {
  StepRule rule = StepRule::armijo(mu_c, tau, depth);
  rule.validate();
  const double f_z = obj.value(z);
  const double grad_sq = g.norm_sq();
  TrialOutcome out = run_backtracking(obj, z, g, f_z, grad_sq, mu_c, tau, depth);
  return {out.mu, out.trials};
}

DescentResult descend(const Objective& obj, const BlockVector& z0, int steps, const StepRule& rule,
                      const StepObserver& observer, double stop_grad_sq) {
  rule.validate();
  if (steps < 0) throw std::invalid_argument("descend: steps must be >= 0");

  DescentResult result;
  result.point = z0;
  result.trace.initial_value = obj.value(z0);
  if (!std::isfinite(result.trace.initial_value))
    throw std::runtime_error("descend: objective is non-finite at the starting point");
  result.trace.steps.reserve(steps);

  double f_current = result.trace.initial_value;
  for (int t = 1; t <= steps; ++t) {
    BlockVector g = obj.wgrad(result.point);
    if (!g.all_finite()) {
      std::ostringstream msg;
      msg << "descend: non-finite gradient at step " << t;
      throw std::runtime_error(msg.str());
    }
    const double grad_sq = g.norm_sq();
    if (stop_grad_sq > 0.0 && grad_sq <= stop_grad_sq) break;

    StepRecord rec;
    rec.step = t;
    rec.grad_sq = grad_sq;

    if (rule.backtrack) {
      TrialOutcome out = run_backtracking(obj, result.point, g, f_current, grad_sq, rule.base,
                                          rule.tau, rule.depth);
      rec.mu = out.mu;
      rec.trials = out.trials;
      result.point = std::move(out.point);
      f_current = out.value;
    } else {
      rec.mu = rule.base;
      rec.trials = 0;
      result.point.axpy(cplx(-rule.base, 0.0), g);
      f_current = obj.value(result.point);
    }

    if (!std::isfinite(f_current)) {
      std::ostringstream msg;
      msg << "descend: non-finite objective value after step " << t;
      throw std::runtime_error(msg.str());
    }
    rec.value = f_current;
    result.trace.steps.push_back(rec);
    if (observer) observer(rec, result.point);
  }
  return result;
}

Certificate min_grad_certificate(const DescentTrace& trace, double mu_c, double initial_value) {
  if (trace.steps.empty()) throw std::invalid_argument("min_grad_certificate: empty trace");
  if (!(mu_c > 0.0)) throw std::invalid_argument("min_grad_certificate: mu_c must be > 0");
  double lhs = trace.steps.front().grad_sq;
  for (const auto& rec : trace.steps) lhs = std::min(lhs, rec.grad_sq);
  const double rhs = initial_value / (mu_c * static_cast<double>(trace.steps.size()));
  return {lhs, rhs};
}

}  // namespace ptycho
