#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "ptycho/forward.hpp"
#include "ptycho/objective.hpp"
#include "ptycho/optimizer.hpp"

namespace ptycho {

/// Hyperparameters of the regularized amplitude-flow reconstructions.
/// alpha_* weight the object regularizers, beta_* the probe regularizers;
/// kappa couples neighboring wavelength blocks (empty = all ones).
struct ReconConfig {
  double eps = 1e-8;
  double alpha_t = 1e-2;
  double alpha_s = 0.0;
  double beta_t = 10.0;
  double beta_s = 0.0;
  std::vector<double> kappa;

  int outer_iters = 100;  // T
  int object_iters = 1;   // subiterations per outer pass, object phase
  int probe_iters = 1;    // subiterations per outer pass, probe phase

  bool use_backtracking = true;  // step search vs constant 1/B step
  double tau = 0.5;
  int backtrack_depth = 1;  // N

  // Opt-in early exit: stop after an outer pass once every squared gradient
  // norm seen in it is at or below this. 0 keeps fixed iteration budgets.
  double stop_grad_sq = 0.0;

  std::uint64_t seed = 0;
  bool certify = false;  // verify decrease inequalities while running

  void validate(int blocks) const;
  RegularizerWeights object_weights() const { return {eps, alpha_t, alpha_s, kappa}; }
  RegularizerWeights probe_weights() const { return {eps, beta_t, beta_s, kappa}; }
};

/// Safe-step bound for the object subproblem at fixed probe:
/// max_l |F_l|^2 / lambda_l^2 * max_p sum_m |w_l[p-m]|^2  + alpha.
double object_step_bound(const BlockVector& probe, const ShiftList& shifts,
                         const WavelengthSpec& spec, const ScaledDftPlan& plan, double alpha);

/// Mirror bound for the probe subproblem at fixed object (p+m indexing).
double probe_step_bound(const BlockVector& object, const ShiftList& shifts,
                        const WavelengthSpec& spec, const ScaledDftPlan& plan, double beta);

/// One row of the reconstruction trace; the CSV schema of every driver.
struct TraceRow {
  int outer = 0;
  int sub = 0;
  char variable = 'z';  // 'z' object, 'w' probe, 'b' both (baseline sweeps)
  double objective = 0.0;
  double data_loss = 0.0;
  double grad_sq = 0.0;
  double step = 0.0;
  int trials = 0;
  double rel_err_raw = std::numeric_limits<double>::quiet_NaN();
  double rel_err_aligned = std::numeric_limits<double>::quiet_NaN();
  double wall_ms = 0.0;
};

struct RunTrace {
  double initial_objective = 0.0;
  std::vector<TraceRow> rows;
};

/// Ground truth for error columns; either pointer may be null.
struct ErrorRefs {
  const BlockVector* object = nullptr;
  const BlockVector* probe = nullptr;
};

/// Raised when an enabled certificate check fails; carries the rows
/// collected so far so callers can dump them.
struct CertificateError : ContractViolation {
  CertificateError(const std::string& what, RunTrace partial)
      : ContractViolation(what), trace(std::move(partial)) {}
  RunTrace trace;
};

struct NonblindResult {
  BlockVector estimate;
  RunTrace trace;
  DescentTrace descent;
  double step_bound = 0.0;  // B used for the run; constant step was 1/B
};

/// Object recovery at known probe: gradient descent on the regularized
/// amplitude objective with the safe step 1/B(probe).
NonblindResult reconstruct_object(const MeasurementStack& data, const BlockVector& probe,
                                  const BlockVector& init, const ReconConfig& cfg,
                                  const WavelengthSpec& spec, const ScaledDftPlan& plan,
                                  const ErrorRefs& refs = {});

/// Probe recovery at known object; the dual problem with the beta weights.
NonblindResult reconstruct_probe(const MeasurementStack& data, const BlockVector& object,
                                 const BlockVector& init, const ReconConfig& cfg,
                                 const WavelengthSpec& spec, const ScaledDftPlan& plan,
                                 const ErrorRefs& refs = {});

struct OuterRecord {
  int iteration = 0;
  double object_bound = 0.0;   // B(probe) recomputed at the start of the pass
  double probe_bound = 0.0;    // B(object) after the object subiterations
  double object_energy = 0.0;  // |z^t|^2 at the end of the pass
  double probe_energy = 0.0;   // |w^t|^2 at the end of the pass
};

struct BlindResult {
  BlockVector object;
  BlockVector probe;
  RunTrace trace;
  std::vector<OuterRecord> outer;
};

/// Alternating amplitude flow: per outer pass, object_iters gradient steps
/// on the object at fixed probe with step bound B(probe), then probe_iters
/// steps on the probe at fixed object with bound B(object). The combined
/// loss (data term plus all four regularizers) is non-increasing across
/// every subiteration. Resuming from a returned (object, probe) pair
/// reproduces the uninterrupted trajectory bit-exactly.
BlindResult reconstruct_blind(const MeasurementStack& data, const BlockVector& object0,
                              const BlockVector& probe0, const ReconConfig& cfg,
                              const WavelengthSpec& spec, const ScaledDftPlan& plan,
                              const ErrorRefs& refs = {});

struct RateCertificate {
  double min_stat = 0.0;  // min over outer passes of the per-pass gradient statistic
  double bound = 0.0;
  bool holds() const { return min_stat <= bound; }
};

/// Sublinear-rate certificate for a completed blind run: the smallest
/// per-pass statistic max(min_i |grad_z|^2, min_j |grad_w|^2) is bounded by
/// [max(1/alpha_t, 1/beta_t) J0^2 max_l |F_l|^2/lambda_l^2 + J0 max(alpha, beta)]
///   / (T min(I_z, I_w)).
/// Requires alpha_t, beta_t > 0.
RateCertificate rate_certificate(const BlindResult& result, const ReconConfig& cfg,
                                 const WavelengthSpec& spec, const ScaledDftPlan& plan);

struct PhaseAlignment {
  double angle = 0.0;
  BlockVector aligned;
};

/// Closed-form minimizer of |reference - e^{i theta} estimate| over theta.
PhaseAlignment global_phase_align(const BlockVector& estimate, const BlockVector& reference);

/// |reference - estimate| / |reference|, optionally after phase alignment.
double relative_error(const BlockVector& estimate, const BlockVector& reference, bool align);

}  // namespace ptycho
