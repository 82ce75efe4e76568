#include "ptycho/recon.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

namespace ptycho {

void ReconConfig::validate(int blocks) const {
  object_weights().validate(blocks);
  probe_weights().validate(blocks);
  if (beta_t < 0.0 || beta_s < 0.0) throw std::invalid_argument("ReconConfig: weights must be >= 0");
  if (outer_iters < 0) throw std::invalid_argument("ReconConfig: outer_iters must be >= 0");
  if (object_iters < 1 || probe_iters < 1)
    throw std::invalid_argument("ReconConfig: subiteration counts must be >= 1");
  if (use_backtracking && !(tau > 0.0 && tau < 1.0))
    throw std::invalid_argument("ReconConfig: tau must be in (0,1)");
  if (backtrack_depth < 0) throw std::invalid_argument("ReconConfig: backtrack depth must be >= 0");
  if (stop_grad_sq < 0.0) throw std::invalid_argument("ReconConfig: stop_grad_sq must be >= 0");
}

double object_step_bound(const BlockVector& probe, const ShiftList& shifts,
                         const WavelengthSpec& spec, const ScaledDftPlan& plan, double alpha) {
  PtychoOperatorFamily family(PtychoOperatorFamily::Form::object, probe, shifts, spec, &plan);
  return family.sum_norm_bound() + alpha;
}

double probe_step_bound(const BlockVector& object, const ShiftList& shifts,
                        const WavelengthSpec& spec, const ScaledDftPlan& plan, double beta) {
  PtychoOperatorFamily family(PtychoOperatorFamily::Form::probe, object, shifts, spec, &plan);
  return family.sum_norm_bound() + beta;
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// Builds trace rows from optimizer step records for one descent phase and
// optionally verifies the per-step decrease inequality.
struct PhaseRecorder {
  RunTrace* trace;
  const RegularizedObjective* objective;
  int outer;
  char variable;
  double offset;  // regularizer value of the frozen partner variable
  const BlockVector* reference;
  Clock::time_point start;
  bool certify = false;
  double previous_total = 0.0;

  void operator()(const StepRecord& rec, const BlockVector& point) {
    TraceRow row;
    row.outer = outer;
    row.sub = rec.step;
    row.variable = variable;
    const auto& w = objective->weights();
    double reg = 0.0;
    if (w.alpha_t != 0.0) reg += w.alpha_t * tikhonov(point);
    if (w.alpha_s != 0.0) reg += w.alpha_s * smoothness(point, objective->coupling().kappa());
    row.data_loss = rec.value - reg;
    row.objective = rec.value + offset;
    row.grad_sq = rec.grad_sq;
    row.step = rec.mu;
    row.trials = rec.trials;
    if (reference != nullptr) {
      row.rel_err_raw = relative_error(point, *reference, false);
      row.rel_err_aligned = relative_error(point, *reference, true);
    }
    row.wall_ms = elapsed_ms(start);

    if (certify) {
      const double slack = 1e-12 * std::max(1.0, previous_total);
      if (row.objective - previous_total > -rec.mu * rec.grad_sq + slack) {
        std::ostringstream msg;
        msg << "decrease certificate violated at outer " << outer << " sub " << rec.step << " ("
            << variable << "): objective " << previous_total << " -> " << row.objective
            << ", step " << rec.mu << ", grad_sq " << rec.grad_sq;
        RunTrace partial = *trace;
        partial.rows.push_back(row);
        throw CertificateError(msg.str(), std::move(partial));
      }
    }
    previous_total = row.objective;
    trace->rows.push_back(row);
  }
};

NonblindResult run_nonblind(const MeasurementStack& data, const BlockVector& partner,
                            const BlockVector& init, const ReconConfig& cfg,
                            const RegularizerWeights& weights, PtychoOperatorFamily::Form form,
                            const WavelengthSpec& spec, const ScaledDftPlan& plan,
                            const BlockVector* reference) {
  cfg.validate(init.blocks());
  data.validate();

  PtychoOperatorFamily family(form, partner, data.shifts, spec, &plan);
  RegularizedObjective objective(family, std::vector<double>(data.values.begin(), data.values.end()),
                                 weights, init.blocks());
  const double bound = objective.hessian_bound();
  const StepRule rule = cfg.use_backtracking
                            ? StepRule::armijo(1.0 / bound, cfg.tau, cfg.backtrack_depth)
                            : StepRule::constant(1.0 / bound);

  NonblindResult result;
  result.step_bound = bound;

  const char variable = form == PtychoOperatorFamily::Form::object ? 'z' : 'w';
  PhaseRecorder recorder{&result.trace, &objective, 1,           variable, 0.0,
                         reference,     Clock::now(), cfg.certify, 0.0};

  // initial objective feeds both the trace header and the certify baseline
  result.trace.initial_objective = objective.value(init);
  recorder.previous_total = result.trace.initial_objective;
  DescentResult descent =
      descend(objective, init, cfg.outer_iters, rule, std::ref(recorder), cfg.stop_grad_sq);

  result.estimate = std::move(descent.point);
  result.descent = std::move(descent.trace);
  return result;
}

}  // namespace

NonblindResult reconstruct_object(const MeasurementStack& data, const BlockVector& probe,
                                  const BlockVector& init, const ReconConfig& cfg,
                                  const WavelengthSpec& spec, const ScaledDftPlan& plan,
                                  const ErrorRefs& refs) {
  return run_nonblind(data, probe, init, cfg, cfg.object_weights(),
                      PtychoOperatorFamily::Form::object, spec, plan, refs.object);
}

NonblindResult reconstruct_probe(const MeasurementStack& data, const BlockVector& object,
                                 const BlockVector& init, const ReconConfig& cfg,
                                 const WavelengthSpec& spec, const ScaledDftPlan& plan,
                                 const ErrorRefs& refs) {
  return run_nonblind(data, object, init, cfg, cfg.probe_weights(),
                      PtychoOperatorFamily::Form::probe, spec, plan, refs.probe);
}

BlindResult reconstruct_blind(const MeasurementStack& data, const BlockVector& object0,
                              const BlockVector& probe0, const ReconConfig& cfg,
                              const WavelengthSpec& spec, const ScaledDftPlan& plan,
                              const ErrorRefs& refs) {
  cfg.validate(object0.blocks());
  data.validate();
  if (!object0.same_shape(probe0)) throw std::invalid_argument("reconstruct_blind: shape mismatch");

  const std::vector<double> y(data.values.begin(), data.values.end());
  const auto kappa = cfg.object_weights().resolved_kappa(object0.blocks());
  const SmoothnessCoupling coupling(kappa, object0.blocks());

  auto probe_reg = [&](const BlockVector& w) {
    double v = cfg.beta_t * tikhonov(w);
    if (cfg.beta_s != 0.0) v += cfg.beta_s * smoothness(w, kappa);
    return v;
  };
  auto object_reg = [&](const BlockVector& z) {
    double v = cfg.alpha_t * tikhonov(z);
    if (cfg.alpha_s != 0.0) v += cfg.alpha_s * smoothness(z, kappa);
    return v;
  };

  BlindResult result;
  result.object = object0;
  result.probe = probe0;

  const Clock::time_point start = Clock::now();
  double running_total = 0.0;
  bool have_total = false;

  try {
    for (int t = 1; t <= cfg.outer_iters; ++t) {
      OuterRecord outer;
      outer.iteration = t;

      {  // object phase at frozen probe
        PtychoOperatorFamily family(PtychoOperatorFamily::Form::object, result.probe, data.shifts,
                                    spec, &plan);
        RegularizedObjective objective(family, y, cfg.object_weights(), object0.blocks());
        outer.object_bound = objective.hessian_bound();
        const StepRule rule = cfg.use_backtracking
                                  ? StepRule::armijo(1.0 / outer.object_bound, cfg.tau, cfg.backtrack_depth)
                                  : StepRule::constant(1.0 / outer.object_bound);
        const double offset = probe_reg(result.probe);
        PhaseRecorder recorder{&result.trace, &objective, t,   'z', offset, refs.object,
                               start,         cfg.certify, 0.0};
        if (!have_total) {
          running_total = objective.value(result.object) + offset;
          result.trace.initial_objective = running_total;
          have_total = true;
        }
        recorder.previous_total = running_total;
        DescentResult descent =
            descend(objective, result.object, cfg.object_iters, rule, std::ref(recorder));
        result.object = std::move(descent.point);
        running_total = recorder.previous_total;
      }

      {  // probe phase at frozen object
        PtychoOperatorFamily family(PtychoOperatorFamily::Form::probe, result.object, data.shifts,
                                    spec, &plan);
        RegularizedObjective objective(family, y, cfg.probe_weights(), object0.blocks());
        outer.probe_bound = objective.hessian_bound();
        const StepRule rule = cfg.use_backtracking
                                  ? StepRule::armijo(1.0 / outer.probe_bound, cfg.tau, cfg.backtrack_depth)
                                  : StepRule::constant(1.0 / outer.probe_bound);
        const double offset = object_reg(result.object);
        PhaseRecorder recorder{&result.trace, &objective, t,   'w', offset, refs.probe,
                               start,         cfg.certify, 0.0};
        recorder.previous_total = running_total;
        DescentResult descent =
            descend(objective, result.probe, cfg.probe_iters, rule, std::ref(recorder));
        result.probe = std::move(descent.point);
        running_total = recorder.previous_total;
      }

      outer.object_energy = tikhonov(result.object);
      outer.probe_energy = tikhonov(result.probe);
      result.outer.push_back(outer);

      if (cfg.stop_grad_sq > 0.0) {
        double pass_max = 0.0;
        for (auto it = result.trace.rows.rbegin();
             it != result.trace.rows.rend() && it->outer == t; ++it)
          pass_max = std::max(pass_max, it->grad_sq);
        if (pass_max <= cfg.stop_grad_sq) break;
      }
    }
  } catch (CertificateError& err) {
    // surface the full interleaved trace collected so far
    err.trace.initial_objective = result.trace.initial_objective;
    throw;
  }
  return result;
}

RateCertificate rate_certificate(const BlindResult& result, const ReconConfig& cfg,
                                 const WavelengthSpec& spec, const ScaledDftPlan& plan) {
  if (!(cfg.alpha_t > 0.0 && cfg.beta_t > 0.0))
    throw std::invalid_argument("rate_certificate: requires positive Tikhonov weights");
  if (result.outer.empty()) throw std::invalid_argument("rate_certificate: empty run");

  const int t_total = static_cast<int>(result.outer.size());
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> min_z(t_total + 1, inf), min_w(t_total + 1, inf);
  for (const TraceRow& row : result.trace.rows) {
    if (row.outer < 1 || row.outer > t_total) continue;
    if (row.variable == 'z')
      min_z[row.outer] = std::min(min_z[row.outer], row.grad_sq);
    else if (row.variable == 'w')
      min_w[row.outer] = std::min(min_w[row.outer], row.grad_sq);
  }

  double min_stat = inf;
  for (int t = 1; t <= t_total; ++t) {
    if (!std::isfinite(min_z[t]) || !std::isfinite(min_w[t]))
      throw std::invalid_argument("rate_certificate: trace is missing subiterations");
    min_stat = std::min(min_stat, std::max(min_z[t], min_w[t]));
  }

  const int blocks = result.object.blocks();
  const double knorm = coupling_norm(cfg.object_weights().resolved_kappa(blocks), blocks);
  const double alpha = cfg.alpha_t + cfg.alpha_s * knorm;
  const double beta = cfg.beta_t + cfg.beta_s * knorm;
  double max_transform = 0.0;
  for (int l = 0; l < spec.count(); ++l) {
    const double fnorm = plan.transform_norm(l);
    max_transform = std::max(max_transform, spec.inv_lambda_sq(l) * fnorm * fnorm);
  }

  const double j0 = result.trace.initial_objective;
  const double bound = (std::max(1.0 / cfg.alpha_t, 1.0 / cfg.beta_t) * j0 * j0 * max_transform +
                        j0 * std::max(alpha, beta)) /
                       (static_cast<double>(t_total) * std::min(cfg.object_iters, cfg.probe_iters));
  return {min_stat, bound};
}

PhaseAlignment global_phase_align(const BlockVector& estimate, const BlockVector& reference) {
  if (!estimate.same_shape(reference))
    throw std::invalid_argument("global_phase_align: shape mismatch");
  const cplx inner = dot(estimate, reference);
  const double angle = (inner == cplx{}) ? 0.0 : std::arg(inner);
  PhaseAlignment out;
  out.angle = angle;
  out.aligned = estimate;
  out.aligned *= cplx(std::cos(angle), std::sin(angle));
  return out;
}

double relative_error(const BlockVector& estimate, const BlockVector& reference, bool align) {
  const double ref_norm = reference.norm();
  if (!(ref_norm > 0.0)) throw std::invalid_argument("relative_error: zero reference");
  const BlockVector* est = &estimate;
  PhaseAlignment alignment;
  if (align) {
    alignment = global_phase_align(estimate, reference);
    est = &alignment.aligned;
  }
  BlockVector diff = reference;
  diff -= *est;
  return diff.norm() / ref_norm;
}

}  // namespace ptycho
