#include "ptycho/pim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "ptycho/rng.hpp"

namespace ptycho {

namespace {
constexpr double kFloor = 1e-12;
}

void PimConfig::validate() const {
  if (!(alpha > 0.0)) throw std::invalid_argument("PimConfig: alpha must be > 0");
  if (sweeps < 0) throw std::invalid_argument("PimConfig: sweeps must be >= 0");
  if (!(eps > 0.0)) throw std::invalid_argument("PimConfig: eps must be > 0");
}

void pim_sweep(BlockVector& object, BlockVector& probe, const MeasurementStack& data,
               const WavelengthSpec& spec, const ScaledDftPlan& plan, const PimConfig& cfg,
               std::span<const int> order) {
  const int n = object.side();
  const int nl = object.blocks();
  const std::size_t frame = static_cast<std::size_t>(n) * n;

  std::vector<std::vector<cplx>> spectra(nl, std::vector<cplx>(frame));
  std::vector<cplx> wave(frame);
  std::vector<cplx> correction(frame);
  std::vector<double> intensity(frame);
  std::vector<cplx> object_before(frame);

  for (int idx : order) {
    const Shift m = data.shifts[idx];
    const auto y = data.frame(idx);

    intensity.assign(frame, 0.0);
    for (int l = 0; l < nl; ++l) {
      windowed_product(object.block(l), probe.block(l), n, m, CutDir::probe_shift, wave);
      plan.forward(l, wave.data(), spectra[l].data());
      const double wl = spec.inv_lambda_sq(l);
      for (std::size_t k = 0; k < frame; ++k) intensity[k] += wl * std::norm(spectra[l][k]);
    }

    for (int l = 0; l < nl; ++l) {
      auto obj = object.block(l);
      auto prb = probe.block(l);

      // amplitude projection of the summed intensity, channel by channel
      for (std::size_t k = 0; k < frame; ++k) {
        const double factor = std::sqrt(y[k]) / std::sqrt(std::max(intensity[k], kFloor));
        correction[k] = spectra[l][k] * (factor - 1.0);
      }
      plan.adjoint(l, correction.data(), wave.data());
      const double back_scale = 1.0 / frame;  // inverse transform for the base channel

      double probe_peak = 0.0;
      for (std::size_t k = 0; k < frame; ++k) probe_peak = std::max(probe_peak, std::norm(prb[k]));
      double object_peak = 0.0;
      if (cfg.blind) {
        std::copy(obj.begin(), obj.end(), object_before.begin());
        for (std::size_t k = 0; k < frame; ++k)
          object_peak = std::max(object_peak, std::norm(object_before[k]));
      }

      const double obj_gain = cfg.alpha * back_scale / std::max(probe_peak, kFloor);
      const int rlo = std::max(0, m.dr), rhi = std::min(n, n + m.dr);
      const int clo = std::max(0, m.dc), chi = std::min(n, n + m.dc);
      for (int r = rlo; r < rhi; ++r) {
        for (int c = clo; c < chi; ++c) {
          const std::size_t p = grid_index(r, c, n);
          const std::size_t q = grid_index(r - m.dr, c - m.dc, n);
          obj[p] += obj_gain * std::conj(prb[q]) * wave[p];
        }
      }

      if (cfg.blind) {
        const double prb_gain = cfg.alpha * back_scale / std::max(object_peak, kFloor);
        for (int r = rlo; r < rhi; ++r) {
          for (int c = clo; c < chi; ++c) {
            const std::size_t p = grid_index(r, c, n);
            const std::size_t q = grid_index(r - m.dr, c - m.dc, n);
            prb[q] += prb_gain * std::conj(object_before[p]) * wave[p];
          }
        }
      }
    }
  }
}

PimResult pim_reconstruct(const MeasurementStack& data, const BlockVector& object0,
                          const BlockVector& probe0, const PimConfig& cfg,
                          const WavelengthSpec& spec, const ScaledDftPlan& plan,
                          const ErrorRefs& refs) {
  cfg.validate();
  data.validate();
  if (!object0.same_shape(probe0)) throw std::invalid_argument("pim_reconstruct: shape mismatch");

  PimResult result;
  result.object = object0;
  result.probe = probe0;

  PtychoOperatorFamily family(PtychoOperatorFamily::Form::object, result.probe, data.shifts, spec,
                              &plan);
  result.trace.initial_objective = amplitude_loss(family, result.object, data.values, cfg.eps);

  std::vector<int> order(data.shifts.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(cfg.seed);

  const auto start = std::chrono::steady_clock::now();
  for (int sweep = 1; sweep <= cfg.sweeps; ++sweep) {
    if (cfg.randomize_order) {
      for (std::size_t i = order.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.next_u64() % i);
        std::swap(order[i - 1], order[j]);
      }
    }
    pim_sweep(result.object, result.probe, data, spec, plan, cfg, order);

    TraceRow row;
    row.outer = sweep;
    row.sub = 0;
    row.variable = cfg.blind ? 'b' : 'z';
    PtychoOperatorFamily current(PtychoOperatorFamily::Form::object, result.probe, data.shifts,
                                 spec, &plan);
    row.data_loss = amplitude_loss(current, result.object, data.values, cfg.eps);
    row.objective = row.data_loss;
    if (refs.object != nullptr) {
      row.rel_err_raw = relative_error(result.object, *refs.object, false);
      row.rel_err_aligned = relative_error(result.object, *refs.object, true);
    }
    row.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    result.trace.rows.push_back(row);
  }
  return result;
}

}  // namespace ptycho
