#pragma once

#include <cstdint>
#include <span>

#include "ptycho/forward.hpp"
#include "ptycho/recon.hpp"

namespace ptycho {

/// Settings for the ptychographic information-multiplexing baseline, the
/// ePIE-style per-shift projection method used for comparisons. It carries
/// no step-size theory; `alpha` is its free relaxation parameter.
struct PimConfig {
  double alpha = 1.0;
  int sweeps = 100;
  bool blind = false;            // update the probe as well
  bool randomize_order = false;  // seeded permutation per sweep instead of sequential
  std::uint64_t seed = 0;
  double eps = 1e-8;  // only for the reported amplitude-loss column

  void validate() const;
};

/// One full pass over the shifts. For each shift: propagate per-wavelength
/// exit waves, replace the modulus of the summed intensity by the measured
/// one, back-propagate the correction, and apply ePIE-style object (and,
/// when blind, probe) updates normalized by the partner's peak modulus.
/// `order` indexes into data.shifts.
void pim_sweep(BlockVector& object, BlockVector& probe, const MeasurementStack& data,
               const WavelengthSpec& spec, const ScaledDftPlan& plan, const PimConfig& cfg,
               std::span<const int> order);

struct PimResult {
  BlockVector object;
  BlockVector probe;
  RunTrace trace;  // one row per sweep: amplitude loss and errors
};

PimResult pim_reconstruct(const MeasurementStack& data, const BlockVector& object0,
                          const BlockVector& probe0, const PimConfig& cfg,
                          const WavelengthSpec& spec, const ScaledDftPlan& plan,
                          const ErrorRefs& refs = {});

}  // namespace ptycho
