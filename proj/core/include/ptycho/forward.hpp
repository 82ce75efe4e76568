#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ptycho/block_vector.hpp"
#include "ptycho/linalg.hpp"
#include "ptycho/objective.hpp"

namespace ptycho {

/// Wavelengths of the illumination, strictly increasing; frequencies are
/// sampled on the dual grid of the smallest wavelength, so channel l is
/// transformed with the scaled kernel exp(-2 pi i ratio(l) k.a / n).
struct WavelengthSpec {
  std::vector<double> lambda;

  int count() const { return static_cast<int>(lambda.size()); }
  double ratio(int l) const { return lambda.front() / lambda[l]; }
  double inv_lambda_sq(int l) const { return 1.0 / (lambda[l] * lambda[l]); }
  void validate() const;
};

/// Integer 2-D probe shift (row, column offsets).
struct Shift {
  int dr = 0;
  int dc = 0;
  friend bool operator==(const Shift&, const Shift&) = default;
};

using ShiftList = std::vector<Shift>;

/// Throws unless every shift keeps a delta x delta corner-supported probe
/// inside the n x n object domain (0 <= m <= n - delta, both axes) and no
/// shift repeats.
void validate_shift_set(const ShiftList& shifts, int side, int support);

/// Separable scaled discrete Fourier transforms, one kernel per wavelength.
/// The dense kernel matrix is always available; for larger grids a Bluestein
/// (chirp-convolution) fast path is used, validated against the dense route
/// by the test suite.
class ScaledDftPlan {
 public:
  /// automatic: convolution path for larger grids, dense kernel otherwise.
  enum class Path { automatic, dense, convolution };

  ScaledDftPlan(int side, WavelengthSpec spec, Path path = Path::automatic);

  int side() const { return side_; }
  const WavelengthSpec& wavelengths() const { return spec_; }
  bool fast_path() const { return fast_; }

  /// out[k] = sum_a in[a] exp(-2 pi i ratio(l) k.a / side), separably.
  void forward(int l, const cplx* in, cplx* out) const;
  /// Conjugate-transpose of forward.
  void adjoint(int l, const cplx* in, cplx* out) const;

  std::vector<cplx> forward(int l, std::span<const cplx> in) const;
  std::vector<cplx> adjoint(int l, std::span<const cplx> in) const;

  /// Spectral norm of the full 2-D transform, lambda_max of kernel*kernel
  /// (the separable norm is the 1-D norm squared). Cached at construction.
  double transform_norm(int l) const { return norms_[l]; }

  /// 1-D kernel matrix for wavelength l (side x side).
  const DenseMatrix& kernel(int l) const { return kernels_[l]; }

 private:
  void dense_2d(int l, const cplx* in, cplx* out) const;
  void bluestein_2d(int l, const cplx* in, cplx* out) const;
  void bluestein_1d(int l, const cplx* in, int stride_in, cplx* out, int stride_out) const;

  int side_ = 0;
  WavelengthSpec spec_;
  bool fast_ = false;

  std::vector<DenseMatrix> kernels_;  // per wavelength
  std::vector<double> norms_;

  // Bluestein tables
  int conv_size_ = 0;  // power of two >= 2*side-1
  std::vector<int> bitrev_;
  std::vector<cplx> twiddle_;                    // conv_size_/2 roots
  std::vector<std::vector<cplx>> chirp_;         // per l, length side
  std::vector<std::vector<cplx>> filter_fft_;    // per l, length conv_size_
};

/// Direction of the cut-out window product: `probe_shift` indexes the
/// partner at p - m (object-side exit wave), `object_shift` at p + m
/// (probe-side dual form).
enum class CutDir { probe_shift, object_shift };

/// out[p] = host[p] * partner[p -/+ m], zero where the shifted index leaves
/// the grid. Shifts are cut, not cyclic.
void windowed_product(std::span<const cplx> host, std::span<const cplx> partner, int side, Shift m,
                      CutDir dir, std::span<cplx> out);

/// Exit wave of one channel: object times the shifted, boundary-cut probe.
std::vector<cplx> exit_wave(std::span<const cplx> object, std::span<const cplx> probe, int side,
                            Shift m);

/// Nonnegative intensities indexed by (shift, frequency); frames are stored
/// in shift order, each frame row-major over the n x n frequency grid.
struct MeasurementStack {
  int side = 0;
  ShiftList shifts;
  std::vector<double> values;

  std::size_t frame_size() const { return static_cast<std::size_t>(side) * side; }
  std::span<double> frame(std::size_t i) { return {values.data() + i * frame_size(), frame_size()}; }
  std::span<const double> frame(std::size_t i) const {
    return {values.data() + i * frame_size(), frame_size()};
  }
  double& at(std::size_t i, int k1, int k2) { return values[i * frame_size() + grid_index(k1, k2, side)]; }
  double at(std::size_t i, int k1, int k2) const {
    return values[i * frame_size() + grid_index(k1, k2, side)];
  }
  void validate() const;
};

/// Polychromatic intensity synthesis: for each shift m and frequency k,
///   y = sum_l lambda_l^-2 |scaled_dft(exit_wave(x_l, w_l, m), l)[k]|^2.
MeasurementStack simulate(const BlockVector& object, const BlockVector& probe, const ShiftList& shifts,
                          const WavelengthSpec& spec, const ScaledDftPlan& plan);

/// The ptychographic measurement operators as a quadratic family over either
/// the object stack (probe fixed) or the probe stack (object fixed). The
/// step-size bound is the closed-form overlap expression, not a dense norm.
class PtychoOperatorFamily final : public QuadraticOperatorFamily {
 public:
  enum class Form { object, probe };

  PtychoOperatorFamily(Form form, BlockVector partner, ShiftList shifts, WavelengthSpec spec,
                       const ScaledDftPlan* plan);

  std::size_t count() const override;
  std::vector<double> quad_values(const BlockVector& z) const override;
  BlockVector weighted_backproject(const BlockVector& z, std::span<const double> c) const override;
  double sum_norm_bound() const override;
  // shares the forward transforms between the quadratic values and the
  // backprojection; bit-identical to the two-step route
  BlockVector coefficient_backproject(const BlockVector& z, const CoefficientFn& coeff) const override;

  Form form() const { return form_; }
  const BlockVector& partner() const { return partner_; }
  const ShiftList& shifts() const { return shifts_; }

 private:
  CutDir dir() const { return form_ == Form::object ? CutDir::probe_shift : CutDir::object_shift; }

  Form form_;
  BlockVector partner_;
  ShiftList shifts_;
  WavelengthSpec spec_;
  const ScaledDftPlan* plan_;
};

/// sum_{m,k} c_{m,k} Q_{m,k} z for the given form; `coeffs` is laid out like
/// MeasurementStack frames. Exact adjoint of the linearized forward map.
BlockVector backproject(PtychoOperatorFamily::Form form, const BlockVector& z,
                        const BlockVector& partner, const ShiftList& shifts,
                        const WavelengthSpec& spec, const ScaledDftPlan& plan,
                        std::span<const double> coeffs);

/// One measurement operator assembled directly from its defining vectors.
/// This is the slow reference route; `dense` is filled only when requested
/// and the total dimension is gated to 4096.
struct QuadraticFormOracle {
  double value = 0.0;
  DenseMatrix dense;
};

QuadraticFormOracle dense_quadratic_form(const BlockVector& variable, const BlockVector& partner,
                                         Shift m, int k1, int k2, const WavelengthSpec& spec,
                                         PtychoOperatorFamily::Form form, bool assemble_dense);

// --- synthetic generators ----------------------------------------------------

/// Golden angle 2 pi (2 / (1 + sqrt 5))^2, radians.
double fermat_golden_angle();

/// Probe positions on a Fermat spiral r_k = c_sp sqrt(k) at golden-angle
/// increments around the grid center. The probe center ((delta-1)/2 inside
/// its support, matching gaussian_probe) tracks the spiral; shifts are
/// rounded half-away-from-zero, filtered so the delta x delta support stays
/// inside the grid, and de-duplicated preserving spiral order.
ShiftList fermat_shifts(int side, int support, double spacing);

/// Gaussian probe stack on a delta x delta corner support: template
/// g = exp(-|k - mu|^2 / (2 variance)) with mu = ((delta-1)/2, (delta-1)/2),
/// block l scaled to energy spectral_weights[l]. `variance` <= 0 selects the
/// default delta^2 / 20.
BlockVector gaussian_probe(int side, int support, std::span<const double> spectral_weights,
                           double variance = 0.0);

/// Three-level stepped-disk probe template (2.3 / 1.3 / 0.3 at radii
/// sqrt(0.3) delta/2 and sqrt(0.6) delta/2), every block normalized to
/// energy 1/blocks. The standard rough starting guess for blind runs.
BlockVector stepped_disk_probe(int side, int support, int blocks);

/// Synthetic complex object stack: real part is the ten-ellipse Shepp-Logan
/// phantom, imaginary part a procedural structured image (gradient, rings,
/// box, disc), both built in [0,1]. Block l is modulated by
/// 1 + perturbation * l * bump(u,v) so neighboring blocks differ but stay
/// close, then the whole stack is rescaled so the root-mean-square modulus
/// over all entries is exactly 0.65.
BlockVector synthetic_object(int side, int blocks, double perturbation = 0.05);

/// Per-entry Poisson corruption y -> (d/photons) Pois(photons y / d) with
/// d = side^2 (photons are budgeted per pixel). Deterministic given seed.
MeasurementStack add_poisson_noise(const MeasurementStack& clean, double photons, std::uint64_t seed);

}  // namespace ptycho
