#include "ptycho/forward.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

#include "ptycho/parallel.hpp"

namespace ptycho {

namespace {

constexpr int kFastPathMinSide = 64;

int next_pow2(int v) {
  int m = 1;
  while (m < v) m <<= 1;
  return m;
}

// Iterative radix-2 DIT transform; `tw` holds exp(-2 pi i j / m), j < m/2.
void fft_pow2(cplx* a, int m, const int* bitrev, const cplx* tw) {
  for (int i = 0; i < m; ++i) {
    const int j = bitrev[i];
    if (j > i) std::swap(a[i], a[j]);
  }
  for (int len = 2; len <= m; len <<= 1) {
    const int half = len >> 1;
    const int step = m / len;
    for (int start = 0; start < m; start += len) {
      for (int k = 0; k < half; ++k) {
        const cplx w = tw[k * step];
        const cplx u = a[start + k];
        const cplx v = a[start + k + half] * w;
        a[start + k] = u + v;
        a[start + k + half] = u - v;
      }
    }
  }
}

void ifft_pow2(cplx* a, int m, const int* bitrev, const cplx* tw) {
  for (int i = 0; i < m; ++i) a[i] = std::conj(a[i]);
  fft_pow2(a, m, bitrev, tw);
  const double inv = 1.0 / m;
  for (int i = 0; i < m; ++i) a[i] = std::conj(a[i]) * inv;
}

struct BluesteinWorkspace {
  std::vector<cplx> conv;
  std::vector<cplx> line_in;
  std::vector<cplx> line_out;
};

BluesteinWorkspace& workspace(int conv_size, int side) {
  thread_local BluesteinWorkspace ws;
  if (static_cast<int>(ws.conv.size()) != conv_size) ws.conv.assign(conv_size, cplx{});
  if (static_cast<int>(ws.line_in.size()) < side) {
    ws.line_in.resize(side);
    ws.line_out.resize(side);
  }
  return ws;
}

void check_same_grid(const BlockVector& a, const BlockVector& b, const char* where) {
  if (!a.same_shape(b)) throw std::invalid_argument(std::string(where) + ": shape mismatch");
}

}  // namespace

// --- WavelengthSpec -----------------------------------------------------------

void WavelengthSpec::validate() const {
  if (lambda.empty()) throw std::invalid_argument("WavelengthSpec: at least one wavelength required");
  for (std::size_t l = 0; l < lambda.size(); ++l) {
    if (!(lambda[l] > 0.0)) throw std::invalid_argument("WavelengthSpec: wavelengths must be > 0");
    if (l > 0 && !(lambda[l] > lambda[l - 1]))
      throw std::invalid_argument("WavelengthSpec: wavelengths must be strictly increasing");
  }
}

void validate_shift_set(const ShiftList& shifts, int side, int support) {
  if (support < 1 || support > side) throw std::invalid_argument("shift set: invalid probe support");
  std::set<std::pair<int, int>> seen;
  for (const Shift& m : shifts) {
    if (m.dr < 0 || m.dc < 0 || m.dr > side - support || m.dc > side - support)
      throw std::invalid_argument("shift set: probe support leaves the object domain");
    if (!seen.insert({m.dr, m.dc}).second) throw std::invalid_argument("shift set: duplicate shift");
  }
}

void MeasurementStack::validate() const {
  if (values.size() != shifts.size() * frame_size())
    throw std::invalid_argument("MeasurementStack: value count mismatch");
  for (double v : values)
    if (!(v >= 0.0)) throw std::invalid_argument("MeasurementStack: negative intensity");
}

// --- ScaledDftPlan ------------------------------------------------------------

ScaledDftPlan::ScaledDftPlan(int side, WavelengthSpec spec, Path path)
    : side_(side), spec_(std::move(spec)) {
  if (side_ < 1) throw std::invalid_argument("ScaledDftPlan: side must be >= 1");
  spec_.validate();
  const int nl = spec_.count();
  fast_ = path == Path::convolution || (path == Path::automatic && side_ >= kFastPathMinSide);

  kernels_.reserve(nl);
  norms_.reserve(nl);
  const double base = -2.0 * std::numbers::pi / side_;
  for (int l = 0; l < nl; ++l) {
    const double rho = spec_.ratio(l);
    DenseMatrix e(side_, side_);
    for (int k = 0; k < side_; ++k) {
      for (int a = 0; a < side_; ++a) {
        const double phase = base * rho * static_cast<double>(k) * static_cast<double>(a);
        e.at(k, a) = cplx(std::cos(phase), std::sin(phase));
      }
    }
    DenseMatrix h = matmul(ptycho::adjoint(e), e);
    norms_.push_back(hermitian_max_eigenvalue(h));
    kernels_.push_back(std::move(e));
  }

  // Bluestein tables are cheap; build them whenever the fast path may run.
  conv_size_ = std::max(2, next_pow2(2 * side_ - 1));
  bitrev_.assign(conv_size_, 0);
  for (int i = 1, j = 0; i < conv_size_; ++i) {
    int bit = conv_size_ >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    bitrev_[i] = j;
  }
  twiddle_.resize(conv_size_ / 2);
  for (int j = 0; j < conv_size_ / 2; ++j) {
    const double phase = -2.0 * std::numbers::pi * j / conv_size_;
    twiddle_[j] = cplx(std::cos(phase), std::sin(phase));
  }
  chirp_.resize(nl);
  filter_fft_.resize(nl);
  for (int l = 0; l < nl; ++l) {
    const double rho = spec_.ratio(l);
    chirp_[l].resize(side_);
    std::vector<cplx> filter(conv_size_, cplx{});
    for (int t = 0; t < side_; ++t) {
      const double phase = std::numbers::pi * rho * static_cast<double>(t) * static_cast<double>(t) / side_;
      chirp_[l][t] = cplx(std::cos(phase), -std::sin(phase));
      const cplx pos = cplx(std::cos(phase), std::sin(phase));
      filter[t] = pos;
      if (t > 0) filter[conv_size_ - t] = pos;
    }
    fft_pow2(filter.data(), conv_size_, bitrev_.data(), twiddle_.data());
    filter_fft_[l] = std::move(filter);
  }
}

void ScaledDftPlan::bluestein_1d(int l, const cplx* in, int stride_in, cplx* out,
                                 int stride_out) const {
  auto& ws = workspace(conv_size_, side_);
  cplx* a = ws.conv.data();
  const auto& chirp = chirp_[l];
  for (int t = 0; t < side_; ++t) a[t] = in[static_cast<std::size_t>(t) * stride_in] * chirp[t];
  std::fill(a + side_, a + conv_size_, cplx{});
  fft_pow2(a, conv_size_, bitrev_.data(), twiddle_.data());
  const cplx* filt = filter_fft_[l].data();
  for (int j = 0; j < conv_size_; ++j) a[j] *= filt[j];
  ifft_pow2(a, conv_size_, bitrev_.data(), twiddle_.data());
  for (int k = 0; k < side_; ++k) out[static_cast<std::size_t>(k) * stride_out] = chirp[k] * a[k];
}

void ScaledDftPlan::bluestein_2d(int l, const cplx* in, cplx* out) const {
  const int n = side_;
  std::vector<cplx> mid(static_cast<std::size_t>(n) * n);
  auto& ws = workspace(conv_size_, side_);
  // axis 0 (down the rows), column by column
  for (int c = 0; c < n; ++c) {
    for (int r = 0; r < n; ++r) ws.line_in[r] = in[grid_index(r, c, n)];
    bluestein_1d(l, ws.line_in.data(), 1, ws.line_out.data(), 1);
    for (int r = 0; r < n; ++r) mid[grid_index(r, c, n)] = ws.line_out[r];
  }
  // axis 1 (along each row), contiguous
  for (int r = 0; r < n; ++r) bluestein_1d(l, &mid[grid_index(r, 0, n)], 1, &out[grid_index(r, 0, n)], 1);
}

void ScaledDftPlan::dense_2d(int l, const cplx* in, cplx* out) const {
  const int n = side_;
  const DenseMatrix& e = kernels_[l];
  std::vector<cplx> mid(static_cast<std::size_t>(n) * n, cplx{});
  for (int k1 = 0; k1 < n; ++k1) {
    cplx* vrow = &mid[grid_index(k1, 0, n)];
    const cplx* erow = &e.a[static_cast<std::size_t>(k1) * n];
    for (int a1 = 0; a1 < n; ++a1) {
      const cplx coef = erow[a1];
      const cplx* urow = &in[grid_index(a1, 0, n)];
      for (int c = 0; c < n; ++c) vrow[c] += coef * urow[c];
    }
  }
  for (int k1 = 0; k1 < n; ++k1) {
    const cplx* vrow = &mid[grid_index(k1, 0, n)];
    for (int k2 = 0; k2 < n; ++k2) {
      const cplx* erow = &e.a[static_cast<std::size_t>(k2) * n];
      cplx acc{};
      for (int c = 0; c < n; ++c) acc += vrow[c] * erow[c];
      out[grid_index(k1, k2, n)] = acc;
    }
  }
}

void ScaledDftPlan::forward(int l, const cplx* in, cplx* out) const {
  if (l < 0 || l >= spec_.count()) throw std::invalid_argument("ScaledDftPlan: wavelength index");
  if (fast_)
    bluestein_2d(l, in, out);
  else
    dense_2d(l, in, out);
}

void ScaledDftPlan::adjoint(int l, const cplx* in, cplx* out) const {
  // F* v = conj(F conj(v)) for the symmetric separable kernel.
  const std::size_t g = static_cast<std::size_t>(side_) * side_;
  std::vector<cplx> tmp(g);
  for (std::size_t i = 0; i < g; ++i) tmp[i] = std::conj(in[i]);
  forward(l, tmp.data(), out);
  for (std::size_t i = 0; i < g; ++i) out[i] = std::conj(out[i]);
}

std::vector<cplx> ScaledDftPlan::forward(int l, std::span<const cplx> in) const {
  if (in.size() != static_cast<std::size_t>(side_) * side_)
    throw std::invalid_argument("ScaledDftPlan::forward: grid size mismatch");
  std::vector<cplx> out(in.size());
  forward(l, in.data(), out.data());
  return out;
}

std::vector<cplx> ScaledDftPlan::adjoint(int l, std::span<const cplx> in) const {
  if (in.size() != static_cast<std::size_t>(side_) * side_)
    throw std::invalid_argument("ScaledDftPlan::adjoint: grid size mismatch");
  std::vector<cplx> out(in.size());
  adjoint(l, in.data(), out.data());
  return out;
}

// --- window product -----------------------------------------------------------

namespace {

// out[p] = partner[p -/+ m], zero outside the overlap window.
void cut_shift(std::span<const cplx> partner, int side, Shift m, CutDir dir, std::span<cplx> out) {
  std::fill(out.begin(), out.end(), cplx{});
  const int sdr = dir == CutDir::probe_shift ? m.dr : -m.dr;
  const int sdc = dir == CutDir::probe_shift ? m.dc : -m.dc;
  const int rlo = std::max(0, sdr), rhi = std::min(side, side + sdr);
  const int clo = std::max(0, sdc), chi = std::min(side, side + sdc);
  for (int r = rlo; r < rhi; ++r) {
    const cplx* prow = &partner[grid_index(r - sdr, 0, side)];
    cplx* orow = &out[grid_index(r, 0, side)];
    for (int c = clo; c < chi; ++c) orow[c] = prow[c - sdc];
  }
}

}  // namespace

void windowed_product(std::span<const cplx> host, std::span<const cplx> partner, int side, Shift m,
                      CutDir dir, std::span<cplx> out) {
  const std::size_t g = static_cast<std::size_t>(side) * side;
  if (host.size() != g || partner.size() != g || out.size() != g)
    throw std::invalid_argument("windowed_product: grid size mismatch");
  if (std::abs(m.dr) > side - 1 || std::abs(m.dc) > side - 1)
    throw std::invalid_argument("windowed_product: shift outside admissible range");

  std::fill(out.begin(), out.end(), cplx{});
  const int sdr = dir == CutDir::probe_shift ? m.dr : -m.dr;
  const int sdc = dir == CutDir::probe_shift ? m.dc : -m.dc;
  const int rlo = std::max(0, sdr), rhi = std::min(side, side + sdr);
  const int clo = std::max(0, sdc), chi = std::min(side, side + sdc);
  for (int r = rlo; r < rhi; ++r) {
    const cplx* hrow = &host[grid_index(r, 0, side)];
    const cplx* prow = &partner[grid_index(r - sdr, 0, side)];
    cplx* orow = &out[grid_index(r, 0, side)];
    for (int c = clo; c < chi; ++c) orow[c] = hrow[c] * prow[c - sdc];
  }
}

std::vector<cplx> exit_wave(std::span<const cplx> object, std::span<const cplx> probe, int side,
                            Shift m) {
  std::vector<cplx> out(static_cast<std::size_t>(side) * side);
  windowed_product(object, probe, side, m, CutDir::probe_shift, out);
  return out;
}

// --- simulate ------------------------------------------------------------------

MeasurementStack simulate(const BlockVector& object, const BlockVector& probe, const ShiftList& shifts,
                          const WavelengthSpec& spec, const ScaledDftPlan& plan) {
  check_same_grid(object, probe, "simulate");
  if (object.blocks() != spec.count()) throw std::invalid_argument("simulate: wavelength count mismatch");
  if (object.side() != plan.side()) throw std::invalid_argument("simulate: plan side mismatch");

  const int n = object.side();
  MeasurementStack stack;
  stack.side = n;
  stack.shifts = shifts;
  stack.values.assign(shifts.size() * stack.frame_size(), 0.0);

  parallel_for(static_cast<int>(shifts.size()), [&](int i) {
    auto frame = stack.frame(i);
    std::vector<cplx> wave(stack.frame_size());
    std::vector<cplx> spectrum(stack.frame_size());
    for (int l = 0; l < spec.count(); ++l) {
      windowed_product(object.block(l), probe.block(l), n, shifts[i], CutDir::probe_shift, wave);
      plan.forward(l, wave.data(), spectrum.data());
      const double wl = spec.inv_lambda_sq(l);
      for (std::size_t k = 0; k < frame.size(); ++k) frame[k] += wl * std::norm(spectrum[k]);
    }
  });
  return stack;
}

// --- PtychoOperatorFamily -------------------------------------------------------

PtychoOperatorFamily::PtychoOperatorFamily(Form form, BlockVector partner, ShiftList shifts,
                                           WavelengthSpec spec, const ScaledDftPlan* plan)
    : form_(form),
      partner_(std::move(partner)),
      shifts_(std::move(shifts)),
      spec_(std::move(spec)),
      plan_(plan) {
  spec_.validate();
  if (partner_.blocks() != spec_.count())
    throw std::invalid_argument("PtychoOperatorFamily: wavelength count mismatch");
  if (plan_ == nullptr || plan_->side() != partner_.side())
    throw std::invalid_argument("PtychoOperatorFamily: plan mismatch");
  if (shifts_.empty()) throw std::invalid_argument("PtychoOperatorFamily: empty shift set");
}

std::size_t PtychoOperatorFamily::count() const {
  return shifts_.size() * static_cast<std::size_t>(partner_.side()) * partner_.side();
}

std::vector<double> PtychoOperatorFamily::quad_values(const BlockVector& z) const {
  check_same_grid(z, partner_, "quad_values");
  const int n = z.side();
  const std::size_t frame = static_cast<std::size_t>(n) * n;
  std::vector<double> out(count(), 0.0);

  parallel_for(static_cast<int>(shifts_.size()), [&](int i) {
    double* dst = out.data() + frame * i;
    std::vector<cplx> wave(frame);
    std::vector<cplx> spectrum(frame);
    for (int l = 0; l < spec_.count(); ++l) {
      windowed_product(z.block(l), partner_.block(l), n, shifts_[i], dir(), wave);
      plan_->forward(l, wave.data(), spectrum.data());
      const double wl = spec_.inv_lambda_sq(l);
      for (std::size_t k = 0; k < frame; ++k) dst[k] += wl * std::norm(spectrum[k]);
    }
  });
  return out;
}

BlockVector PtychoOperatorFamily::weighted_backproject(const BlockVector& z,
                                                       std::span<const double> c) const {
  if (c.size() != count()) throw std::invalid_argument("weighted_backproject: coefficient count mismatch");
  return backproject(form_, z, partner_, shifts_, spec_, *plan_, c);
}

BlockVector PtychoOperatorFamily::coefficient_backproject(const BlockVector& z,
                                                          const CoefficientFn& coeff) const {
  check_same_grid(z, partner_, "coefficient_backproject");
  const int n = z.side();
  const std::size_t frame = static_cast<std::size_t>(n) * n;
  const int nl = spec_.count();

  std::vector<BlockVector> partial(shifts_.size());
  parallel_for(static_cast<int>(shifts_.size()), [&](int i) {
    std::vector<std::vector<cplx>> spectra(nl, std::vector<cplx>(frame));
    std::vector<double> quad(frame, 0.0);
    std::vector<cplx> wave(frame);
    std::vector<cplx> cut(frame);
    std::vector<cplx> back(frame);

    for (int l = 0; l < nl; ++l) {
      windowed_product(z.block(l), partner_.block(l), n, shifts_[i], dir(), wave);
      plan_->forward(l, wave.data(), spectra[l].data());
      const double wl = spec_.inv_lambda_sq(l);
      for (std::size_t k = 0; k < frame; ++k) quad[k] += wl * std::norm(spectra[l][k]);
    }

    BlockVector contrib(z.blocks(), n);
    for (std::size_t k = 0; k < frame; ++k) quad[k] = coeff(frame * i + k, quad[k]);
    for (int l = 0; l < nl; ++l) {
      for (std::size_t k = 0; k < frame; ++k) spectra[l][k] *= quad[k];
      plan_->adjoint(l, spectra[l].data(), back.data());
      cut_shift(partner_.block(l), n, shifts_[i], dir(), cut);
      auto dst = contrib.block(l);
      const double wl = spec_.inv_lambda_sq(l);
      for (std::size_t k = 0; k < frame; ++k) dst[k] = wl * std::conj(cut[k]) * back[k];
    }
    partial[i] = std::move(contrib);
  });

  BlockVector out(z.blocks(), n);
  for (const auto& contrib : partial) out += contrib;
  return out;
}

double PtychoOperatorFamily::sum_norm_bound() const {
  const int n = partner_.side();
  const std::size_t frame = static_cast<std::size_t>(n) * n;
  double bound = 0.0;
  std::vector<double> overlap(frame);
  for (int l = 0; l < spec_.count(); ++l) {
    std::fill(overlap.begin(), overlap.end(), 0.0);
    auto p = partner_.block(l);
    for (const Shift& m : shifts_) {
      const int sdr = dir() == CutDir::probe_shift ? m.dr : -m.dr;
      const int sdc = dir() == CutDir::probe_shift ? m.dc : -m.dc;
      const int rlo = std::max(0, sdr), rhi = std::min(n, n + sdr);
      const int clo = std::max(0, sdc), chi = std::min(n, n + sdc);
      for (int r = rlo; r < rhi; ++r)
        for (int col = clo; col < chi; ++col)
          overlap[grid_index(r, col, n)] += std::norm(p[grid_index(r - sdr, col - sdc, n)]);
    }
    const double peak = *std::max_element(overlap.begin(), overlap.end());
    const double fnorm = plan_->transform_norm(l);
    bound = std::max(bound, fnorm * fnorm * spec_.inv_lambda_sq(l) * peak);
  }
  return bound;
}

BlockVector backproject(PtychoOperatorFamily::Form form, const BlockVector& z,
                        const BlockVector& partner, const ShiftList& shifts,
                        const WavelengthSpec& spec, const ScaledDftPlan& plan,
                        std::span<const double> coeffs) {
  check_same_grid(z, partner, "backproject");
  const int n = z.side();
  const std::size_t frame = static_cast<std::size_t>(n) * n;
  if (coeffs.size() != shifts.size() * frame)
    throw std::invalid_argument("backproject: coefficient count mismatch");
  const CutDir d = form == PtychoOperatorFamily::Form::object ? CutDir::probe_shift : CutDir::object_shift;

  // Per-shift contributions computed in parallel, combined in shift order so
  // the reduction is independent of the thread count.
  std::vector<BlockVector> partial(shifts.size());
  parallel_for(static_cast<int>(shifts.size()), [&](int i) {
    const double* cm = coeffs.data() + frame * i;
    BlockVector contrib(z.blocks(), n);
    std::vector<cplx> cut(frame);
    std::vector<cplx> wave(frame);
    std::vector<cplx> spectrum(frame);
    std::vector<cplx> back(frame);
    for (int l = 0; l < spec.count(); ++l) {
      windowed_product(z.block(l), partner.block(l), n, shifts[i], d, wave);
      plan.forward(l, wave.data(), spectrum.data());
      for (std::size_t k = 0; k < frame; ++k) spectrum[k] *= cm[k];
      plan.adjoint(l, spectrum.data(), back.data());
      cut_shift(partner.block(l), n, shifts[i], d, cut);
      auto dst = contrib.block(l);
      const double wl = spec.inv_lambda_sq(l);
      for (std::size_t k = 0; k < frame; ++k) dst[k] = wl * std::conj(cut[k]) * back[k];
    }
    partial[i] = std::move(contrib);
  });

  BlockVector out(z.blocks(), n);
  for (const auto& contrib : partial) out += contrib;
  return out;
}

// --- dense oracle ----------------------------------------------------------------

QuadraticFormOracle dense_quadratic_form(const BlockVector& variable, const BlockVector& partner,
                                         Shift m, int k1, int k2, const WavelengthSpec& spec,
                                         PtychoOperatorFamily::Form form, bool assemble_dense) {
  check_same_grid(variable, partner, "dense_quadratic_form");
  spec.validate();
  const int n = variable.side();
  const int nl = variable.blocks();
  const std::size_t d = static_cast<std::size_t>(n) * n;
  const std::size_t dim = d * nl;
  if (assemble_dense && dim > 4096)
    throw std::invalid_argument("dense_quadratic_form: dense assembly gated to dimension <= 4096");

  QuadraticFormOracle oracle;
  if (assemble_dense) oracle.dense = DenseMatrix(static_cast<int>(dim), static_cast<int>(dim));

  const double tau = 2.0 * std::numbers::pi / n;
  std::vector<cplx> vec(d);
  for (int l = 0; l < nl; ++l) {
    const double rho = spec.ratio(l);
    auto p = partner.block(l);
    // measurement vector built directly from its definition
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) {
        const int qr = form == PtychoOperatorFamily::Form::object ? r - m.dr : r + m.dr;
        const int qc = form == PtychoOperatorFamily::Form::object ? c - m.dc : c + m.dc;
        cplx cut{};
        if (qr >= 0 && qr < n && qc >= 0 && qc < n) cut = std::conj(p[grid_index(qr, qc, n)]);
        const double phase = tau * rho * (static_cast<double>(k1) * r + static_cast<double>(k2) * c);
        vec[grid_index(r, c, n)] = cut * cplx(std::cos(phase), std::sin(phase));
      }
    }

    const double wl = spec.inv_lambda_sq(l);
    auto x = variable.block(l);
    cplx inner{};
    for (std::size_t i = 0; i < d; ++i) inner += std::conj(vec[i]) * x[i];
    oracle.value += wl * std::norm(inner);

    if (assemble_dense) {
      const std::size_t off = d * l;
      for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c = 0; c < d; ++c)
          oracle.dense.at(static_cast<int>(off + r), static_cast<int>(off + c)) =
              wl * vec[r] * std::conj(vec[c]);
    }
  }
  return oracle;
}

}  // namespace ptycho
