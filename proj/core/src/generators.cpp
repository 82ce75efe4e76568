#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

#include "ptycho/forward.hpp"
#include "ptycho/rng.hpp"

namespace ptycho {

double fermat_golden_angle() {
  const double inv_phi = 2.0 / (1.0 + std::sqrt(5.0));
  return 2.0 * std::numbers::pi * inv_phi * inv_phi;
}

ShiftList fermat_shifts(int side, int support, double spacing) {
  if (support < 1 || support > side) throw std::invalid_argument("fermat_shifts: support must be in [1, side]");
  if (!(spacing > 0.0)) throw std::invalid_argument("fermat_shifts: spacing must be > 0");

  const double angle = fermat_golden_angle();
  const long k_max =
      static_cast<long>(std::ceil(0.5 * std::pow((side - support) / spacing, 2.0)));
  // The probe center sits at (support-1)/2 inside its corner support; the
  // spiral moves that center around the grid center.
  const double offset = side / 2.0 - (support - 1) / 2.0;

  ShiftList shifts;
  std::set<std::pair<int, int>> seen;
  for (long k = 0; k <= k_max; ++k) {
    const double r = spacing * std::sqrt(static_cast<double>(k));
    const double phi = static_cast<double>(k) * angle;
    // lround rounds halfway cases away from zero on every platform
    const int dr = static_cast<int>(std::lround(r * std::sin(phi) + offset));
    const int dc = static_cast<int>(std::lround(r * std::cos(phi) + offset));
    if (dr < 0 || dc < 0 || dr > side - support || dc > side - support) continue;
    if (seen.insert({dr, dc}).second) shifts.push_back({dr, dc});
  }
  if (shifts.empty()) throw std::runtime_error("fermat_shifts: no admissible shift positions");
  return shifts;
}

BlockVector gaussian_probe(int side, int support, std::span<const double> spectral_weights,
                           double variance) {
  if (support < 1 || support > side)
    throw std::invalid_argument("gaussian_probe: support must be in [1, side]");
  if (spectral_weights.empty()) throw std::invalid_argument("gaussian_probe: no spectral weights");
  double total = 0.0;
  for (double w : spectral_weights) {
    if (!(w > 0.0)) throw std::invalid_argument("gaussian_probe: weights must be > 0");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("gaussian_probe: weights must sum to 1");

  const double var = variance > 0.0 ? variance : static_cast<double>(support) * support / 20.0;
  const double mu = (support - 1) / 2.0;

  std::vector<double> g(static_cast<std::size_t>(support) * support);
  double energy = 0.0;
  for (int r = 0; r < support; ++r) {
    for (int c = 0; c < support; ++c) {
      const double dr = r - mu, dc = c - mu;
      const double v = std::exp(-(dr * dr + dc * dc) / (2.0 * var));
      g[static_cast<std::size_t>(r) * support + c] = v;
      energy += v * v;
    }
  }
  const double inv_norm = 1.0 / std::sqrt(energy);

  BlockVector probe(static_cast<int>(spectral_weights.size()), side);
  for (int l = 0; l < probe.blocks(); ++l) {
    const double scale = std::sqrt(spectral_weights[l]) * inv_norm;
    auto block = probe.block(l);
    for (int r = 0; r < support; ++r)
      for (int c = 0; c < support; ++c)
        block[grid_index(r, c, side)] = scale * g[static_cast<std::size_t>(r) * support + c];
  }
  return probe;
}

BlockVector stepped_disk_probe(int side, int support, int blocks) {
  if (support < 1 || support > side)
    throw std::invalid_argument("stepped_disk_probe: support must be in [1, side]");
  if (blocks < 1) throw std::invalid_argument("stepped_disk_probe: blocks must be >= 1");

  const double mu = (support - 1) / 2.0;
  const double r_inner = std::sqrt(0.3) * support / 2.0;
  const double r_outer = std::sqrt(0.6) * support / 2.0;

  std::vector<double> g(static_cast<std::size_t>(support) * support);
  double energy = 0.0;
  for (int r = 0; r < support; ++r) {
    for (int c = 0; c < support; ++c) {
      const double rad = std::hypot(r - mu, c - mu);
      const double v = rad <= r_inner ? 2.3 : (rad <= r_outer ? 1.3 : 0.3);
      g[static_cast<std::size_t>(r) * support + c] = v;
      energy += v * v;
    }
  }
  const double scale = 1.0 / (std::sqrt(static_cast<double>(blocks)) * std::sqrt(energy));

  BlockVector probe(blocks, side);
  for (int l = 0; l < blocks; ++l) {
    auto block = probe.block(l);
    for (int r = 0; r < support; ++r)
      for (int c = 0; c < support; ++c)
        block[grid_index(r, c, side)] = scale * g[static_cast<std::size_t>(r) * support + c];
  }
  return probe;
}

namespace {

struct Ellipse {
  double value, a, b, x0, y0, phi_deg;
};

// Ten-ellipse head phantom, contrast-enhanced intensity variant.
constexpr Ellipse kPhantom[] = {
    {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
    {-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
    {-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0},
    {-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0},
    {0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0},
    {0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0},
    {0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0},
    {0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0},
    {0.1, 0.0230, 0.0230, 0.0, -0.605, 0.0},
    {0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0},
};

double phantom_at(double x, double y) {
  double v = 0.0;
  for (const Ellipse& e : kPhantom) {
    const double phi = e.phi_deg * std::numbers::pi / 180.0;
    const double xr = std::cos(phi) * (x - e.x0) + std::sin(phi) * (y - e.y0);
    const double yr = -std::sin(phi) * (x - e.x0) + std::cos(phi) * (y - e.y0);
    if ((xr / e.a) * (xr / e.a) + (yr / e.b) * (yr / e.b) <= 1.0) v += e.value;
  }
  return v;
}

double structured_at(double x, double y) {
  const double rad = std::hypot(x, y);
  const double rings = rad <= 0.85 ? 0.5 + 0.5 * std::cos(10.0 * std::numbers::pi * rad) : 0.0;
  const double grad = (x + 1.0) / 2.0;
  const double box = (x >= -0.55 && x <= -0.15 && y >= 0.2 && y <= 0.6) ? 1.0 : 0.0;
  const double disc = std::hypot(x - 0.45, y + 0.45) <= 0.18 ? 0.8 : 0.0;
  return std::clamp(0.45 * grad + 0.35 * rings + 0.3 * box + disc, 0.0, 1.0);
}

}  // namespace

BlockVector synthetic_object(int side, int blocks, double perturbation) {
  if (side < 16) throw std::invalid_argument("synthetic_object: side must be >= 16");
  if (blocks < 1) throw std::invalid_argument("synthetic_object: blocks must be >= 1");

  BlockVector object(blocks, side);
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      const double x = (2.0 * c + 1.0) / side - 1.0;
      const double y = 1.0 - (2.0 * r + 1.0) / side;
      const cplx base(phantom_at(x, y), structured_at(x, y));
      const double bump = std::sin(std::numbers::pi * (x + 1.0) / 2.0) *
                          std::sin(std::numbers::pi * (y + 1.0) / 2.0);
      for (int l = 0; l < blocks; ++l) {
        object.at(l, r, c) = base * (1.0 + perturbation * l * bump);
      }
    }
  }

  // Pin the root-mean-square modulus to 0.65 so measurement scales (and the
  // Poisson noise level they imply) do not depend on the pattern details.
  const double rms_target = 0.65;
  const double norm = object.norm();
  if (norm > 0.0) object *= rms_target * std::sqrt(static_cast<double>(object.size())) / norm;
  return object;
}

MeasurementStack add_poisson_noise(const MeasurementStack& clean, double photons, std::uint64_t seed) {
  if (!(photons > 0.0)) throw std::invalid_argument("add_poisson_noise: photons must be > 0");
  clean.validate();

  // Photons are budgeted per pixel: d is the total pixel count side^2.
  const double d = static_cast<double>(clean.side) * clean.side;
  const double gain = photons / d;

  Rng rng(seed);
  MeasurementStack noisy = clean;
  for (double& v : noisy.values) v = static_cast<double>(rng.poisson(gain * v)) / gain;
  return noisy;
}

}  // namespace ptycho
