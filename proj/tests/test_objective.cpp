#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "ptycho/forward.hpp"
#include "ptycho/objective.hpp"

using namespace ptycho;

namespace {

DenseMatrix identity(int dim) {
  DenseMatrix m(dim, dim);
  for (int i = 0; i < dim; ++i) m.at(i, i) = 1.0;
  return m;
}

// family with a single 1x1 identity operator on a one-pixel grid
DenseQuadraticFamily scalar_identity_family() {
  std::vector<DenseMatrix> ops;
  ops.push_back(identity(1));
  return {1, 1, std::move(ops)};
}

}  // namespace

TEST_CASE("amplitude loss vanishes exactly at a perfect fit") {
  Rng rng(3);
  const auto inst = oracle::random_instance(rng, 4, 2, 2, 3);
  const ScaledDftPlan plan(4, inst.spec);
  const PtychoOperatorFamily family(PtychoOperatorFamily::Form::object, inst.probe, inst.shifts,
                                    inst.spec, &plan);
  const std::vector<double> y = family.quad_values(inst.object);
  CHECK(amplitude_loss(family, inst.object, y, 1e-8) == doctest::Approx(0.0).epsilon(1e-12));

  const BlockVector g = amplitude_loss_grad(family, inst.object, y, 1e-8);
  CHECK(g.norm_sq() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("scalar residual arithmetic") {
  const auto family = scalar_identity_family();
  BlockVector z(1, 1);
  z[0] = cplx(2.0, 0.0);  // z* Q z = 4
  const std::vector<double> y = {1.0};
  CHECK(amplitude_loss(family, z, y, 0.0) == doctest::Approx(1.0));  // (2 - 1)^2

  // coefficient 1 - sqrt(y)/sqrt(q) = 1/2, gradient = 1/2 * Q z = 1
  const BlockVector g = amplitude_loss_grad(family, z, y, 0.0);
  CHECK(g[0].real() == doctest::Approx(1.0));
  CHECK(g[0].imag() == doctest::Approx(0.0));
}

TEST_CASE("quadratic values match the dense measurement oracle") {
  Rng rng(17);
  const auto inst = oracle::random_instance(rng, 4, 2, 2, 3);
  const ScaledDftPlan plan(4, inst.spec);
  const PtychoOperatorFamily family(PtychoOperatorFamily::Form::object, inst.probe, inst.shifts,
                                    inst.spec, &plan);
  const std::vector<double> q = family.quad_values(inst.object);

  std::size_t j = 0;
  for (const Shift& m : inst.shifts) {
    for (int k1 = 0; k1 < 4; ++k1) {
      for (int k2 = 0; k2 < 4; ++k2, ++j) {
        const auto ref = dense_quadratic_form(inst.object, inst.probe, m, k1, k2, inst.spec,
                                              PtychoOperatorFamily::Form::object, false);
        CHECK(q[j] == doctest::Approx(ref.value).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("amplitude loss gradient passes finite differences") {
  Rng rng(29);
  const auto inst = oracle::random_instance(rng, 8, 2, 4, 4);
  const ScaledDftPlan plan(8, inst.spec);
  const PtychoOperatorFamily family(PtychoOperatorFamily::Form::object, inst.probe, inst.shifts,
                                    inst.spec, &plan);
  const std::vector<double> y =
      simulate(oracle::random_stack(rng, 2, 8), inst.probe, inst.shifts, inst.spec, plan).values;
  const double eps = 1e-3;

  const auto f = [&](const BlockVector& v) { return amplitude_loss(family, v, y, eps); };
  for (int trial = 0; trial < 10; ++trial) {
    const BlockVector z = oracle::random_stack(rng, 2, 8);
    BlockVector u = oracle::random_stack(rng, 2, 8);
    u *= 1.0 / u.norm();
    const double expected = 2.0 * dot(amplitude_loss_grad(family, z, y, eps), u).real();
    const double measured = oracle::directional_derivative(f, z, u);
    CHECK(measured == doctest::Approx(expected).epsilon(1e-6));
  }
}

TEST_CASE("amplitude loss is invariant under a global phase") {
  Rng rng(31);
  const auto inst = oracle::random_instance(rng, 4, 3, 2, 3);
  const ScaledDftPlan plan(4, inst.spec);
  const PtychoOperatorFamily family(PtychoOperatorFamily::Form::object, inst.probe, inst.shifts,
                                    inst.spec, &plan);
  const std::vector<double> y =
      simulate(oracle::random_stack(rng, 3, 4), inst.probe, inst.shifts, inst.spec, plan).values;

  const BlockVector z = oracle::random_stack(rng, 3, 4);
  const double base = amplitude_loss(family, z, y, 1e-8);
  for (double theta : {0.3, 1.7, -2.4}) {
    BlockVector rotated = z;
    rotated *= cplx(std::cos(theta), std::sin(theta));
    CHECK(amplitude_loss(family, rotated, y, 1e-8) == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("Tikhonov term and gradient") {
  BlockVector zero(2, 2);
  CHECK(tikhonov(zero) == 0.0);
  CHECK(tikhonov_grad(zero).norm_sq() == 0.0);

  BlockVector z(1, 1);
  z[0] = cplx(1.0, 1.0);
  CHECK(tikhonov(z) == doctest::Approx(2.0));
  CHECK(tikhonov_grad(z)[0] == cplx(1.0, 1.0));

  Rng rng(7);
  const BlockVector r = oracle::random_stack(rng, 2, 4);
  BlockVector u = oracle::random_stack(rng, 2, 4);
  u *= 1.0 / u.norm();
  const double measured =
      oracle::directional_derivative([](const BlockVector& v) { return tikhonov(v); }, r, u);
  CHECK(measured == doctest::Approx(2.0 * dot(tikhonov_grad(r), u).real()).epsilon(1e-6));
}

TEST_CASE("smoothness term, gradient, and coupling matrix") {
  SUBCASE("equal blocks have zero penalty and gradient") {
    BlockVector z(3, 2);
    for (int l = 0; l < 3; ++l)
      for (int i = 0; i < 4; ++i) z.block(l)[i] = cplx(0.3, -0.2);
    const std::vector<double> kappa = {1.0, 2.0};
    CHECK(smoothness(z, kappa) == doctest::Approx(0.0));
    const SmoothnessCoupling coupling(kappa, 3);
    CHECK(smoothness_grad(z, coupling).norm_sq() == doctest::Approx(0.0));
  }

  SUBCASE("two scalar blocks") {
    BlockVector z(2, 1);
    z.block(0)[0] = cplx{};
    z.block(1)[0] = cplx(1.0, 0.0);
    CHECK(smoothness(z, {1.0}) == doctest::Approx(1.0));
    const SmoothnessCoupling coupling({1.0}, 2);
    const BlockVector g = smoothness_grad(z, coupling);
    CHECK(g.block(0)[0] == cplx(-1.0, 0.0));
    CHECK(g.block(1)[0] == cplx(1.0, 0.0));
  }

  SUBCASE("value matches the direct difference sum") {
    Rng rng(41);
    const BlockVector z = oracle::random_stack(rng, 4, 4);
    const std::vector<double> kappa = {0.5, 1.5, 2.0};
    KahanSum direct;
    for (int l = 0; l + 1 < 4; ++l) {
      for (std::size_t i = 0; i < z.grid_size(); ++i)
        direct.add(kappa[l] * std::norm(z.block(l + 1)[i] - z.block(l)[i]));
    }
    CHECK(smoothness(z, kappa) == doctest::Approx(direct.value()).epsilon(1e-12));
  }

  SUBCASE("finite differences") {
    Rng rng(43);
    const std::vector<double> kappa = {1.0, 3.0};
    const SmoothnessCoupling coupling(kappa, 3);
    const BlockVector z = oracle::random_stack(rng, 3, 4);
    BlockVector u = oracle::random_stack(rng, 3, 4);
    u *= 1.0 / u.norm();
    const double measured = oracle::directional_derivative(
        [&](const BlockVector& v) { return smoothness(v, kappa); }, z, u);
    CHECK(measured ==
          doctest::Approx(2.0 * dot(smoothness_grad(z, coupling), u).real()).epsilon(1e-6));
  }

  SUBCASE("wrong kappa length is rejected") {
    BlockVector z(3, 2);
    CHECK_THROWS_AS(smoothness(z, {1.0}), std::invalid_argument);
  }
}

TEST_CASE("coupling norm closed forms and homogeneity") {
  CHECK(coupling_norm({1.0}, 2) == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(coupling_norm({1.0, 1.0}, 3) == doctest::Approx(3.0).epsilon(1e-10));
  CHECK(coupling_norm({}, 1) == 0.0);

  Rng rng(13);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> kappa = {rng.uniform(0.1, 2.0), rng.uniform(0.1, 2.0),
                                 rng.uniform(0.1, 2.0)};
    const double base = coupling_norm(kappa, 4);
    const double c = rng.uniform(0.5, 3.0);
    for (double& k : kappa) k *= c;
    CHECK(coupling_norm(kappa, 4) == doctest::Approx(c * base).epsilon(1e-10));
  }
}

TEST_CASE("regularized objective combines the pieces linearly") {
  Rng rng(53);
  const auto inst = oracle::random_instance(rng, 4, 2, 2, 3);
  const ScaledDftPlan plan(4, inst.spec);
  const PtychoOperatorFamily family(PtychoOperatorFamily::Form::object, inst.probe, inst.shifts,
                                    inst.spec, &plan);
  const std::vector<double> y = family.quad_values(inst.object);

  SUBCASE("zero weights reduce to the amplitude loss") {
    const RegularizedObjective plain(family, y, {1e-8, 0.0, 0.0, {}}, 2);
    const BlockVector z = oracle::random_stack(rng, 2, 4);
    CHECK(plain.value(z) == doctest::Approx(amplitude_loss(family, z, y, 1e-8)));
  }

  SUBCASE("at a perfect fit only the regularizers remain") {
    const RegularizedObjective reg(family, y, {1e-8, 0.5, 0.25, {}}, 2);
    const double expected = 0.5 * tikhonov(inst.object) + 0.25 * smoothness(inst.object, {1.0});
    CHECK(reg.value(inst.object) == doctest::Approx(expected).epsilon(1e-9));
  }

  SUBCASE("gradient passes finite differences") {
    const RegularizedObjective reg(family, y, {1e-3, 0.3, 0.2, {}}, 2);
    for (int trial = 0; trial < 10; ++trial) {
      const BlockVector z = oracle::random_stack(rng, 2, 4);
      BlockVector u = oracle::random_stack(rng, 2, 4);
      u *= 1.0 / u.norm();
      const double measured = oracle::directional_derivative(
          [&](const BlockVector& v) { return reg.value(v); }, z, u);
      CHECK(measured == doctest::Approx(2.0 * dot(reg.wgrad(z), u).real()).epsilon(1e-6));
    }
  }
}

TEST_CASE("hessian bound closed forms") {
  SUBCASE("no measurements, Tikhonov only") {
    const DenseQuadraticFamily empty(1, 1, {});
    CHECK(hessian_bound(empty, {1e-8, 1.0, 0.0, {}}, 1) == doctest::Approx(1.0));
  }
  SUBCASE("single identity operator") {
    const auto family = scalar_identity_family();
    CHECK(hessian_bound(family, {1e-8, 0.0, 0.0, {}}, 1) == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("overlap bound dominates the dense operator-sum norm") {
  Rng rng(59);
  for (int trial = 0; trial < 3; ++trial) {
    const auto inst = oracle::random_instance(rng, 4, 2, 2, 3);
    const ScaledDftPlan plan(4, inst.spec);
    for (auto form : {PtychoOperatorFamily::Form::object, PtychoOperatorFamily::Form::probe}) {
      const auto& partner = form == PtychoOperatorFamily::Form::object ? inst.probe : inst.object;
      const PtychoOperatorFamily family(form, partner, inst.shifts, inst.spec, &plan);

      const auto ops = oracle::dense_family_ops(inst, form);
      DenseMatrix sum(ops.front().rows, ops.front().cols);
      for (const auto& q : ops)
        for (std::size_t i = 0; i < q.a.size(); ++i) sum.a[i] += q.a[i];
      const double dense_norm = oracle::eigen_hermitian_max_eig(sum);
      CHECK(dense_norm <= family.sum_norm_bound() + 1e-10);
    }
  }
}

TEST_CASE("second differences respect the hessian bound") {
  Rng rng(61);
  const auto inst = oracle::random_instance(rng, 4, 2, 2, 3);
  const ScaledDftPlan plan(4, inst.spec);
  const PtychoOperatorFamily family(PtychoOperatorFamily::Form::object, inst.probe, inst.shifts,
                                    inst.spec, &plan);
  const std::vector<double> y =
      simulate(oracle::random_stack(rng, 2, 4), inst.probe, inst.shifts, inst.spec, plan).values;
  const RegularizedObjective objective(family, y, {1e-2, 0.1, 0.05, {}}, 2);
  const double bound = objective.hessian_bound();

  const double h = 1e-3;
  for (int trial = 0; trial < 100; ++trial) {
    const BlockVector z = oracle::random_stack(rng, 2, 4);
    const BlockVector u = oracle::random_stack(rng, 2, 4);
    BlockVector plus = z, minus = z;
    plus.axpy(cplx(h, 0.0), u);
    minus.axpy(cplx(-h, 0.0), u);
    const double second =
        (objective.value(plus) - 2.0 * objective.value(z) + objective.value(minus)) / (h * h);
    const double cap = 2.0 * bound * u.norm_sq();
    CHECK(second <= cap * (1.0 + 1e-4) + 1e-8);
  }
}

TEST_CASE("dense family rejects oversized instances and mismatched lengths") {
  CHECK_THROWS_AS(DenseQuadraticFamily(2, 64, {}), std::invalid_argument);

  const auto family = scalar_identity_family();
  BlockVector z(1, 1);
  const std::vector<double> wrong = {1.0, 2.0};
  CHECK_THROWS_AS(amplitude_loss(family, z, wrong, 1e-8), std::invalid_argument);
}

TEST_CASE("dense family backprojection is linear and self-adjoint") {
  Rng rng(67);
  std::vector<DenseMatrix> ops;
  for (int j = 0; j < 3; ++j) {
    // Hermitian PSD rank-one operators
    DenseMatrix q(4, 4);
    std::vector<cplx> a(4);
    for (auto& e : a) e = cplx(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) q.at(r, c) = a[r] * std::conj(a[c]);
    ops.push_back(std::move(q));
  }
  const DenseQuadraticFamily family(1, 2, std::move(ops));

  const BlockVector u = oracle::random_stack(rng, 1, 2);
  const BlockVector v = oracle::random_stack(rng, 1, 2);
  const std::vector<double> c = {0.7, -0.3, 1.1};

  // <u, sum c_j Q_j v> = conj(<v, sum c_j Q_j u>) for Hermitian Q_j and real c
  const cplx lhs = dot(u, family.weighted_backproject(v, c));
  const cplx rhs = std::conj(dot(v, family.weighted_backproject(u, c)));
  CHECK(lhs.real() == doctest::Approx(rhs.real()).epsilon(1e-10));
  CHECK(lhs.imag() == doctest::Approx(rhs.imag()).epsilon(1e-10));

  // PSD within roundoff
  const std::vector<double> q = family.quad_values(u);
  for (double val : q) CHECK(val >= -1e-12 * u.norm_sq());
}
