#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "fracmix/error.hpp"
#include "fracmix/extension_cylinder.hpp"
#include "fracmix/mesh_domain.hpp"

using namespace fracmix;

namespace {

struct Setup {
    std::shared_ptr<const MixedLaplacian> lap;
    std::shared_ptr<const EigenBasis> basis;
    MeshedDomain mesh;
};

Setup make(int n)
{
    Setup st;
    st.mesh = build_mesh(DomainSpec::interval(1.0, n));
    const BoundaryPartition p = build_partition(st.mesh, 1.0, PartitionRule::GrowFromLeft);
    st.lap = std::make_shared<const MixedLaplacian>(assemble(st.mesh, p));
    st.basis = std::make_shared<const EigenBasis>(eigendecompose(*st.lap));
    return st;
}

double mnorm(const Vector& m, const Vector& v) { return std::sqrt(m.dot(v.cwiseAbs2())); }

// Decaying solution of (y^{1-2s} theta')' = t^2 y^{1-2s} theta with theta(0) = 1.
double bessel_profile(double y, double t, double s)
{
    if (y == 0.0) return 1.0;
    const double z = t * y;
    return std::pow(2.0, 1.0 - s) / std::tgamma(s) * std::pow(z, s) * std::cyl_bessel_k(s, z);
}

}  // namespace

TEST_CASE("graded y-grid and exact weight integrals")
{
    const Setup st = make(41);
    const double s = 0.75;
    const double lam1 = st.basis->lambdas(0);
    const CylinderGrid g = make_cylinder_grid(st.lap, s, lam1);
    CHECK(g.y(0) == 0.0);
    CHECK(g.y_max == doctest::Approx(std::log(1e8) / std::sqrt(lam1)));
    CHECK(g.y(g.layers() - 1) == doctest::Approx(g.y_max));
    for (int k = 2; k + 2 < g.layers(); ++k) {
        CHECK((g.y(k + 1) - g.y(k)) / (g.y(k) - g.y(k - 1)) == doctest::Approx(1.15));
    }
    // Dual cells tile [0, Y_max]: total weight is Y_max^{2-2s}/(2-2s).
    CHECK(g.dual_weight.sum() == doctest::Approx(std::pow(g.y_max, 2.0 - 2.0 * s) / (2.0 - 2.0 * s)).epsilon(1e-12));
    // Conductances are reciprocals of int y^{2s-1} over each interval.
    for (int k = 0; k + 1 < g.layers(); ++k) {
        const double integral = (std::pow(g.y(k + 1), 2.0 * s) - std::pow(g.y(k), 2.0 * s)) / (2.0 * s);
        CHECK(g.conductance(k) * integral == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK_THROWS_AS(make_cylinder_grid(st.lap, 1.0, lam1), ValidationError);
    CylinderOptions bad;
    bad.grading = 1.0;
    CHECK_THROWS_AS(make_cylinder_grid(st.lap, s, lam1, bad), ValidationError);
}

TEST_CASE("extension of phi_1 separates and follows the Bessel profile")
{
    const Setup st = make(41);
    const double s = 0.75;
    const CylinderSolver solver(make_cylinder_grid(st.lap, s, st.basis->lambdas(0)));
    const Vector phi1 = st.basis->phis.col(0);
    const ExtensionField U = solver.solve_extension(phi1);
    CHECK(U.warning.empty());
    CHECK(U.cap_ratio < 1e-6);
    const Vector& m = st.basis->mass;
    const double t = std::sqrt(st.basis->lambdas(0));
    double prev = 2.0;
    for (int k = 0; k < solver.grid().layers(); ++k) {
        const Vector col = U.values.col(k);
        const double theta = m.dot(col.cwiseProduct(phi1));
        CHECK(mnorm(m, col - theta * phi1) < 1e-10);
        CHECK(theta <= prev + 1e-14);
        prev = theta;
        CHECK(std::abs(theta - bessel_profile(solver.grid().y(k), t, s)) < 5e-3);
    }
    // Roundoff scales with the largest conductance near y = 0.
    CHECK(solver.stencil_residual(U) < 1e-13 * solver.grid().conductance.maxCoeff());
}

TEST_CASE("calibrated DtN reproduces the spectral operator")
{
    const double s = 0.75;
    std::vector<double> mode2;
    for (int n : {51, 101}) {
        const Setup st = make(n);
        const FractionalOperator op(st.basis, s);
        const CylinderSolver solver(make_cylinder_grid(st.lap, s, st.basis->lambdas(0)));
        const KappaCalibration cal = calibrate_kappa(solver, op);
        CHECK(cal.calibration_error <= 1e-6);
        // The continuum constant is a reference only; the discrete fit should sit close to it.
        CHECK(cal.kappa == doctest::Approx(cal.reference_kappa).epsilon(5e-3));
        CHECK(extension_vs_spectral_error(solver, op, st.basis->phis.col(0), cal.kappa) <= 1e-6);
        mode2.push_back(extension_vs_spectral_error(solver, op, st.basis->phis.col(1), cal.kappa));
        CHECK(mode2.back() <= 5e-2);

        const ExtensionField U = solver.solve_extension(st.basis->phis.col(1));
        const Vector flux = dtn_flux(solver, U, cal.kappa);
        CHECK(flux.size() == op.dofs());
    }
    CHECK(mode2[1] < mode2[0]);
}

TEST_CASE("weighted energy identity and inverse DtN")
{
    const Setup st = make(31);
    const double s = 0.6;
    const CylinderSolver solver(make_cylinder_grid(st.lap, s, st.basis->lambdas(0)));
    Vector u(st.basis->dofs());
    for (int i = 0; i < u.size(); ++i) u(i) = std::sin(0.3 * i) + 0.2;
    const ExtensionField U = solver.solve_extension(u);
    const Vector& m = st.basis->mass;
    const double flux_pair = m.dot(solver.flux(U).cwiseProduct(u));
    CHECK(solver.weighted_energy(U) == doctest::Approx(flux_pair).epsilon(1e-10));
    const Vector f = solver.dtn(u);
    CHECK(mnorm(m, solver.neumann_trace(f) - u) < 1e-9 * mnorm(m, u));
}

TEST_CASE("dtn_flux rejects a grid that does not resolve y = 0")
{
    const Setup st = make(21);
    CylinderOptions coarse;
    coarse.first_step = 0.5;
    coarse.grading = 1.5;
    const CylinderSolver solver(make_cylinder_grid(st.lap, 0.75, st.basis->lambdas(0), coarse));
    const ExtensionField U = solver.solve_extension(st.basis->phis.col(0));
    CHECK_THROWS_AS(dtn_flux(solver, U, 1.0), ValidationError);
}

TEST_CASE("trace inequality constant")
{
    const Setup st = make(41);
    const double s = 0.75;
    const FractionalOperator op(st.basis, s);
    const CylinderSolver solver(make_cylinder_grid(st.lap, s, st.basis->lambdas(0)));
    const KappaCalibration cal = calibrate_kappa(solver, op);
    // With p = 2 the constant is the smallest DtN eigenvalue, lambda_1^s / kappa.
    const QuotientResult c2 = trace_inequality_constant(solver, 2.0);
    CHECK(c2.value == doctest::Approx(op.first_eigenvalue() / cal.kappa).epsilon(1e-6));
    const QuotientResult c4 = trace_inequality_constant(solver, 4.0);
    CHECK(c4.value > 0.0);
    CHECK(std::isfinite(c4.value));
}

TEST_CASE("extension slice CSV")
{
    const Setup st = make(11);
    const CylinderSolver solver(make_cylinder_grid(st.lap, 0.75, st.basis->lambdas(0)));
    const ExtensionField U = solver.solve_extension(st.basis->phis.col(0));
    std::ostringstream os;
    write_extension_slice_csv(os, st.mesh, solver, U, 3);
    CHECK(os.str().find('\n') != std::string::npos);
    CHECK_THROWS_AS(write_extension_slice_csv(os, st.mesh, solver, U, 100000), ValidationError);
}
