#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "fracmix/continuation.hpp"
#include "fracmix/error.hpp"

using namespace fracmix;

namespace {

const SpectralSetup& interval_setup()
{
    static const SpectralSetup st = make_setup(DomainSpec::interval(1.0, 61), 1.0, PartitionRule::GrowFromLeft, 0.75);
    return st;
}

ProblemParams params(double q, double r)
{
    ProblemParams p;
    p.q = q;
    p.r = r;
    p.s = 0.75;
    return p;
}

double sup(const Vector& v) { return v.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("minimal branch is monotone in lambda with negative energies")
{
    const auto& st = interval_setup();
    const Problem pb(st.op, params(0.5, 2.0), 1.0);
    const Branch br = continue_minimal_branch(pb, {0.05, 0.2, 0.4, 0.8});
    REQUIRE(br.points.size() == 4);
    CHECK(br.truncation.empty());
    CHECK(br.max_order_violation <= 1e-8);
    for (std::size_t k = 1; k < br.points.size(); ++k) {
        CHECK((br.points[k - 1].u - br.points[k].u).maxCoeff() <= 1e-8);
    }
    for (const auto& p : br.points) {
        CHECK(p.energy < 0.0);
        CHECK(p.kind == SolutionKind::Minimal);
        CHECK(p.residual <= 1e-8);
    }
    for (double nu : br.nu1) CHECK(nu >= -1e-6);
}

TEST_CASE("small-lambda tail is controlled by the supersolution")
{
    const auto& st = interval_setup();
    const Problem pb(st.op, params(0.5, 2.0), 1.0);
    const Vector g = solve_torsion(st.op).u;
    const Branch br = continue_minimal_branch(pb, {1e-4, 1e-3, 1e-2});
    REQUIRE(br.points.size() == 3);
    double prev = 0.0;
    for (const auto& p : br.points) {
        const Supersolution s = build_supersolution(p.params, g);
        CHECK(p.sup_norm <= s.m * sup(g) * (1.0 + 1e-10));
        CHECK(p.sup_norm > prev);
        prev = p.sup_norm;
    }
    CHECK(br.points.front().sup_norm < 1e-6);
}

TEST_CASE("minimal branch argument checks")
{
    const auto& st = interval_setup();
    const Problem pb(st.op, params(0.5, 2.0));
    CHECK_THROWS_AS(continue_minimal_branch(pb, {}), ValidationError);
    CHECK_THROWS_AS(continue_minimal_branch(pb, {0.2, 0.1}), ValidationError);
    CHECK_THROWS_AS(continue_minimal_branch(Problem(st.op, params(1.0, 2.0)), {0.1}), ValidationError);
}

TEST_CASE("minimal branch stops beyond the threshold")
{
    const auto& st = interval_setup();
    const Problem pb(st.op, params(0.5, 2.0));
    ContinuationOptions o;
    o.monotone.max_iterations = 20000;
    const Branch br = continue_minimal_branch(pb, {0.5, 1.5}, o);
    CHECK(br.points.size() == 1);
    CHECK_FALSE(br.truncation.empty());
}

TEST_CASE("q = 1: the threshold bracket contains lambda_1^s")
{
    const auto& st = interval_setup();
    const Problem pb(st.op, params(1.0, 1.5));
    const double lam1 = st.op.first_eigenvalue();
    LambdaStarOptions o;
    o.resolution = 1e-3 * lam1;
    const LambdaStarEstimate est = estimate_lambda_star(pb, o);
    CHECK(est.resolved);
    CHECK(est.lower < lam1);
    CHECK(est.upper >= lam1);
    CHECK(est.width <= o.resolution);
    CHECK(est.upper_certificate.certified_failure());
    REQUIRE(est.nearest_solution.has_value());
    CHECK(est.nearest_solution->u.minCoeff() > 0.0);

    // Reproducible bracket.
    const LambdaStarEstimate again = estimate_lambda_star(pb, o);
    CHECK(again.lower == est.lower);
    CHECK(again.upper == est.upper);
}

TEST_CASE("q < 1: threshold bracket, certificates and bisection arithmetic")
{
    const auto& st = interval_setup();
    const Problem pb(st.op, params(0.5, 2.0), 1.0);
    LambdaStarOptions o;
    o.resolution = 1e-3;
    const LambdaStarEstimate est = estimate_lambda_star(pb, o);
    REQUIRE(est.resolved);
    CHECK(est.lower < est.upper);
    // Regression baseline for this mesh (n = 61): Lambda is close to 1.0378.
    CHECK(est.lower == doctest::Approx(1.0378).epsilon(2e-3));
    CHECK(est.upper_certificate.certified_failure());
    CHECK_FALSE(est.upper_certificate.supersolution_feasible);
    CHECK(est.lower_certificate.success);

    LambdaStarOptions half = o;
    half.resolution = 0.5e-3;
    const LambdaStarEstimate finer = estimate_lambda_star(pb, half);
    CHECK(finer.width <= est.width / 2.0 * (1.0 + 1e-9));
    CHECK(finer.width >= est.width / 4.0 * (1.0 - 1e-9));
    CHECK(finer.lower >= est.lower);
    CHECK(finer.upper <= est.upper);
    CHECK_THROWS_AS(estimate_lambda_star(pb, LambdaStarOptions{0.0}), ValidationError);
}

TEST_CASE("q = 1 bifurcation branch")
{
    const auto& st = interval_setup();
    const double r = 1.5;
    const Problem pb(st.op, params(1.0, r));
    const double lam1 = st.op.first_eigenvalue();
    std::vector<double> grid;
    for (double d = 1e-3; d < 1.0; d *= 1.5) grid.push_back(lam1 - d * lam1);
    grid.push_back(1e-3 * lam1);
    const Branch br = bifurcation_branch_q1(pb, grid);
    REQUIRE(br.truncation.empty());
    REQUIRE(br.points.size() == grid.size());
    // Sorted from the bifurcation point toward lambda = 0, amplitudes increase.
    for (std::size_t k = 1; k < br.points.size(); ++k) {
        CHECK(br.points[k].params.lambda < br.points[k - 1].params.lambda);
        CHECK(br.points[k].sup_norm > br.points[k - 1].sup_norm);
    }
    const SolutionRecord& near = br.points.front();
    const double c = galerkin_amplitude(st.op, near.params.lambda, r);
    CHECK(near.sup_norm == doctest::Approx(c * sup(st.op.basis().phis.col(0))).epsilon(0.1));
    CHECK(br.points.back().params.lambda == doctest::Approx(1e-3 * lam1));
    CHECK(br.points.back().u.minCoeff() > 0.0);
    CHECK_THROWS_AS(bifurcation_branch_q1(pb, {1.1 * lam1}), ValidationError);
    CHECK_THROWS_AS(bifurcation_branch_q1(Problem(st.op, params(0.5, 2.0)), {0.1}), ValidationError);
}

TEST_CASE("threshold decreases along a shrinking Dirichlet family")
{
    const MeshedDomain mesh = build_mesh(DomainSpec::rectangle(1.0, 1.0, 9, 9));
    double prev = 0.0;
    for (double alpha : {0.125, 0.5, 2.0}) {
        const SpectralSetup st = make_setup(mesh, build_partition(mesh, alpha, PartitionRule::GrowFromCorner), 0.75);
        const Problem pb(st.op, params(0.5, 2.0), alpha);
        LambdaStarOptions o;
        o.resolution = 1e-3 * st.op.first_eigenvalue();
        const LambdaStarEstimate est = estimate_lambda_star(pb, o);
        REQUIRE(est.resolved);
        CHECK(est.lower > prev);
        prev = est.upper;
    }
}

TEST_CASE("alpha sweep: singleton table and deterministic parallel fan-out")
{
    const MeshedDomain mesh = build_mesh(DomainSpec::rectangle(1.0, 1.0, 9, 9));
    const ProblemParams p = params(0.5, 2.0);
    AlphaSweepOptions o;
    o.lambda_fraction = 0.25;
    const AlphaSweepResult one = alpha_sweep(build_family(mesh, {1.0}, PartitionRule::GrowFromCorner), p, o);
    REQUIRE(one.rows.size() == 1);
    CHECK(one.rows[0].error.empty());
    CHECK(one.rows[0].mp_status == "found");

    const PartitionFamily fam = build_family(mesh, {0.25, 1.0, 4.0}, PartitionRule::GrowFromCorner);
    const AlphaSweepResult serial = alpha_sweep(fam, p, o);
    o.jobs = 3;
    const AlphaSweepResult parallel = alpha_sweep(fam, p, o);
    std::ostringstream a, b;
    write_sweep_csv(a, serial);
    write_sweep_csv(b, parallel);
    CHECK(a.str() == b.str());
    CHECK(serial.lambda1_decreasing);
    CHECK(serial.lambda_star_decreasing);
    CHECK(serial.min_sup_decreasing);
}

TEST_CASE("branch CSV and JSON records")
{
    const auto& st = interval_setup();
    const Problem pb(st.op, params(0.5, 2.0));
    const Branch br = continue_minimal_branch(pb, {0.3});
    std::ostringstream os;
    write_branch_csv(os, br);
    const std::string text = os.str();
    CHECK(text.rfind("lambda,sup_norm,hs_norm,energy,residual,nu1,kind\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 2);
    const nlohmann::json j = to_json(br.points[0], true);
    CHECK(j.at("kind") == "minimal");
    CHECK(j.at("u").size() == static_cast<std::size_t>(st.op.dofs()));
}
