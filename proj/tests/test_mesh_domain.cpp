#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "fracmix/error.hpp"
#include "fracmix/mesh_domain.hpp"

using namespace fracmix;

TEST_CASE("interval mesh has uniform nodes and two boundary points")
{
    const MeshedDomain mesh = build_mesh(DomainSpec::interval(2.0, 11));
    REQUIRE(mesh.node_count() == 11);
    CHECK(mesh.spec.spacing(0) == doctest::Approx(0.2));
    CHECK(mesh.coords[5][0] == doctest::Approx(1.0));
    CHECK(mesh.boundary_measure() == doctest::Approx(2.0));
    REQUIRE(mesh.boundary_order.size() == 2);
    CHECK(mesh.boundary_order[0] == 0);
    CHECK(mesh.boundary_order[1] == 10);
}

TEST_CASE("rectangle boundary measure is the perimeter and arc cells sum to it")
{
    const MeshedDomain mesh = build_mesh(DomainSpec::rectangle(2.0, 1.0, 9, 5));
    CHECK(mesh.boundary_measure() == doctest::Approx(6.0));
    double total = 0.0;
    for (double m : mesh.arc_measure) total += m;
    CHECK(total == doctest::Approx(6.0));
    CHECK(mesh.boundary_order.size() == 2 * 9 + 2 * 5 - 4);
    // Counter-clockwise from the origin: the second boundary node sits on the bottom side.
    CHECK(mesh.coords[mesh.boundary_order[1]][1] == 0.0);
    CHECK(mesh.coords[mesh.boundary_order[1]][0] > 0.0);
}

TEST_CASE("degenerate domains are rejected")
{
    CHECK_THROWS_AS(build_mesh(DomainSpec::interval(0.0, 11)), ValidationError);
    CHECK_THROWS_AS(build_mesh(DomainSpec::interval(1.0, 2)), ValidationError);
    CHECK_THROWS_AS(build_mesh(DomainSpec::rectangle(1.0, -1.0, 5, 5)), ValidationError);
}

TEST_CASE("grow-from-left on an interval puts the Dirichlet point at x = 0")
{
    const MeshedDomain mesh = build_mesh(DomainSpec::interval(1.0, 21));
    const BoundaryPartition p = build_partition(mesh, 1.0, PartitionRule::GrowFromLeft);
    REQUIRE(p.dirichlet_nodes == std::vector<int>{0});
    REQUIRE(p.neumann_nodes == std::vector<int>{20});
    CHECK(p.dirichlet_measure(mesh) == doctest::Approx(1.0));
    const BoundaryPartition both = build_partition(mesh, 2.0, PartitionRule::GrowFromLeft);
    CHECK(both.dirichlet_nodes.size() == 2);
    const BoundaryPartition right = build_partition(mesh, 1.0, PartitionRule::GrowFromRight);
    CHECK(right.dirichlet_nodes == std::vector<int>{20});
}

TEST_CASE("grow-from-corner measures on a unit square")
{
    // h = 0.25: corner cell (h + h)/2 = 0.25, edge cells 0.25.
    const MeshedDomain mesh = build_mesh(DomainSpec::rectangle(1.0, 1.0, 5, 5));
    const BoundaryPartition a = build_partition(mesh, 0.25, PartitionRule::GrowFromCorner);
    CHECK(a.dirichlet_nodes == std::vector<int>{0});
    CHECK(a.dirichlet_measure(mesh) == doctest::Approx(0.25));
    const BoundaryPartition b = build_partition(mesh, 0.5, PartitionRule::GrowFromCorner);
    CHECK(b.dirichlet_nodes == std::vector<int>{0, 1});
    CHECK(b.dirichlet_measure(mesh) + b.neumann_measure(mesh) == doctest::Approx(4.0));
}

TEST_CASE("alpha must be positive and at most the boundary measure")
{
    const MeshedDomain mesh = build_mesh(DomainSpec::rectangle(1.0, 1.0, 5, 5));
    CHECK_THROWS_WITH_AS(build_partition(mesh, 0.0, PartitionRule::GrowFromCorner),
                         doctest::Contains("|Sigma_D| > 0"), ValidationError);
    CHECK_THROWS_AS(build_partition(mesh, 4.5, PartitionRule::GrowFromCorner), ValidationError);
    CHECK_THROWS_AS(build_partition(mesh, 1.0, PartitionRule::GrowFromLeft), ValidationError);
}

TEST_CASE("alpha below one cell snaps to one node with a warning")
{
    const MeshedDomain mesh = build_mesh(DomainSpec::rectangle(1.0, 1.0, 5, 5));
    const BoundaryPartition p = build_partition(mesh, 0.01, PartitionRule::GrowFromCorner);
    CHECK(p.dirichlet_nodes.size() == 1);
    CHECK_FALSE(p.warning.empty());
    CHECK(build_partition(mesh, 0.5, PartitionRule::GrowFromCorner).warning.empty());
}

TEST_CASE("property: partitions are disjoint, covering and within one cell of alpha")
{
    const MeshedDomain mesh = build_mesh(DomainSpec::rectangle(1.5, 1.0, 13, 9));
    const double cell = std::max(mesh.spec.spacing(0), mesh.spec.spacing(1));
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const double alpha = cell + (mesh.boundary_measure() - cell) * std::generate_canonical<double, 53>(rng);
        const BoundaryPartition p = build_partition(mesh, alpha, PartitionRule::GrowFromCorner);
        CHECK(p.dirichlet_nodes.size() + p.neumann_nodes.size() == mesh.boundary_order.size());
        for (int d : p.dirichlet_nodes) CHECK(std::find(p.neumann_nodes.begin(), p.neumann_nodes.end(), d) == p.neumann_nodes.end());
        CHECK(std::abs(p.dirichlet_measure(mesh) - alpha) <= cell + 1e-12);
        CHECK(dirichlet_components(mesh, p) == 1);
    }
}

TEST_CASE("nested family validates and non-increasing alphas are rejected")
{
    const MeshedDomain mesh = build_mesh(DomainSpec::rectangle(1.0, 1.0, 9, 9));
    const PartitionFamily fam = build_family(mesh, {0.125, 0.5, 1.0, 2.0, 4.0}, PartitionRule::GrowFromCorner);
    const FamilyReport rep = validate_family(fam);
    CHECK(rep.ok());
    CHECK(rep.max_components == 1);
    CHECK_THROWS_AS(build_family(mesh, {0.5, 0.25}, PartitionRule::GrowFromCorner), ValidationError);
    CHECK_THROWS_AS(build_family(mesh, {0.5, 0.5}, PartitionRule::GrowFromCorner), ValidationError);
}

TEST_CASE("custom partition components are counted cyclically")
{
    const MeshedDomain mesh = build_mesh(DomainSpec::rectangle(1.0, 1.0, 9, 9));
    // Bottom-left stretch and the top side: two separate Dirichlet arcs.
    const BoundaryPartition p = build_partition_where(
        mesh, [](double x, double y) { return (y == 0.0 && x <= 0.25) || y == 1.0; }, "two-arcs");
    CHECK(dirichlet_components(mesh, p) == 2);
    CHECK(p.alpha == doctest::Approx(p.dirichlet_measure(mesh)));
    CHECK_THROWS_AS(build_partition_where(mesh, [](double, double) { return false; }, "empty"), ValidationError);
}

TEST_CASE("domain spec JSON round trip")
{
    const DomainSpec spec = DomainSpec::rectangle(1.25, 0.5, 11, 7);
    const DomainSpec back = domain_spec_from_json(to_json(spec));
    CHECK(back.kind == spec.kind);
    CHECK(back.extents == spec.extents);
    CHECK(back.nodes == spec.nodes);
    CHECK(partition_rule_from_string(to_string(PartitionRule::GrowFromCorner)) == PartitionRule::GrowFromCorner);
    CHECK_THROWS_AS(partition_rule_from_string("sideways"), ValidationError);
}
