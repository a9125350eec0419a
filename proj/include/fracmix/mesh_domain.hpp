#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

namespace fracmix {

enum class DomainKind { Interval, Rectangle };

/// Axis-aligned domain [0, L_x] (x [0, L_y]) sampled by a uniform tensor grid.
struct DomainSpec {
    DomainKind kind = DomainKind::Interval;
    std::vector<double> extents;  // one length per axis
    std::vector<int> nodes;       // nodes per axis, >= 3

    static DomainSpec interval(double length, int n);
    static DomainSpec rectangle(double lx, double ly, int nx, int ny);

    int dimension() const { return kind == DomainKind::Interval ? 1 : 2; }
    double spacing(int axis) const;
    /// |dOmega|: 2 (counting measure) for an interval, the perimeter for a rectangle.
    double boundary_measure() const;
    /// Throws ValidationError on degenerate extents or node counts.
    void validate() const;
};

struct MeshedDomain {
    DomainSpec spec;
    std::vector<std::array<double, 2>> coords;  // y = 0 in 1D
    std::vector<char> on_boundary;
    /// Boundary nodes in counterclockwise order starting at the origin.
    std::vector<int> boundary_order;
    /// Arc position of each entry of boundary_order.
    std::vector<double> arc_position;
    /// Boundary measure attributed to each entry of boundary_order (adjacent half cells).
    std::vector<double> arc_measure;

    std::size_t node_count() const { return coords.size(); }
    int nx() const { return spec.nodes[0]; }
    int ny() const { return spec.dimension() == 2 ? spec.nodes[1] : 1; }
    int node_id(int i, int j = 0) const { return i + nx() * j; }
    int axis_index(int node, int axis) const { return axis == 0 ? node % nx() : node / nx(); }
    /// Quadrature weight of the node's cell (product of per-axis half-cell weights).
    double cell_measure(int node) const;
    double boundary_measure() const { return spec.boundary_measure(); }
    /// Measure attributed to a single boundary node.
    double boundary_node_measure(int node) const;
};

MeshedDomain build_mesh(const DomainSpec& spec);

enum class PartitionRule { GrowFromLeft, GrowFromRight, GrowFromCorner, Custom };

std::string to_string(PartitionRule rule);
PartitionRule partition_rule_from_string(const std::string& name);

struct BoundaryPartition {
    double alpha = 0.0;
    PartitionRule rule = PartitionRule::Custom;
    std::string layout;
    std::vector<int> dirichlet_nodes;  // sorted
    std::vector<int> neumann_nodes;    // sorted
    std::vector<char> is_dirichlet;    // indexed by node id
    /// Set when alpha was smaller than one boundary cell and got snapped.
    std::string warning;

    double dirichlet_measure(const MeshedDomain& mesh) const;
    double neumann_measure(const MeshedDomain& mesh) const;
};

/// Dirichlet set = boundary nodes whose arc position (under the rule's ordering) is < alpha.
BoundaryPartition build_partition(const MeshedDomain& mesh, double alpha, PartitionRule rule);

/// Dirichlet set given by a predicate on boundary nodes; alpha is the resulting measure.
BoundaryPartition build_partition_where(const MeshedDomain& mesh,
                                        const std::function<bool(double x, double y)>& dirichlet,
                                        std::string layout);

struct PartitionFamily {
    MeshedDomain mesh;
    std::vector<double> alphas;  // strictly increasing
    PartitionRule rule = PartitionRule::GrowFromCorner;
    std::vector<BoundaryPartition> members;
};

/// Throws ValidationError if alphas are not strictly increasing.
PartitionFamily build_family(const MeshedDomain& mesh, std::vector<double> alphas,
                             PartitionRule rule);

struct FamilyReport {
    bool nested = true;
    bool measures_ok = true;
    bool components_ok = true;
    bool partition_ok = true;  // disjoint and covering
    int max_components = 0;
    double max_measure_error = 0.0;
    std::vector<std::string> failures;

    bool ok() const { return nested && measures_ok && components_ok && partition_ok; }
};

/// Connected components of the Dirichlet set along the boundary.
int dirichlet_components(const MeshedDomain& mesh, const BoundaryPartition& partition);

FamilyReport validate_family(const PartitionFamily& family, int max_components = 2);

nlohmann::json to_json(const DomainSpec& spec);
DomainSpec domain_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MeshedDomain& mesh, const BoundaryPartition& partition);

}  // namespace fracmix
