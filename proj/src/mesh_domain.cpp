#include "fracmix/mesh_domain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "fracmix/error.hpp"

namespace fracmix {

DomainSpec DomainSpec::interval(double length, int n)
{
    DomainSpec spec;
    spec.kind = DomainKind::Interval;
    spec.extents = {length};
    spec.nodes = {n};
    spec.validate();
    return spec;
}

DomainSpec DomainSpec::rectangle(double lx, double ly, int nx, int ny)
{
    DomainSpec spec;
    spec.kind = DomainKind::Rectangle;
    spec.extents = {lx, ly};
    spec.nodes = {nx, ny};
    spec.validate();
    return spec;
}

double DomainSpec::spacing(int axis) const
{
    return extents.at(axis) / (nodes.at(axis) - 1);
}

double DomainSpec::boundary_measure() const
{
    if (kind == DomainKind::Interval) return 2.0;
    return 2.0 * (extents[0] + extents[1]);
}

void DomainSpec::validate() const
{
    const std::size_t dim = static_cast<std::size_t>(dimension());
    if (extents.size() != dim || nodes.size() != dim) {
        throw ValidationError("domain: expected " + std::to_string(dim) +
                              " extents and node counts");
    }
    for (std::size_t a = 0; a < dim; ++a) {
        if (!(extents[a] > 0.0) || !std::isfinite(extents[a])) {
            throw ValidationError("domain.extents[" + std::to_string(a) + "] must be > 0");
        }
        if (nodes[a] < 3) {
            throw ValidationError("domain.nodes[" + std::to_string(a) + "] must be >= 3");
        }
    }
}

double MeshedDomain::cell_measure(int node) const
{
    double m = 1.0;
    for (int a = 0; a < spec.dimension(); ++a) {
        const int i = axis_index(node, a);
        const double h = spec.spacing(a);
        m *= (i == 0 || i == spec.nodes[a] - 1) ? 0.5 * h : h;
    }
    return m;
}

double MeshedDomain::boundary_node_measure(int node) const
{
    for (std::size_t k = 0; k < boundary_order.size(); ++k) {
        if (boundary_order[k] == node) return arc_measure[k];
    }
    return 0.0;
}

MeshedDomain build_mesh(const DomainSpec& spec)
{
    spec.validate();
    MeshedDomain mesh;
    mesh.spec = spec;
    const int nx = spec.nodes[0];
    const double hx = spec.spacing(0);

    if (spec.kind == DomainKind::Interval) {
        mesh.coords.resize(nx);
        mesh.on_boundary.assign(nx, 0);
        for (int i = 0; i < nx; ++i) mesh.coords[i] = {i * hx, 0.0};
        mesh.coords[nx - 1][0] = spec.extents[0];
        mesh.on_boundary[0] = mesh.on_boundary[nx - 1] = 1;
        // Zero-dimensional boundary: each endpoint carries counting measure 1.
        mesh.boundary_order = {0, nx - 1};
        mesh.arc_position = {0.0, 1.0};
        mesh.arc_measure = {1.0, 1.0};
        return mesh;
    }

    const int ny = spec.nodes[1];
    const double hy = spec.spacing(1);
    const double lx = spec.extents[0];
    const double ly = spec.extents[1];
    mesh.coords.resize(static_cast<std::size_t>(nx) * ny);
    mesh.on_boundary.assign(mesh.coords.size(), 0);
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const int id = mesh.node_id(i, j);
            mesh.coords[id] = {i == nx - 1 ? lx : i * hx, j == ny - 1 ? ly : j * hy};
            mesh.on_boundary[id] = (i == 0 || j == 0 || i == nx - 1 || j == ny - 1);
        }
    }

    auto push = [&](int i, int j, double pos) {
        mesh.boundary_order.push_back(mesh.node_id(i, j));
        mesh.arc_position.push_back(pos);
        const bool xe = (i == 0 || i == nx - 1);
        const bool ye = (j == 0 || j == ny - 1);
        double m = 0.0;
        if (xe && ye) m = 0.5 * hx + 0.5 * hy;
        else if (ye) m = hx;
        else m = hy;
        mesh.arc_measure.push_back(m);
    };
    for (int i = 0; i < nx; ++i) push(i, 0, i * hx);
    for (int j = 1; j < ny; ++j) push(nx - 1, j, lx + j * hy);
    for (int i = nx - 2; i >= 0; --i) push(i, ny - 1, lx + ly + (nx - 1 - i) * hx);
    for (int j = ny - 2; j >= 1; --j) push(0, j, 2 * lx + ly + (ny - 1 - j) * hy);
    return mesh;
}

std::string to_string(PartitionRule rule)
{
    switch (rule) {
        case PartitionRule::GrowFromLeft: return "grow-from-left";
        case PartitionRule::GrowFromRight: return "grow-from-right";
        case PartitionRule::GrowFromCorner: return "grow-from-corner";
        case PartitionRule::Custom: return "custom";
    }
    return "custom";
}

PartitionRule partition_rule_from_string(const std::string& name)
{
    if (name == "grow-from-left") return PartitionRule::GrowFromLeft;
    if (name == "grow-from-right") return PartitionRule::GrowFromRight;
    if (name == "grow-from-corner") return PartitionRule::GrowFromCorner;
    throw ValidationError("unknown partition rule '" + name + "'");
}

namespace {

void finalize(const MeshedDomain& mesh, BoundaryPartition& p)
{
    p.dirichlet_nodes.clear();
    p.neumann_nodes.clear();
    for (int node : mesh.boundary_order) {
        (p.is_dirichlet[node] ? p.dirichlet_nodes : p.neumann_nodes).push_back(node);
    }
    std::sort(p.dirichlet_nodes.begin(), p.dirichlet_nodes.end());
    std::sort(p.neumann_nodes.begin(), p.neumann_nodes.end());
}

}  // namespace

double BoundaryPartition::dirichlet_measure(const MeshedDomain& mesh) const
{
    double m = 0.0;
    for (std::size_t k = 0; k < mesh.boundary_order.size(); ++k) {
        if (is_dirichlet[mesh.boundary_order[k]]) m += mesh.arc_measure[k];
    }
    return m;
}

double BoundaryPartition::neumann_measure(const MeshedDomain& mesh) const
{
    double m = 0.0;
    for (std::size_t k = 0; k < mesh.boundary_order.size(); ++k) {
        if (!is_dirichlet[mesh.boundary_order[k]]) m += mesh.arc_measure[k];
    }
    return m;
}

BoundaryPartition build_partition(const MeshedDomain& mesh, double alpha, PartitionRule rule)
{
    const double total = mesh.boundary_measure();
    if (!(alpha > 0.0)) {
        throw ValidationError("alpha must be > 0: the Dirichlet part needs positive measure (|Sigma_D| > 0)");
    }
    if (alpha > total * (1.0 + 1e-12)) {
        std::ostringstream os;
        os << "alpha = " << alpha << " exceeds |dOmega| = " << total;
        throw ValidationError(os.str());
    }

    // Ordering of (node, arc position) pairs seen by the rule.
    std::vector<std::pair<int, double>> order;
    const std::size_t nb = mesh.boundary_order.size();
    if (mesh.spec.dimension() == 1) {
        if (rule == PartitionRule::GrowFromCorner) rule = PartitionRule::GrowFromLeft;
        if (rule == PartitionRule::GrowFromLeft) {
            order = {{mesh.boundary_order[0], 0.0}, {mesh.boundary_order[1], 1.0}};
        } else if (rule == PartitionRule::GrowFromRight) {
            order = {{mesh.boundary_order[1], 0.0}, {mesh.boundary_order[0], 1.0}};
        } else {
            throw ValidationError("custom partitions are built with build_partition_where");
        }
    } else {
        if (rule == PartitionRule::Custom) {
            throw ValidationError("custom partitions are built with build_partition_where");
        }
        if (rule != PartitionRule::GrowFromCorner) {
            throw ValidationError("rule '" + to_string(rule) + "' is only defined on an interval");
        }
        for (std::size_t k = 0; k < nb; ++k) order.emplace_back(mesh.boundary_order[k], mesh.arc_position[k]);
    }

    BoundaryPartition p;
    p.alpha = alpha;
    p.rule = rule;
    p.layout = to_string(rule);
    p.is_dirichlet.assign(mesh.node_count(), 0);
    for (const auto& [node, pos] : order) {
        if (pos < alpha) p.is_dirichlet[node] = 1;
    }
    finalize(mesh, p);
    const double first_cell = mesh.boundary_node_measure(order.front().first);
    if (alpha < first_cell) {
        std::ostringstream os;
        os << "alpha = " << alpha << " is below one boundary cell (" << first_cell
           << "); snapped to a single Dirichlet node";
        p.warning = os.str();
    }
    return p;
}

BoundaryPartition build_partition_where(const MeshedDomain& mesh,
                                        const std::function<bool(double, double)>& dirichlet,
                                        std::string layout)
{
    BoundaryPartition p;
    p.rule = PartitionRule::Custom;
    p.layout = std::move(layout);
    p.is_dirichlet.assign(mesh.node_count(), 0);
    for (int node : mesh.boundary_order) {
        const auto& c = mesh.coords[node];
        if (dirichlet(c[0], c[1])) p.is_dirichlet[node] = 1;
    }
    finalize(mesh, p);
    if (p.dirichlet_nodes.empty()) {
        throw ValidationError("partition '" + p.layout + "' has an empty Dirichlet set");
    }
    p.alpha = p.dirichlet_measure(mesh);
    return p;
}

PartitionFamily build_family(const MeshedDomain& mesh, std::vector<double> alphas,
                             PartitionRule rule)
{
    if (alphas.empty()) throw ValidationError("partition family needs at least one alpha");
    for (std::size_t k = 1; k < alphas.size(); ++k) {
        if (!(alphas[k] > alphas[k - 1])) {
            throw ValidationError("partition.alphas must be strictly increasing (index " +
                                  std::to_string(k) + ")");
        }
    }
    PartitionFamily family;
    family.mesh = mesh;
    family.rule = rule;
    family.alphas = std::move(alphas);
    for (double a : family.alphas) family.members.push_back(build_partition(mesh, a, rule));
    return family;
}

int dirichlet_components(const MeshedDomain& mesh, const BoundaryPartition& partition)
{
    const auto& order = mesh.boundary_order;
    const std::size_t nb = order.size();
    if (mesh.spec.dimension() == 1) {
        return static_cast<int>(partition.dirichlet_nodes.size());
    }
    // Cyclic runs of Dirichlet nodes along the boundary loop.
    std::size_t count = 0;
    std::size_t dirichlet = 0;
    for (std::size_t k = 0; k < nb; ++k) {
        const bool cur = partition.is_dirichlet[order[k]];
        const bool prev = partition.is_dirichlet[order[(k + nb - 1) % nb]];
        if (cur) ++dirichlet;
        if (cur && !prev) ++count;
    }
    if (count == 0 && dirichlet == nb) count = 1;
    return static_cast<int>(count);
}

FamilyReport validate_family(const PartitionFamily& family, int max_components)
{
    FamilyReport report;
    const auto& mesh = family.mesh;
    const double total = mesh.boundary_measure();
    double max_cell = 0.0;
    for (double m : mesh.arc_measure) max_cell = std::max(max_cell, m);

    for (std::size_t k = 0; k < family.members.size(); ++k) {
        const auto& p = family.members[k];
        std::vector<int> both;
        std::set_intersection(p.dirichlet_nodes.begin(), p.dirichlet_nodes.end(),
                              p.neumann_nodes.begin(), p.neumann_nodes.end(),
                              std::back_inserter(both));
        if (!both.empty() ||
            p.dirichlet_nodes.size() + p.neumann_nodes.size() != mesh.boundary_order.size()) {
            report.partition_ok = false;
            report.failures.push_back("member " + std::to_string(k) + ": tags do not partition the boundary");
        }
        const double md = p.dirichlet_measure(mesh);
        const double mn = p.neumann_measure(mesh);
        if (std::abs(md + mn - total) > 1e-12 * total) {
            report.partition_ok = false;
            report.failures.push_back("member " + std::to_string(k) + ": measures do not add up");
        }
        const double err = std::abs(md - p.alpha);
        report.max_measure_error = std::max(report.max_measure_error, err);
        if (err > max_cell + 1e-12) {
            report.measures_ok = false;
            std::ostringstream os;
            os << "member " << k << ": |Sigma_D| = " << md << " vs alpha = " << p.alpha;
            report.failures.push_back(os.str());
        }
        const int comps = dirichlet_components(mesh, p);
        report.max_components = std::max(report.max_components, comps);
        if (comps > max_components) {
            report.components_ok = false;
            report.failures.push_back("member " + std::to_string(k) + ": " + std::to_string(comps) +
                                      " Dirichlet components");
        }
        if (k > 0) {
            const auto& prev = family.members[k - 1];
            if (!std::includes(p.dirichlet_nodes.begin(), p.dirichlet_nodes.end(),
                               prev.dirichlet_nodes.begin(), prev.dirichlet_nodes.end())) {
                report.nested = false;
                report.failures.push_back("members " + std::to_string(k - 1) + "," + std::to_string(k) +
                                          ": Dirichlet sets not nested");
            }
        }
    }
    return report;
}

nlohmann::json to_json(const DomainSpec& spec)
{
    return nlohmann::json{
        {"kind", spec.kind == DomainKind::Interval ? "interval" : "rectangle"},
        {"extents", spec.extents},
        {"nodes", spec.nodes},
    };
}

DomainSpec domain_spec_from_json(const nlohmann::json& j)
{
    DomainSpec spec;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "interval") spec.kind = DomainKind::Interval;
    else if (kind == "rectangle") spec.kind = DomainKind::Rectangle;
    else throw ValidationError("domain.kind: unknown kind '" + kind + "'");
    spec.extents = j.at("extents").get<std::vector<double>>();
    spec.nodes = j.at("nodes").get<std::vector<int>>();
    spec.validate();
    return spec;
}

nlohmann::json to_json(const MeshedDomain& mesh, const BoundaryPartition& partition)
{
    nlohmann::json nodes = nlohmann::json::array();
    for (std::size_t k = 0; k < mesh.boundary_order.size(); ++k) {
        const int node = mesh.boundary_order[k];
        nodes.push_back({
            {"id", node},
            {"x", mesh.coords[node][0]},
            {"y", mesh.coords[node][1]},
            {"arc", mesh.arc_position[k]},
            {"measure", mesh.arc_measure[k]},
            {"tag", partition.is_dirichlet[node] ? "D" : "N"},
        });
    }
    return nlohmann::json{
        {"domain", to_json(mesh.spec)},
        {"alpha", partition.alpha},
        {"rule", partition.layout},
        {"dirichlet_measure", partition.dirichlet_measure(mesh)},
        {"boundary", nodes},
    };
}

}  // namespace fracmix
