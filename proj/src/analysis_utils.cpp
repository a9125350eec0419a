#include "fracmix/analysis_utils.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "fracmix/error.hpp"

namespace fracmix {

namespace {

double distance(const Point& x, const Point& c, int dim)
{
    double d2 = 0.0;
    for (int a = 0; a < dim; ++a) d2 += (x[a] - c[a]) * (x[a] - c[a]);
    return std::sqrt(d2);
}

}  // namespace

void KelvinParams::validate() const
{
    if (dimension != 1 && dimension != 2) throw ValidationError("kelvin.dimension must be 1 or 2");
    if (!(s > 0.0 && s <= 1.0)) throw ValidationError("kelvin.s must lie in (0, 1]");
    if (!(dimension > 2.0 * s)) {
        std::ostringstream os;
        os << "kelvin: N = " << dimension << " must exceed 2s = " << 2.0 * s;
        throw ValidationError(os.str());
    }
    if (!(min_radius > 0.0)) throw ValidationError("kelvin.min_radius must be positive");
}

Point kelvin_point(const Point& x, const KelvinParams& params)
{
    const double d = distance(x, params.center, params.dimension);
    if (!(d >= params.min_radius)) throw ValidationError("kelvin: sample coincides with the inversion center");
    Point y = params.center;
    for (int a = 0; a < params.dimension; ++a) y[a] += (x[a] - params.center[a]) / (d * d);
    return y;
}

ScalarField kelvin_field(ScalarField u, const KelvinParams& params)
{
    params.validate();
    return [u = std::move(u), params](const Point& x) {
        const double d = distance(x, params.center, params.dimension);
        const Point y = kelvin_point(x, params);
        return std::pow(d, 2.0 * params.s - params.dimension) * u(y);
    };
}

std::vector<double> kelvin_transform(const ScalarField& u, const std::vector<Point>& samples,
                                     const KelvinParams& params)
{
    const ScalarField v = kelvin_field(u, params);
    std::vector<double> out;
    out.reserve(samples.size());
    for (const Point& x : samples) out.push_back(v(x));
    return out;
}

double kelvin_involution_defect(const ScalarField& u, const std::vector<Point>& samples,
                                const KelvinParams& params)
{
    const ScalarField twice = kelvin_field(kelvin_field(u, params), params);
    double worst = 0.0;
    for (const Point& x : samples) worst = std::max(worst, std::abs(twice(x) - u(x)));
    return worst;
}

BoundaryPartition half_strip_partition(const MeshedDomain& mesh, double tau, bool dirichlet_right)
{
    if (mesh.spec.dimension() != 2) throw ValidationError("half-strip surrogate needs a rectangle");
    const double lx = mesh.spec.extents[0];
    const double ly = mesh.spec.extents[1];
    if (!(tau > 0.0 && tau < lx)) throw ValidationError("half-strip: tau must lie inside the bottom side");
    const double eps = 1e-12 * std::max(lx, ly);
    auto rule = [=](double x, double y) {
        if (std::abs(y - ly) <= eps) return true;                      // top
        if (std::abs(x) <= eps) return true;                           // left
        if (dirichlet_right && std::abs(x - lx) <= eps) return true;   // right
        if (std::abs(y) <= eps) return x <= tau + eps;                 // bottom
        return false;
    };
    std::ostringstream layout;
    layout << "half-strip(tau=" << tau << (dirichlet_right ? ", dirichlet-right" : ", neumann-right") << ")";
    return build_partition_where(mesh, rule, layout.str());
}

MonotonicityReport monotonicity_check(const MeshedDomain& mesh, const Vector& nodal, int axis, int buffer,
                                      double tolerance)
{
    if (mesh.spec.dimension() != 2) throw ValidationError("monotonicity_check: needs a rectangle mesh");
    if (axis != 0 && axis != 1) throw ValidationError("monotonicity_check: axis must be 0 or 1");
    if (buffer < 0) throw ValidationError("monotonicity_check: buffer must be >= 0");
    if (nodal.size() != static_cast<Eigen::Index>(mesh.node_count())) {
        throw ValidationError("monotonicity_check: field size does not match the mesh");
    }
    MonotonicityReport rep;
    rep.axis = axis;
    rep.buffer = buffer;
    rep.tolerance = tolerance;
    rep.min_difference = std::numeric_limits<double>::infinity();
    const int nx = mesh.nx();
    const int ny = mesh.ny();
    // The bottom side carries the real boundary data; the other three are truncation sides.
    const int i_lo = buffer;
    const int i_hi = nx - 1 - buffer;
    const int j_lo = 0;
    const int j_hi = ny - 1 - buffer;
    for (int j = j_lo; j <= j_hi; ++j) {
        for (int i = i_lo; i <= i_hi; ++i) {
            const int ni = axis == 0 ? i + 1 : i;
            const int nj = axis == 0 ? j : j + 1;
            if (ni > i_hi || nj > j_hi) continue;
            const int a = mesh.node_id(i, j);
            const double diff = nodal(mesh.node_id(ni, nj)) - nodal(a);
            ++rep.scanned;
            if (diff < -tolerance) ++rep.violations;
            if (diff < rep.min_difference) {
                rep.min_difference = diff;
                rep.worst = mesh.coords[static_cast<std::size_t>(a)];
            }
        }
    }
    if (rep.scanned == 0) throw ValidationError("monotonicity_check: buffer leaves nothing to scan");
    rep.pass = rep.violations == 0;
    return rep;
}

nlohmann::json to_json(const MonotonicityReport& report)
{
    return {{"axis", report.axis},
            {"buffer_cells", report.buffer},
            {"tolerance", report.tolerance},
            {"min_difference", report.min_difference},
            {"worst_node", {report.worst[0], report.worst[1]}},
            {"scanned", report.scanned},
            {"violations", report.violations},
            {"pass", report.pass}};
}

}  // namespace fracmix
