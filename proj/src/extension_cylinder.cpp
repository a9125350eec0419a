#include "fracmix/extension_cylinder.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include <Eigen/SparseCholesky>

#include "fracmix/error.hpp"
#include "fracmix/quotient_minimizer.hpp"

namespace fracmix {

namespace {

// int_a^b y^{1-2s} dy
double weight_integral(double a, double b, double s)
{
    const double e = 2.0 - 2.0 * s;
    return (std::pow(b, e) - std::pow(a, e)) / e;
}

// 1 / int_a^b y^{2s-1} dy
double conductance(double a, double b, double s)
{
    const double e = 2.0 * s;
    return e / (std::pow(b, e) - std::pow(a, e));
}

}  // namespace

CylinderGrid make_cylinder_grid(std::shared_ptr<const MixedLaplacian> base, double s, double lambda1,
                                const CylinderOptions& options)
{
    if (!base) throw ValidationError("cylinder grid needs a base Laplacian");
    if (!(s > 0.0 && s < 1.0)) throw ValidationError("cylinder grid: s must lie in (0, 1)");
    if (!(lambda1 > 0.0)) throw ValidationError("cylinder grid: lambda_1 must be positive");
    if (!(options.grading > 1.0)) throw ValidationError("cylinder grid: grading must exceed 1");

    CylinderGrid grid;
    grid.base = base;
    grid.s = s;
    grid.y_max = std::log(1.0 / options.decay_tolerance) / std::sqrt(lambda1);

    double first = options.first_step;
    if (!(first > 0.0)) {
        // Resolve the shortest length scale of the base operator, 1/sqrt(max A_ii).
        const Vector diag = Vector(base->stiffness.diagonal()).cwiseQuotient(base->mass);
        const double h = 1.0 / std::sqrt(diag.maxCoeff());
        first = 1e-3 * std::min(h, grid.y_max);
    }
    std::vector<double> ys{0.0};
    double step = first;
    while (ys.back() + step < grid.y_max) {
        ys.push_back(ys.back() + step);
        step *= options.grading;
    }
    if (grid.y_max - ys.back() < 0.5 * step / options.grading && ys.size() > 2) ys.back() = grid.y_max;
    else ys.push_back(grid.y_max);

    const int m = static_cast<int>(ys.size());
    grid.y = Eigen::Map<const Vector>(ys.data(), m);
    grid.dual_weight.resize(m);
    grid.conductance.resize(m - 1);
    for (int k = 0; k < m; ++k) {
        const double lo = (k == 0) ? 0.0 : 0.5 * (ys[k - 1] + ys[k]);
        const double hi = (k == m - 1) ? ys[k] : 0.5 * (ys[k] + ys[k + 1]);
        grid.dual_weight(k) = weight_integral(lo, hi, s);
    }
    for (int k = 0; k + 1 < m; ++k) grid.conductance(k) = conductance(ys[k], ys[k + 1], s);
    return grid;
}

struct CylinderSolver::Factorizations {
    Eigen::SimplicialLDLT<SparseMatrix> dirichlet;  // layers 1..m
    Eigen::SimplicialLDLT<SparseMatrix> neumann;    // layers 0..m
};

namespace {

// Block-tridiagonal weighted operator restricted to layers [first, m).
SparseMatrix cylinder_matrix(const CylinderGrid& g, int first)
{
    const MixedLaplacian& base = *g.base;
    const int n = base.size();
    const int m = g.layers();
    const int nl = m - first;
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(nl) * (base.stiffness.nonZeros() + 3 * n));
    for (int k = first; k < m; ++k) {
        const int row0 = (k - first) * n;
        const double mu = g.dual_weight(k);
        for (int col = 0; col < base.stiffness.outerSize(); ++col) {
            for (SparseMatrix::InnerIterator it(base.stiffness, col); it; ++it) {
                t.emplace_back(row0 + static_cast<int>(it.row()), row0 + static_cast<int>(it.col()),
                               mu * it.value());
            }
        }
        const double below = (k > 0) ? g.conductance(k - 1) : 0.0;
        const double above = (k + 1 < m) ? g.conductance(k) : 0.0;
        for (int i = 0; i < n; ++i) {
            const double mi = base.mass(i);
            t.emplace_back(row0 + i, row0 + i, (below + above) * mi);
            if (k + 1 < m) {
                t.emplace_back(row0 + i, row0 + n + i, -above * mi);
                t.emplace_back(row0 + n + i, row0 + i, -above * mi);
            }
        }
    }
    SparseMatrix a(nl * n, nl * n);
    a.setFromTriplets(t.begin(), t.end());
    return a;
}

}  // namespace

CylinderSolver::CylinderSolver(CylinderGrid grid) : grid_(std::move(grid))
{
    if (grid_.layers() < 3) throw ValidationError("cylinder grid needs at least 3 layers");
    auto f = std::make_shared<Factorizations>();
    f->dirichlet.compute(cylinder_matrix(grid_, 1));
    if (f->dirichlet.info() != Eigen::Success) {
        throw SolverError("cylinder: factorization of the Dirichlet-trace system failed");
    }
    f->neumann.compute(cylinder_matrix(grid_, 0));
    if (f->neumann.info() != Eigen::Success) {
        throw SolverError("cylinder: factorization of the Neumann-trace system failed");
    }
    factors_ = std::move(f);
}

ExtensionField CylinderSolver::solve_extension(const Vector& trace) const
{
    const MixedLaplacian& base = *grid_.base;
    const int n = base.size();
    const int m = grid_.layers();
    if (trace.size() != n) throw ValidationError("extension: trace has wrong dimension");

    Vector rhs = Vector::Zero(static_cast<Eigen::Index>(n) * (m - 1));
    rhs.head(n) = grid_.conductance(0) * base.mass.cwiseProduct(trace);
    const Vector sol = factors_->dirichlet.solve(rhs);
    if (factors_->dirichlet.info() != Eigen::Success || !sol.allFinite()) {
        throw SolverError("extension: linear solve broke down");
    }
    ExtensionField field;
    field.s = grid_.s;
    field.values.resize(n, m);
    field.values.col(0) = trace;
    for (int k = 1; k < m; ++k) field.values.col(k) = sol.segment(static_cast<Eigen::Index>(k - 1) * n, n);

    const double bottom = std::sqrt(base.mass.dot(trace.cwiseAbs2()));
    const double top = std::sqrt(base.mass.dot(field.values.col(m - 1).cwiseAbs2()));
    field.cap_ratio = bottom > 0.0 ? top / bottom : 0.0;
    if (field.cap_ratio > 1e-6) {
        std::ostringstream os;
        os << "extension does not decay at Y_max (ratio " << field.cap_ratio << "); increase Y_max";
        field.warning = os.str();
    }
    return field;
}

Vector CylinderSolver::flux(const ExtensionField& field) const
{
    const MixedLaplacian& base = *grid_.base;
    const Vector u = field.values.col(0);
    return grid_.dual_weight(0) * base.apply(u) + grid_.conductance(0) * (u - field.values.col(1));
}

Vector CylinderSolver::dtn(const Vector& trace) const
{
    return flux(solve_extension(trace));
}

Vector CylinderSolver::neumann_trace(const Vector& f) const
{
    const MixedLaplacian& base = *grid_.base;
    const int n = base.size();
    if (f.size() != n) throw ValidationError("neumann_trace: data has wrong dimension");
    Vector rhs = Vector::Zero(static_cast<Eigen::Index>(n) * grid_.layers());
    rhs.head(n) = base.mass.cwiseProduct(f);
    const Vector sol = factors_->neumann.solve(rhs);
    if (factors_->neumann.info() != Eigen::Success || !sol.allFinite()) {
        throw SolverError("neumann_trace: linear solve broke down");
    }
    return sol.head(n);
}

double CylinderSolver::weighted_energy(const ExtensionField& field) const
{
    const MixedLaplacian& base = *grid_.base;
    const int m = grid_.layers();
    double e = 0.0;
    for (int k = 0; k < m; ++k) {
        const Vector uk = field.values.col(k);
        e += grid_.dual_weight(k) * uk.dot(base.stiffness * uk);
        if (k + 1 < m) {
            const Vector d = field.values.col(k + 1) - uk;
            e += grid_.conductance(k) * base.mass.dot(d.cwiseAbs2());
        }
    }
    return e;
}

double CylinderSolver::stencil_residual(const ExtensionField& field) const
{
    const MixedLaplacian& base = *grid_.base;
    const int m = grid_.layers();
    double worst = 0.0;
    for (int k = 1; k < m; ++k) {
        Vector r = grid_.dual_weight(k) * (base.stiffness * field.values.col(k));
        const Vector uk = field.values.col(k);
        r += grid_.conductance(k - 1) * base.mass.cwiseProduct(uk - field.values.col(k - 1));
        if (k + 1 < m) r += grid_.conductance(k) * base.mass.cwiseProduct(uk - field.values.col(k + 1));
        worst = std::max(worst, r.cwiseQuotient(base.mass).cwiseAbs().maxCoeff());
    }
    return worst;
}

Vector dtn_flux(const CylinderSolver& solver, const ExtensionField& field, double kappa)
{
    const CylinderGrid& g = solver.grid();
    int below = 0;
    for (int k = 1; k < g.layers(); ++k) {
        if (g.y(k) < g.y_max / 100.0) ++below;
    }
    if (below < 3) {
        throw ValidationError("dtn_flux: fewer than 3 layers below Y_max/100; grid too coarse near y = 0");
    }
    return kappa * solver.flux(field);
}

KappaCalibration calibrate_kappa(const CylinderSolver& solver, const FractionalOperator& op)
{
    const EigenBasis& b = op.basis();
    const Vector phi1 = b.phis.col(0);
    const Vector target = op.first_eigenvalue() * phi1;
    const Vector f = solver.dtn(phi1);
    KappaCalibration cal;
    cal.s = op.order();
    cal.kappa = b.inner(f, target) / b.inner(f, f);
    cal.calibration_error = b.l2_norm(cal.kappa * f - target) / b.l2_norm(target);
    cal.reference_kappa = std::pow(2.0, 2.0 * cal.s - 1.0) * std::tgamma(cal.s) / std::tgamma(1.0 - cal.s);
    if (!(cal.kappa > 0.0)) throw SolverError("calibrate_kappa: non-positive kappa");
    return cal;
}

double extension_vs_spectral_error(const CylinderSolver& solver, const FractionalOperator& op,
                                   const Vector& u, double kappa)
{
    const EigenBasis& b = op.basis();
    const Vector spectral = op.apply(u);
    const Vector ext = dtn_flux(solver, solver.solve_extension(u), kappa);
    const double denom = b.l2_norm(spectral);
    if (denom == 0.0) return b.l2_norm(ext);
    return b.l2_norm(ext - spectral) / denom;
}

QuotientResult trace_inequality_constant(const CylinderSolver& solver, double p,
                                         const QuotientOptions& options)
{
    QuotientProblem qp;
    qp.apply = [&solver](const Vector& u) { return solver.dtn(u); };
    qp.precondition = [&solver](const Vector& g) { return solver.neumann_trace(g); };
    qp.mass = solver.grid().base->mass;
    qp.p = p;
    const Vector start = solver.neumann_trace(Vector::Ones(qp.mass.size()));
    return minimize_quotient(qp, start, options);
}

void write_extension_slice_csv(std::ostream& out, const MeshedDomain& mesh, const CylinderSolver& solver,
                               const ExtensionField& field, int layer)
{
    const MixedLaplacian& base = *solver.grid().base;
    if (layer < 0 || layer >= field.values.cols()) throw ValidationError("slice layer out of range");
    out << std::setprecision(17);
    out << "x,y_base,y,U\n";
    for (int i = 0; i < base.size(); ++i) {
        const auto& c = mesh.coords[base.dof_to_node[i]];
        out << c[0] << ',' << c[1] << ',' << solver.grid().y(layer) << ',' << field.values(i, layer) << '\n';
    }
}

}  // namespace fracmix
