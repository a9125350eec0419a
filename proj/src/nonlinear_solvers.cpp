#include "fracmix/nonlinear_solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/LU>

#include "fracmix/error.hpp"

namespace fracmix {

namespace {

constexpr double kPotentialFloor = 1e-12;

double sup_norm(const Vector& u) { return u.size() ? u.cwiseAbs().maxCoeff() : 0.0; }

double mass_norm(const Vector& mass, const Vector& v) { return std::sqrt(mass.dot(v.cwiseAbs2())); }

double signed_power(double u, double p) { return std::copysign(std::pow(std::abs(u), p), u); }

// F(u) = A^s u - lambda |u|^{q-1} u - c_r |u|^{r-1} u
Vector residual_values(const FractionalOperator& op, double lambda, double q, double r, double c_r,
                       const Vector& u)
{
    Vector f = op.apply(u);
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        f(i) -= lambda * signed_power(u(i), q) + c_r * signed_power(u(i), r);
    }
    return f;
}

Vector potential(double lambda, double q, double r, double c_r, const Vector& u)
{
    Vector a(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        const double t = std::max(std::abs(u(i)), kPotentialFloor);
        a(i) = lambda * q * std::pow(t, q - 1.0) + c_r * r * std::pow(t, r - 1.0);
    }
    return a;
}

NewtonResult newton_core(const FractionalOperator& op, double lambda, double q, double r, double c_r,
                         const Vector& init, const NewtonOptions& options)
{
    NewtonResult out;
    const Vector& mass = op.mass();
    if (init.size() != op.dofs()) throw ValidationError("newton: initial guess has wrong dimension");
    if (!(init.array() > 0.0).all()) {
        throw ValidationError("newton: initial guess must be positive on every dof");
    }
    Vector u = init;
    Vector f = residual_values(op, lambda, q, r, c_r, u);
    double norm = mass_norm(mass, f);
    out.residual_history.push_back(norm);
    auto threshold = [&](const Vector& v) {
        return options.relative ? options.tolerance * mass_norm(mass, v) : options.tolerance;
    };

    for (int it = 0; it < options.max_iterations; ++it) {
        if (!std::isfinite(norm)) {
            out.failure = "non-finite residual";
            break;
        }
        if (norm <= threshold(u)) {
            out.converged = true;
            break;
        }
        Matrix jac = op.dense();
        jac.diagonal() -= potential(lambda, q, r, c_r, u);
        Eigen::PartialPivLU<Matrix> lu(jac);
        out.rcond = lu.rcond();
        if (!(out.rcond > 1e-15)) {
            std::ostringstream os;
            os << "singular Jacobian (condition estimate " << out.rcond << ")";
            out.failure = os.str();
            break;
        }
        const Vector step = lu.solve(-f);
        double t = 1.0;
        bool accepted = false;
        bool positive_seen = false;
        for (int h = 0; h <= options.max_halvings; ++h, t *= 0.5) {
            const Vector trial = u + t * step;
            if (!(trial.array() > 0.0).all()) continue;
            positive_seen = true;
            const Vector ft = residual_values(op, lambda, q, r, c_r, trial);
            const double nt = mass_norm(mass, ft);
            if (nt <= (1.0 - 1e-4 * t) * norm || (t == 1.0 && nt <= 10.0 * threshold(trial))) {
                u = trial;
                f = ft;
                norm = nt;
                accepted = true;
                break;
            }
        }
        out.iterations = it + 1;
        out.residual_history.push_back(norm);
        if (!accepted) {
            out.failure = positive_seen ? "no residual decrease along the Newton direction"
                                        : "positivity lost on every damped step";
            break;
        }
    }
    if (!out.converged && out.failure.empty()) {
        if (norm <= threshold(u)) out.converged = true;
        else out.failure = "iteration cap reached";
    }
    out.record.u = u;
    out.record.residual = norm;
    out.record.iterations = out.iterations;
    return out;
}

}  // namespace

void ProblemParams::validate(int dimension) const
{
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ValidationError("problem.lambda must be >= 0");
    if (!(q > 0.0 && q <= 1.0)) throw ValidationError("problem.q must lie in (0, 1]");
    if (!(r > 1.0)) throw ValidationError("problem.r must exceed 1");
    if (!(s > 0.5 && s < 1.0)) throw ValidationError("problem.s must lie in (1/2, 1)");
    const double bound = subcritical_bound(dimension, s);
    if (std::isfinite(bound) && !(r < bound)) {
        std::ostringstream os;
        os << "problem.r = " << r << " must be below (N+2s)/(N-2s) = " << bound;
        throw ValidationError(os.str());
    }
}

double subcritical_bound(int dimension, double s)
{
    if (dimension <= 2.0 * s) return std::numeric_limits<double>::infinity();
    return (dimension + 2.0 * s) / (dimension - 2.0 * s);
}

std::string to_string(SolutionKind kind)
{
    switch (kind) {
        case SolutionKind::Minimal: return "minimal";
        case SolutionKind::MountainPass: return "mountain_pass";
        case SolutionKind::Other: return "other";
    }
    return "other";
}

Vector nonlinearity(const ProblemParams& p, const Vector& u)
{
    Vector f(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        f(i) = p.lambda * signed_power(u(i), p.q) + signed_power(u(i), p.r);
    }
    return f;
}

Vector linearized_potential(const ProblemParams& p, const Vector& u)
{
    return potential(p.lambda, p.q, p.r, 1.0, u);
}

double energy(const Problem& problem, const Vector& u)
{
    const auto& p = problem.params;
    const Vector& mass = problem.op->mass();
    const double h = problem.op->hs_norm(u);
    double lower = 0.0;
    double upper = 0.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        const double a = std::abs(u(i));
        lower += mass(i) * std::pow(a, p.q + 1.0);
        upper += mass(i) * std::pow(a, p.r + 1.0);
    }
    return 0.5 * h * h - p.lambda / (p.q + 1.0) * lower - upper / (p.r + 1.0);
}

ResidualResult residual(const Problem& problem, const Vector& u)
{
    ResidualResult out;
    const auto& p = problem.params;
    out.values = residual_values(*problem.op, p.lambda, p.q, p.r, 1.0, u);
    out.norm = mass_norm(problem.op->mass(), out.values);
    out.had_negative = (u.array() < 0.0).any();
    return out;
}

SolutionRecord make_record(const Problem& problem, Vector u, SolutionKind kind, int iterations)
{
    SolutionRecord rec;
    rec.params = problem.params;
    rec.alpha = problem.alpha;
    rec.residual = residual(problem, u).norm;
    rec.energy = energy(problem, u);
    rec.sup_norm = sup_norm(u);
    rec.hs_norm = problem.op->hs_norm(u);
    rec.kind = kind;
    rec.iterations = iterations;
    rec.u = std::move(u);
    return rec;
}

SolutionRecord solve_torsion(const FractionalOperator& op)
{
    const Vector ones = Vector::Ones(op.dofs());
    SolutionRecord rec;
    rec.u = op.solve(ones);
    rec.params.s = op.order();
    rec.params.lambda = 0.0;
    rec.residual = mass_norm(op.mass(), op.apply(rec.u) - ones);
    rec.sup_norm = sup_norm(rec.u);
    rec.hs_norm = op.hs_norm(rec.u);
    rec.kind = SolutionKind::Other;
    return rec;
}

SolutionRecord solve_sublinear(const FractionalOperator& op, double lambda, double q,
                               const SublinearOptions& options)
{
    if (!(q > 0.0 && q < 1.0)) throw ValidationError("solve_sublinear: q must lie in (0, 1)");
    if (!(lambda > 0.0)) throw ValidationError("solve_sublinear: lambda must be positive");
    Vector v;
    if (options.start) {
        v = *options.start;
        if (v.size() != op.dofs() || !(v.array() > 0.0).all()) {
            throw ValidationError("solve_sublinear: start must be positive on every dof");
        }
    } else {
        const Vector phi1 = op.basis().phis.col(0);
        v = options.start_scale * phi1 / sup_norm(phi1);
    }

    int it = 0;
    bool converged = false;
    for (; it < options.max_iterations; ++it) {
        Vector rhs(v.size());
        for (Eigen::Index i = 0; i < v.size(); ++i) rhs(i) = lambda * std::pow(std::max(v(i), 0.0), q);
        Vector next = op.solve(rhs);
        const double inc = sup_norm(next - v);
        v = std::move(next);
        if (inc <= options.tolerance * std::max(1.0, sup_norm(v))) {
            converged = true;
            break;
        }
    }
    if (!converged) throw SolverError("solve_sublinear: no convergence within the iteration cap");

    // A couple of Newton steps remove the geometric tail of the fixed-point map.
    NewtonOptions nopt;
    nopt.tolerance = 1e-13 * std::max(1.0, sup_norm(v));
    nopt.max_iterations = 10;
    if ((v.array() > 0.0).all()) {
        NewtonResult polished = newton_core(op, lambda, q, 2.0, 0.0, v, nopt);
        if (polished.converged) v = polished.record.u;
    }

    SolutionRecord rec;
    rec.params.lambda = lambda;
    rec.params.q = q;
    rec.params.s = op.order();
    rec.u = v;
    rec.residual = mass_norm(op.mass(), residual_values(op, lambda, q, 2.0, 0.0, v));
    rec.sup_norm = sup_norm(v);
    rec.hs_norm = op.hs_norm(v);
    rec.kind = SolutionKind::Other;
    rec.iterations = it + 1;
    return rec;
}

double supersolution_scale(double lambda, double q, double r, double g_sup)
{
    if (!(lambda > 0.0)) throw ValidationError("supersolution: lambda must be positive");
    if (!(g_sup > 0.0)) throw ValidationError("supersolution: ||g||_inf must be positive");
    const double gq = std::pow(g_sup, q);
    const double gr = std::pow(g_sup, r);
    // chi(M) = lambda G^q M^{q-1} + G^r M^{r-1}; feasible iff chi(M) <= 1.
    auto chi = [&](double m) { return lambda * gq * std::pow(m, q - 1.0) + gr * std::pow(m, r - 1.0); };

    if (q >= 1.0) {
        if (lambda * gq >= 1.0) {
            throw NoSupersolution("no supersolution M g: lambda ||g||_inf >= 1");
        }
        // Every M in (0, M_max] works; report M_max.
        return std::pow((1.0 - lambda * gq) / gr, 1.0 / (r - 1.0));
    }

    const double m_star = std::pow((1.0 - q) * lambda * gq / ((r - 1.0) * gr), 1.0 / (r - q));
    if (chi(m_star) > 1.0) {
        std::ostringstream os;
        os << "no supersolution M g at lambda = " << lambda << " (min chi = " << chi(m_star) << " > 1)";
        throw NoSupersolution(os.str());
    }
    // chi decreases on (0, m_star]; bisect in log M for chi = 1.
    double lo = m_star;
    while (chi(lo) <= 1.0) {
        lo *= 0.5;
        if (lo < 1e-300) return lo;
    }
    double hi = m_star;
    for (int k = 0; k < 200 && hi / lo > 1.0 + 1e-15; ++k) {
        const double mid = std::sqrt(lo * hi);
        (chi(mid) > 1.0 ? lo : hi) = mid;
    }
    return hi;
}

Supersolution build_supersolution(const ProblemParams& params, const Vector& torsion)
{
    Supersolution out;
    out.m = supersolution_scale(params.lambda, params.q, params.r, sup_norm(torsion));
    out.h = out.m * torsion;
    return out;
}

MonotoneResult monotone_iteration(const Problem& problem, const Vector& sub,
                                  const std::optional<Vector>& super, const MonotoneOptions& options)
{
    const FractionalOperator& op = *problem.op;
    const auto& p = problem.params;
    const EigenBasis& basis = op.basis();
    const Vector& ls = op.powered_eigenvalues();
    if (sub.size() != op.dofs()) throw ValidationError("monotone_iteration: subsolution has wrong dimension");

    if (options.check_inputs) {
        const Vector rs = residual(problem, sub).values;
        const double scale = 1.0 + sup_norm(nonlinearity(p, sub));
        if (rs.maxCoeff() > 1e-8 * scale) {
            std::ostringstream os;
            os << "monotone_iteration: start is not a subsolution (max residual " << rs.maxCoeff() << ")";
            throw SolverError(os.str());
        }
        if (super) {
            if (!ordered(sub, *super, 1e-10)) {
                throw SolverError("monotone_iteration: subsolution exceeds supersolution");
            }
            const Vector rsup = residual(problem, *super).values;
            const double sscale = 1.0 + sup_norm(nonlinearity(p, *super));
            if (rsup.minCoeff() < -1e-8 * sscale) {
                throw SolverError("monotone_iteration: bound is not a supersolution");
            }
        }
    }

    MonotoneResult out;
    Vector u = sub;
    Vector coeff = basis.coefficients(u);
    const Vector& mass = op.mass();
    double min_inc = 0.0;
    int it = 0;
    for (; it < options.max_iterations; ++it) {
        const Vector f = nonlinearity(p, u.cwiseMax(0.0));
        const Vector next_coeff = basis.coefficients(f).cwiseQuotient(ls);
        Vector next = basis.synthesize(next_coeff);

        const Vector inc = next - u;
        const double scale = std::max(1.0, sup_norm(next));
        min_inc = std::min(min_inc, inc.minCoeff());
        if (inc.minCoeff() < -1e-12 * scale) {
            std::ostringstream os;
            os << "monotone_iteration: iterate decreased by " << -inc.minCoeff() << " at step " << it + 1;
            throw SolverError(os.str());
        }
        if (super && !ordered(next, *super, 1e-10 * scale)) {
            throw SolverError("monotone_iteration: iterate crossed the supersolution");
        }
        const double step = sup_norm(inc);
        if (options.trace_stride > 0 && it % options.trace_stride == 0) {
            // Residual of u_n equals A^s (u_n - u_{n+1}); evaluated in the basis.
            const double res = std::sqrt((ls.cwiseProduct(coeff - next_coeff)).cwiseAbs2().sum());
            double lower = 0.0;
            double upper = 0.0;
            for (Eigen::Index i = 0; i < u.size(); ++i) {
                const double a = std::abs(next(i));
                lower += mass(i) * std::pow(a, p.q + 1.0);
                upper += mass(i) * std::pow(a, p.r + 1.0);
            }
            const double e = 0.5 * ls.dot(next_coeff.cwiseAbs2()) - p.lambda / (p.q + 1.0) * lower -
                             upper / (p.r + 1.0);
            out.trace.sup_norm.push_back(sup_norm(next));
            out.trace.residual.push_back(res);
            out.trace.energy.push_back(e);
        }
        u = std::move(next);
        coeff = next_coeff;
        if (!u.allFinite() || sup_norm(u) > options.blowup) {
            out.diverged = true;
            out.trace.termination = "blow-up";
            break;
        }
        if (step <= options.tolerance) {
            out.converged = true;
            out.trace.termination = "converged";
            break;
        }
    }
    if (!out.converged && !out.diverged) out.trace.termination = "iteration cap";
    out.min_increment = min_inc;
    if (out.diverged) {
        out.record.u = u;
        out.record.params = p;
        out.record.alpha = problem.alpha;
        out.record.sup_norm = sup_norm(u);
        out.record.iterations = it + 1;
        out.record.residual = std::numeric_limits<double>::infinity();
    } else {
        out.record = make_record(problem, u, SolutionKind::Minimal, it + 1);
    }
    return out;
}

NewtonResult newton_solve(const Problem& problem, const Vector& init, const NewtonOptions& options)
{
    const auto& p = problem.params;
    NewtonResult out = newton_core(*problem.op, p.lambda, p.q, p.r, 1.0, init, options);
    const int iterations = out.iterations;
    out.record = make_record(problem, out.record.u, SolutionKind::Other, iterations);
    return out;
}

Matrix residual_jacobian(const Problem& problem, const Vector& u)
{
    Matrix jac = problem.op->dense();
    jac.diagonal() -= linearized_potential(problem.params, u);
    return jac;
}

std::string to_string(MountainPassStatus status)
{
    switch (status) {
        case MountainPassStatus::Found: return "found";
        case MountainPassStatus::NoneFound: return "none_found";
        case MountainPassStatus::NumericalFailure: return "numerical_failure";
    }
    return "numerical_failure";
}

namespace {

// Piecewise-linear resampling of a path to equal H^s arc length.
void reparametrize(const FractionalOperator& op, std::vector<Vector>& path)
{
    const std::size_t k = path.size();
    std::vector<double> arc(k, 0.0);
    for (std::size_t i = 1; i < k; ++i) arc[i] = arc[i - 1] + op.hs_norm(path[i] - path[i - 1]);
    if (!(arc.back() > 0.0)) return;
    std::vector<Vector> out(k);
    out.front() = path.front();
    out.back() = path.back();
    std::size_t seg = 1;
    for (std::size_t i = 1; i + 1 < k; ++i) {
        const double target = arc.back() * static_cast<double>(i) / static_cast<double>(k - 1);
        while (seg < k - 1 && arc[seg] < target) ++seg;
        const double len = arc[seg] - arc[seg - 1];
        const double w = len > 0.0 ? (target - arc[seg - 1]) / len : 0.0;
        out[i] = (1.0 - w) * path[seg - 1] + w * path[seg];
    }
    path = std::move(out);
}

}  // namespace

MountainPassResult mountain_pass_solve(const Problem& problem, const Vector& u_min,
                                       const MountainPassOptions& options)
{
    const FractionalOperator& op = *problem.op;
    const auto& p = problem.params;
    MountainPassResult out;
    if (u_min.size() != op.dofs()) throw ValidationError("mountain_pass: u_min has wrong dimension");
    const double e_min = energy(problem, u_min);

    // High endpoint t phi_1 above u_min with I(t phi_1) < I(u_min).
    const Vector phi1 = op.basis().phis.col(0) / sup_norm(op.basis().phis.col(0));
    double t = 1.0;
    for (Eigen::Index i = 0; i < phi1.size(); ++i) {
        if (phi1(i) > 0.0) t = std::max(t, 2.0 * u_min(i) / phi1(i));
    }
    int guard = 0;
    while (energy(problem, t * phi1) >= e_min - 1e-3 * (1.0 + std::abs(e_min))) {
        t *= 2.0;
        if (++guard > 60) {
            out.status = MountainPassStatus::NumericalFailure;
            out.message = "could not find an endpoint below I(u_min)";
            return out;
        }
    }
    const Vector top = t * phi1;

    const int k = std::max(options.path_points, 5);
    std::vector<Vector> path(k);
    for (int i = 0; i < k; ++i) {
        const double w = static_cast<double>(i) / (k - 1);
        path[i] = (1.0 - w) * u_min + w * top;
    }
    std::vector<double> levels(k);
    for (int i = 0; i < k; ++i) levels[i] = energy(problem, path[i]);

    auto separated = [&](const Vector& u) {
        return sup_norm(u - u_min) > options.separation && energy(problem, u) > e_min;
    };
    auto try_polish = [&](const Vector& seed) -> bool {
        if (!(seed.array() > 0.0).all()) return false;
        NewtonResult nr = newton_solve(problem, seed);
        if (nr.converged && separated(nr.record.u)) {
            out.record = make_record(problem, nr.record.u, SolutionKind::MountainPass, out.iterations);
            out.status = MountainPassStatus::Found;
            return true;
        }
        return false;
    };

    double step = 0.5;
    double last_polish = std::numeric_limits<double>::infinity();
    bool collapsed = false;
    for (int it = 0; it < options.max_iterations; ++it) {
        out.iterations = it + 1;
        int peak = 1;
        for (int i = 2; i + 1 < k; ++i) {
            if (levels[i] > levels[peak]) peak = i;
        }
        out.peak_energy = levels[peak];
        Vector& x = path[peak];

        // Sobolev gradient: x - A^{-s} f(x).
        const Vector grad = x - op.solve(nonlinearity(p, x.cwiseMax(0.0)));
        const double gnorm = op.hs_norm(grad);
        const double rel = gnorm / std::max(1.0, op.hs_norm(x));

        if (rel < 1e-2 && rel < 0.5 * last_polish) {
            last_polish = rel;
            Vector seed = x.cwiseMax(1e-12);
            if (try_polish(seed)) return out;
        }
        if (rel <= options.gradient_tolerance) {
            if (!separated(x)) collapsed = true;
            break;
        }

        bool moved = false;
        for (int ls = 0; ls < 40; ++ls) {
            const Vector trial = (x - step * grad).cwiseMax(0.0);
            const double e = energy(problem, trial);
            if (e < levels[peak]) {
                x = trial;
                levels[peak] = e;
                moved = true;
                step = std::min(1.0, step * 1.5);
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;
        if ((it + 1) % 10 == 0) {
            reparametrize(op, path);
            for (int i = 1; i + 1 < k; ++i) levels[i] = energy(problem, path[i]);
        }
    }

    int peak = 1;
    for (int i = 2; i + 1 < k; ++i) {
        if (levels[i] > levels[peak]) peak = i;
    }
    out.peak_energy = levels[peak];
    if (try_polish(path[peak].cwiseMax(1e-12))) return out;
    if (collapsed) {
        out.status = MountainPassStatus::NoneFound;
        out.message = "descent collapsed onto u_min; no separated critical point";
    } else {
        out.status = MountainPassStatus::NumericalFailure;
        out.message = "mountain-pass descent exhausted its budget before Newton polishing converged";
    }
    out.record = make_record(problem, path[peak], SolutionKind::Other, out.iterations);
    return out;
}

bool ordered(const Vector& u1, const Vector& u2, double tol)
{
    if (u1.size() != u2.size()) throw ValidationError("ordered: dimension mismatch");
    return (u1 - u2).maxCoeff() <= tol;
}

ComparisonReport comparison_check(const FractionalOperator& op, const Vector& u1, const Vector& u2,
                                  const std::function<double(double)>& f, double tol)
{
    ComparisonReport rep;
    rep.max_violation = (u1 - u2).maxCoeff();
    rep.ordered = rep.max_violation <= tol;

    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (const Vector* u : {&u1, &u2}) {
        for (Eigen::Index i = 0; i < u->size(); ++i) {
            if ((*u)(i) > 0.0) {
                lo = std::min(lo, (*u)(i));
                hi = std::max(hi, (*u)(i));
            }
        }
    }
    if (hi > 0.0) {
        const int samples = 200;
        double prev = std::numeric_limits<double>::infinity();
        for (int k = 0; k < samples; ++k) {
            const double t = lo * std::pow(hi / lo, static_cast<double>(k) / (samples - 1));
            const double ratio = f(t) / t;
            if (ratio > prev * (1.0 + 1e-12)) rep.f_over_t_decreasing = false;
            prev = ratio;
        }
    }
    auto apply_f = [&](const Vector& u) {
        Vector out(u.size());
        for (Eigen::Index i = 0; i < u.size(); ++i) out(i) = f(u(i));
        return out;
    };
    const Vector f1 = apply_f(u1);
    const Vector f2 = apply_f(u2);
    const Vector r1 = op.apply(u1) - f1;
    const Vector r2 = op.apply(u2) - f2;
    rep.sub_ok = r1.maxCoeff() <= 1e-8 * (1.0 + sup_norm(f1));
    rep.super_ok = r2.minCoeff() >= -1e-8 * (1.0 + sup_norm(f2));
    return rep;
}

double concave_convex_ratio_min(double lambda, double q, double r)
{
    auto g = [&](double x) { return lambda * std::exp((q - 1.0) * x) + std::exp((r - 1.0) * x); };
    double a = -200.0;
    double b = 200.0;
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - phi * (b - a);
    double d = a + phi * (b - a);
    double gc = g(c);
    double gd = g(d);
    for (int k = 0; k < 300; ++k) {
        if (gc < gd) {
            b = d;
            d = c;
            gd = gc;
            c = b - phi * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + phi * (b - a);
            gd = g(d);
        }
    }
    return g(0.5 * (a + b));
}

}  // namespace fracmix
