#include "fracmix/continuation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include "fracmix/error.hpp"
#include "fracmix/io.hpp"

namespace fracmix {

namespace {

double sup_norm(const Vector& u) { return u.size() ? u.cwiseAbs().maxCoeff() : 0.0; }

std::optional<Vector> try_supersolution(const ProblemParams& params, const Vector& torsion)
{
    try {
        return build_supersolution(params, torsion).h;
    } catch (const NoSupersolution&) {
        return std::nullopt;
    }
}

bool positive(const Vector& u) { return (u.array() > 0.0).all(); }

}  // namespace

Vector SpectralSetup::to_nodes(const Vector& dofs) const
{
    Vector out = Vector::Zero(static_cast<Eigen::Index>(mesh.node_count()));
    for (int k = 0; k < laplacian->size(); ++k) out(laplacian->dof_to_node[k]) = dofs(k);
    return out;
}

SpectralSetup make_setup(const MeshedDomain& mesh, const BoundaryPartition& partition, double s)
{
    auto lap = std::make_shared<const MixedLaplacian>(assemble(mesh, partition));
    auto basis = std::make_shared<const EigenBasis>(eigendecompose(*lap));
    return SpectralSetup{mesh, partition, lap, basis, FractionalOperator(basis, s)};
}

SpectralSetup make_setup(const DomainSpec& spec, double alpha, PartitionRule rule, double s)
{
    const MeshedDomain mesh = build_mesh(spec);
    return make_setup(mesh, build_partition(mesh, alpha, rule), s);
}

std::string to_string(BranchKind kind)
{
    switch (kind) {
        case BranchKind::Minimal: return "minimal";
        case BranchKind::MountainPass: return "mountain_pass";
        case BranchKind::BifurcationQ1: return "bifurcation_q1";
    }
    return "minimal";
}

Branch continue_minimal_branch(const Problem& tmpl, const std::vector<double>& lambdas,
                               const ContinuationOptions& options)
{
    const FractionalOperator& op = *tmpl.op;
    const double q = tmpl.params.q;
    if (!(q < 1.0)) throw ValidationError("minimal branch: requires q < 1 (for q = 1 the minimal solution is 0)");
    if (lambdas.empty()) throw ValidationError("lambda grid must not be empty");
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        if (!(lambdas[i] > 0.0)) throw ValidationError("lambda grid entries must be positive");
        if (i && !(lambdas[i] > lambdas[i - 1])) throw ValidationError("lambda grid must be strictly increasing");
    }

    Branch branch;
    branch.params = tmpl.params;
    branch.alpha = tmpl.alpha;
    branch.kind = BranchKind::Minimal;

    const Vector torsion = solve_torsion(op).u;
    const Vector v1 = solve_sublinear(op, 1.0, q).u;
    std::optional<Vector> prev;

    for (double lambda : lambdas) {
        const Problem pb = tmpl.with_lambda(lambda);
        const Vector sub = prev ? *prev : Vector(std::pow(lambda, 1.0 / (1.0 - q)) * v1);
        std::optional<Vector> super = try_supersolution(pb.params, torsion);
        if (super && !ordered(sub, *super, 1e-10)) super.reset();

        MonotoneResult mr;
        try {
            mr = monotone_iteration(pb, sub, super, options.monotone);
        } catch (const SolverError&) {
            if (!super) throw;
            // The scalar supersolution does not dominate the seed; iterate unbounded instead.
            mr = monotone_iteration(pb, sub, std::nullopt, options.monotone);
        }
        if (!mr.converged) {
            std::ostringstream os;
            os << "lambda = " << format_double(lambda) << ": monotone iteration " << mr.trace.termination
               << (super ? "" : " (no supersolution)");
            branch.truncation = os.str();
            break;
        }
        SolutionRecord rec = mr.record;
        if (options.polish && positive(rec.u)) {
            NewtonResult nr = newton_solve(pb, rec.u, options.newton);
            if (nr.converged && nr.record.residual <= rec.residual &&
                sup_norm(nr.record.u - rec.u) <= 1e-6 * std::max(1.0, rec.sup_norm)) {
                rec = make_record(pb, nr.record.u, SolutionKind::Minimal, rec.iterations + nr.iterations);
            }
        }
        if (prev) branch.max_order_violation = std::max(branch.max_order_violation, (*prev - rec.u).maxCoeff());
        branch.nu1.push_back(linearized_first_eigenvalue(op, linearized_potential(pb.params, rec.u)).nu1);
        prev = rec.u;
        branch.points.push_back(std::move(rec));
    }
    return branch;
}

Branch mountain_pass_branch(const Problem& tmpl, const Branch& minimal, const MountainPassOptions& options)
{
    Branch branch;
    branch.params = tmpl.params;
    branch.alpha = tmpl.alpha;
    branch.kind = BranchKind::MountainPass;
    std::ostringstream failures;
    for (const SolutionRecord& m : minimal.points) {
        const Problem pb = tmpl.with_lambda(m.params.lambda);
        MountainPassResult mp = mountain_pass_solve(pb, m.u, options);
        if (mp.status != MountainPassStatus::Found) {
            failures << "lambda = " << format_double(m.params.lambda) << ": " << to_string(mp.status) << " ("
                     << mp.message << "); ";
            continue;
        }
        branch.nu1.push_back(
            linearized_first_eigenvalue(*tmpl.op, linearized_potential(pb.params, mp.record.u)).nu1);
        branch.points.push_back(std::move(mp.record));
    }
    branch.truncation = failures.str();
    return branch;
}

double galerkin_amplitude(const FractionalOperator& op, double lambda, double r)
{
    const double gap = op.first_eigenvalue() - lambda;
    if (!(gap > 0.0)) return 0.0;
    const Vector phi = op.basis().phis.col(0);
    const double integral = op.mass().dot(phi.cwiseAbs().array().pow(r + 1.0).matrix());
    return std::pow(gap / integral, 1.0 / (r - 1.0));
}

namespace {

struct ProbeOutcome {
    LambdaProbe probe;
    std::optional<SolutionRecord> solution;
};

ProbeOutcome probe_lambda(const Problem& tmpl, double lambda, const std::optional<Vector>& continued,
                          const Vector& torsion, const Vector& v1, const LambdaStarOptions& options)
{
    ProbeOutcome out;
    LambdaProbe& pr = out.probe;
    pr.lambda = lambda;
    const Problem pb = tmpl.with_lambda(lambda);
    const FractionalOperator& op = *tmpl.op;
    const auto& p = tmpl.params;
    const bool linear_case = p.q >= 1.0;

    try {
        pr.supersolution_m = supersolution_scale(lambda, p.q, p.r, sup_norm(torsion));
        pr.supersolution_feasible = true;
    } catch (const NoSupersolution&) {
        pr.supersolution_feasible = false;
    }

    // Newton from the continued branch (or a natural seed when there is none yet).
    // For q = 1 the one-mode amplitude is the better seed whenever it exists, since
    // branch amplitudes vary by orders of magnitude near the threshold.
    Vector seed;
    const double c = linear_case ? galerkin_amplitude(op, lambda, p.r) : 0.0;
    if (linear_case && (c > 0.0 || !continued)) {
        seed = op.basis().phis.col(0) * (c > 0.0 ? c : 1e-2);
        if (seed.sum() < 0.0) seed = -seed;
    } else if (continued) {
        seed = *continued;
    } else {
        seed = std::pow(lambda, 1.0 / (1.0 - p.q)) * v1;
    }
    NewtonOptions nopt = options.newton;
    if (linear_case) nopt.relative = true;
    if (positive(seed)) {
        NewtonResult nr = newton_solve(pb, seed, nopt);
        pr.newton_initial_residual = nr.residual_history.front();
        pr.newton_final_residual = nr.residual_history.back();
        pr.newton_residual_growth = pr.newton_final_residual >= pr.newton_initial_residual;
        const bool nontrivial = nr.record.sup_norm > 1e-300;
        if (nr.converged && positive(nr.record.u) && nontrivial) {
            pr.newton_converged = true;
            pr.success = true;
            pr.method = "newton";
            out.solution = nr.record;
        } else {
            pr.newton_failure = nr.converged ? "converged to a non-positive state" : nr.failure;
        }
    } else {
        pr.newton_failure = "seed not positive";
    }

    if (!pr.success && !linear_case) {
        MonotoneOptions mopt;
        mopt.max_iterations = options.monotone_iterations;
        mopt.trace_stride = 0;
        std::optional<Vector> super;
        if (pr.supersolution_feasible) super = pr.supersolution_m * torsion;
        const Vector sub = std::pow(lambda, 1.0 / (1.0 - p.q)) * v1;
        if (super && !ordered(sub, *super, 1e-10)) super.reset();
        try {
            MonotoneResult mr = monotone_iteration(pb, sub, super, mopt);
            pr.monotone_converged = mr.converged;
            pr.monotone_diverged = mr.diverged;
            if (mr.converged) {
                pr.success = true;
                pr.method = "monotone";
                out.solution = mr.record;
            }
        } catch (const SolverError&) {
            pr.monotone_converged = false;
        }
    }
    return out;
}

}  // namespace

LambdaStarEstimate estimate_lambda_star(const Problem& tmpl, const LambdaStarOptions& options)
{
    if (!(options.resolution > 0.0)) throw ValidationError("lambda-star resolution must be positive");
    const FractionalOperator& op = *tmpl.op;
    const auto& p = tmpl.params;
    const Vector torsion = solve_torsion(op).u;
    const Vector v1 = p.q < 1.0 ? solve_sublinear(op, 1.0, p.q).u : Vector();

    LambdaStarEstimate est;
    std::optional<SolutionRecord> best;
    bool have_lower = false;
    bool have_upper = false;

    auto record_probe = [&](const ProbeOutcome& o) {
        est.probes.push_back(o.probe);
        ++est.steps;
        if (o.probe.success) {
            if (!have_lower || o.probe.lambda > est.lower) {
                est.lower = o.probe.lambda;
                est.lower_certificate = o.probe;
                best = o.solution;
                have_lower = true;
            }
        } else if (!have_upper || o.probe.lambda < est.upper) {
            est.upper = o.probe.lambda;
            est.upper_certificate = o.probe;
            have_upper = true;
        }
    };
    auto continued = [&]() -> std::optional<Vector> {
        if (best) return best->u;
        return std::nullopt;
    };

    const double lam1 = op.first_eigenvalue();
    double lambda = 0.5 * lam1;
    // Bracket: walk down until a success, then up until a failure.
    while (!have_lower && est.steps < options.max_steps) {
        record_probe(probe_lambda(tmpl, lambda, continued(), torsion, v1, options));
        lambda *= 0.5;
        if (lambda < 1e-12 * lam1) break;
    }
    lambda = have_upper ? est.upper : 2.0 * est.lower;
    while (have_lower && !have_upper && est.steps < options.max_steps) {
        // Growth by a factor 1.5 keeps Newton seeds from the continued branch useful.
        lambda = std::max(lambda, 1.5 * est.lower);
        record_probe(probe_lambda(tmpl, lambda, continued(), torsion, v1, options));
        lambda *= 1.5;
    }
    if (!have_lower || !have_upper) {
        est.width = std::numeric_limits<double>::infinity();
        est.nearest_solution = best;
        return est;
    }
    while (est.upper - est.lower > options.resolution && est.steps < options.max_steps) {
        const double mid = 0.5 * (est.lower + est.upper);
        record_probe(probe_lambda(tmpl, mid, continued(), torsion, v1, options));
    }
    est.width = est.upper - est.lower;
    est.resolved = est.width <= options.resolution;
    if (best) {
        best->kind = p.q < 1.0 && est.lower_certificate.method == "monotone" ? SolutionKind::Minimal
                                                                           : SolutionKind::Other;
    }
    est.nearest_solution = best;
    return est;
}

Branch bifurcation_branch_q1(const Problem& tmpl, std::vector<double> lambdas, const NewtonOptions& options)
{
    const FractionalOperator& op = *tmpl.op;
    const auto& p = tmpl.params;
    if (p.q != 1.0) throw ValidationError("bifurcation branch requires q = 1");
    if (lambdas.empty()) throw ValidationError("lambda grid must not be empty");
    const double lam1 = op.first_eigenvalue();
    for (double l : lambdas) {
        if (!(l > 0.0 && l < lam1)) throw ValidationError("bifurcation grid must lie in (0, lambda_1^s)");
    }
    std::sort(lambdas.begin(), lambdas.end(), std::greater<>());

    Branch branch;
    branch.params = p;
    branch.alpha = tmpl.alpha;
    branch.kind = BranchKind::BifurcationQ1;
    NewtonOptions nopt = options;
    nopt.relative = true;

    Vector phi = op.basis().phis.col(0);
    if (phi.sum() < 0.0) phi = -phi;
    std::optional<Vector> prev;
    double prev_lambda = lam1;
    for (double lambda : lambdas) {
        const Problem pb = tmpl.with_lambda(lambda);
        Vector seed;
        if (prev) {
            // Rescale the previous solution by the one-mode amplitude ratio.
            const double ratio = galerkin_amplitude(op, lambda, p.r) / galerkin_amplitude(op, prev_lambda, p.r);
            seed = *prev * ratio;
        } else {
            seed = galerkin_amplitude(op, lambda, p.r) * phi;
        }
        NewtonResult nr = newton_solve(pb, seed, nopt);
        if (!nr.converged && prev) nr = newton_solve(pb, *prev, nopt);
        if (!nr.converged) {
            std::ostringstream os;
            os << "lambda = " << format_double(lambda) << ": Newton failed (" << nr.failure << ")";
            branch.truncation = os.str();
            break;
        }
        if (nr.rcond < 1e-12 && branch.fold.empty()) {
            std::ostringstream os;
            os << "near-singular Jacobian at lambda = " << format_double(lambda) << " (rcond "
               << format_double(nr.rcond) << ")";
            branch.fold = os.str();
        }
        SolutionRecord rec = nr.record;
        rec.kind = SolutionKind::Other;
        branch.nu1.push_back(linearized_first_eigenvalue(op, linearized_potential(pb.params, rec.u)).nu1);
        prev = rec.u;
        prev_lambda = lambda;
        branch.points.push_back(std::move(rec));
    }
    return branch;
}

namespace {

AlphaSweepRow sweep_one(const MeshedDomain& mesh, const BoundaryPartition& partition, const ProblemParams& tmpl,
                        const AlphaSweepOptions& options)
{
    AlphaSweepRow row;
    row.alpha = partition.alpha;
    row.dirichlet_measure = partition.dirichlet_measure(mesh);
    try {
        SpectralSetup setup = make_setup(mesh, partition, tmpl.s);
        const int dim = setup.dimension();
        row.lambda1_s = setup.op.first_eigenvalue();
        if (options.sobolev) {
            const double crit = critical_exponent(dim, tmpl.s);
            const double p = std::isfinite(crit) ? crit : 4.0;
            row.sobolev_constant = sobolev_quotient(setup.op, p, dim).value;
        }
        Problem pb(setup.op, tmpl, partition.alpha);
        LambdaStarOptions lopt = options.lambda_star;
        if (options.relative_resolution > 0.0) lopt.resolution = options.relative_resolution * row.lambda1_s;
        const LambdaStarEstimate est = estimate_lambda_star(pb, lopt);
        row.lambda_lower = est.lower;
        row.lambda_upper = est.upper;
        if (!(est.lower > 0.0)) throw SolverError("no converged solve found for the threshold bracket");
        row.lambda = options.lambda_fraction * est.lower;
        const Branch minimal = continue_minimal_branch(pb, {row.lambda});
        if (minimal.points.empty()) throw SolverError("minimal solve failed: " + minimal.truncation);
        const SolutionRecord& umin = minimal.points.front();
        row.min_sup = umin.sup_norm;
        row.min_hs = umin.hs_norm;
        row.min_energy = umin.energy;
        const MountainPassResult mp = mountain_pass_solve(pb.with_lambda(row.lambda), umin.u, options.mountain_pass);
        row.mp_status = to_string(mp.status);
        if (mp.status == MountainPassStatus::Found) {
            row.mp_sup = mp.record.sup_norm;
            row.mp_hs = mp.record.hs_norm;
            row.mp_energy = mp.record.energy;
        }
    } catch (const std::exception& e) {
        row.error = e.what();
    }
    return row;
}

template <class Get>
bool increasing_in_alpha(const std::vector<AlphaSweepRow>& rows, Get get)
{
    for (const auto& r : rows) {
        if (!r.error.empty()) return false;
    }
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (!(get(rows[i]) > get(rows[i - 1]))) return false;
    }
    return true;
}

}  // namespace

AlphaSweepResult alpha_sweep(const PartitionFamily& family, const ProblemParams& tmpl,
                             const AlphaSweepOptions& options)
{
    tmpl.validate(family.mesh.spec.dimension());
    const std::size_t n = family.members.size();
    AlphaSweepResult result;
    result.rows.resize(n);

    const int jobs = std::max(1, std::min<int>(options.jobs, static_cast<int>(n)));
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t i = next++; i < n; i = next++) {
            result.rows[i] = sweep_one(family.mesh, family.members[i], tmpl, options);
        }
    };
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    const auto& rows = result.rows;
    result.lambda1_decreasing = increasing_in_alpha(rows, [](const AlphaSweepRow& r) { return r.lambda1_s; });
    result.min_sup_decreasing = increasing_in_alpha(rows, [](const AlphaSweepRow& r) { return r.min_sup; });
    result.min_hs_decreasing = increasing_in_alpha(rows, [](const AlphaSweepRow& r) { return r.min_hs; });
    result.mp_hs_decreasing = increasing_in_alpha(rows, [](const AlphaSweepRow& r) {
        return r.mp_status == "found" ? r.mp_hs : std::numeric_limits<double>::quiet_NaN();
    });
    result.lambda_star_decreasing =
        increasing_in_alpha(rows, [](const AlphaSweepRow& r) { return r.lambda_lower; });
    return result;
}

UniformBoundReport uniform_bound_study(const SpectralSetup& setup, const ProblemParams& tmpl,
                                       const std::vector<double>& fractions, const LambdaStarOptions& options)
{
    UniformBoundReport rep;
    Problem pb(setup.op, tmpl, setup.partition.alpha);
    const LambdaStarEstimate est = estimate_lambda_star(pb, options);
    if (!(est.lower > 0.0)) throw SolverError("uniform bound study: no lower threshold bound");
    rep.lambda_lower = est.lower;
    std::vector<double> grid;
    for (double f : fractions) grid.push_back(f * est.lower);
    std::sort(grid.begin(), grid.end());
    const Branch minimal = continue_minimal_branch(pb, grid);
    for (const SolutionRecord& m : minimal.points) {
        rep.lambdas.push_back(m.params.lambda);
        rep.min_sup.push_back(m.sup_norm);
        rep.max_sup = std::max(rep.max_sup, m.sup_norm);
        const MountainPassResult mp = mountain_pass_solve(pb.with_lambda(m.params.lambda), m.u);
        if (mp.status == MountainPassStatus::Found) {
            rep.mp_sup.push_back(mp.record.sup_norm);
            rep.max_sup = std::max(rep.max_sup, mp.record.sup_norm);
        } else {
            rep.mp_sup.push_back(std::numeric_limits<double>::quiet_NaN());
            ++rep.mp_failures;
        }
    }
    return rep;
}

void write_branch_csv(std::ostream& out, const Branch& branch)
{
    out << "lambda,sup_norm,hs_norm,energy,residual,nu1,kind\n";
    for (std::size_t i = 0; i < branch.points.size(); ++i) {
        const SolutionRecord& r = branch.points[i];
        const double nu = i < branch.nu1.size() ? branch.nu1[i] : std::numeric_limits<double>::quiet_NaN();
        out << csv_row({r.params.lambda, r.sup_norm, r.hs_norm, r.energy, r.residual, nu}) << ','
            << to_string(branch.kind) << '\n';
    }
}

void write_sweep_csv(std::ostream& out, const AlphaSweepResult& sweep)
{
    out << "alpha,dirichlet_measure,lambda1_s,sobolev_constant,lambda_lower,lambda_upper,lambda,"
           "min_sup,min_hs,min_energy,mp_sup,mp_hs,mp_energy,mp_status,error\n";
    for (const AlphaSweepRow& r : sweep.rows) {
        std::string err = r.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        out << csv_row({r.alpha, r.dirichlet_measure, r.lambda1_s, r.sobolev_constant, r.lambda_lower,
                        r.lambda_upper, r.lambda, r.min_sup, r.min_hs, r.min_energy, r.mp_sup, r.mp_hs,
                        r.mp_energy})
            << ',' << r.mp_status << ',' << err << '\n';
    }
}

nlohmann::json to_json(const SolutionRecord& record, bool include_field)
{
    nlohmann::json j;
    j["params"] = {{"lambda", record.params.lambda},
                   {"q", record.params.q},
                   {"r", record.params.r},
                   {"s", record.params.s}};
    j["alpha"] = record.alpha;
    j["residual"] = record.residual;
    j["energy"] = record.energy;
    j["sup_norm"] = record.sup_norm;
    j["hs_norm"] = record.hs_norm;
    j["kind"] = to_string(record.kind);
    j["iterations"] = record.iterations;
    if (include_field) j["u"] = vector_to_json(record.u);
    return j;
}

nlohmann::json to_json(const LambdaProbe& probe)
{
    return {{"lambda", probe.lambda},
            {"success", probe.success},
            {"method", probe.method},
            {"supersolution_feasible", probe.supersolution_feasible},
            {"supersolution_m", probe.supersolution_m},
            {"monotone_converged", probe.monotone_converged},
            {"monotone_diverged", probe.monotone_diverged},
            {"newton_converged", probe.newton_converged},
            {"newton_failure", probe.newton_failure},
            {"newton_initial_residual", probe.newton_initial_residual},
            {"newton_final_residual", probe.newton_final_residual},
            {"newton_residual_growth", probe.newton_residual_growth},
            {"certified_failure", probe.certified_failure()}};
}

nlohmann::json to_json(const LambdaStarEstimate& estimate)
{
    nlohmann::json j;
    j["lower"] = estimate.lower;
    j["upper"] = estimate.upper;
    j["width"] = std::isfinite(estimate.width) ? nlohmann::json(estimate.width) : nlohmann::json(nullptr);
    j["resolved"] = estimate.resolved;
    j["steps"] = estimate.steps;
    j["lower_certificate"] = to_json(estimate.lower_certificate);
    j["upper_certificate"] = to_json(estimate.upper_certificate);
    if (estimate.nearest_solution) {
        j["nearest_solution"] = to_json(*estimate.nearest_solution);
        j["nearest_distance_to_upper"] = estimate.upper - estimate.lower;
    }
    nlohmann::json probes = nlohmann::json::array();
    for (const auto& p : estimate.probes) probes.push_back(to_json(p));
    j["probes"] = probes;
    return j;
}

}  // namespace fracmix
