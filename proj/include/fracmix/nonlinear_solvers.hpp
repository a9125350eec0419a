#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fracmix/spectral_core.hpp"

namespace fracmix {

/// Exponents and parameter of (-Delta)^s u = lambda u^q + u^r.
struct ProblemParams {
    double lambda = 0.0;
    double q = 0.5;
    double r = 2.0;
    double s = 0.75;

    /// lambda >= 0, 0 < q <= 1 < r, 1/2 < s < 1 and, in 2D, r < (2 + 2s) / (2 - 2s).
    void validate(int dimension) const;
    ProblemParams with_lambda(double l) const
    {
        ProblemParams p = *this;
        p.lambda = l;
        return p;
    }
};

/// Upper exponent bound (N + 2s)/(N - 2s); infinite when N <= 2s.
double subcritical_bound(int dimension, double s);

enum class SolutionKind { Minimal, MountainPass, Other };
std::string to_string(SolutionKind kind);

struct SolutionRecord {
    Vector u;
    ProblemParams params;
    double alpha = 0.0;
    double residual = 0.0;
    double energy = 0.0;
    double sup_norm = 0.0;
    double hs_norm = 0.0;
    SolutionKind kind = SolutionKind::Other;
    int iterations = 0;
};

struct IterationTrace {
    std::vector<double> sup_norm;
    std::vector<double> residual;
    std::vector<double> energy;
    std::string termination;
};

/// Operator, parameters and boundary-measure label of one (P_lambda) instance.
struct Problem {
    const FractionalOperator* op = nullptr;
    ProblemParams params;
    double alpha = 0.0;

    Problem(const FractionalOperator& o, ProblemParams p, double a = 0.0) : op(&o), params(p), alpha(a) {}
    Problem with_lambda(double l) const { return Problem(*op, params.with_lambda(l), alpha); }
};

/// f_lambda(u) = lambda |u|^{q-1} u + |u|^{r-1} u.
Vector nonlinearity(const ProblemParams& params, const Vector& u);
/// lambda q |u|^{q-1} + r |u|^{r-1}, with |u| floored at 1e-12.
Vector linearized_potential(const ProblemParams& params, const Vector& u);

/// I_lambda(u) = 1/2 ||u||_{H^s}^2 - lambda/(q+1) int |u|^{q+1} - 1/(r+1) int |u|^{r+1}.
double energy(const Problem& problem, const Vector& u);

struct ResidualResult {
    Vector values;
    double norm = 0.0;
    bool had_negative = false;  // odd extension was used on negative entries
};

ResidualResult residual(const Problem& problem, const Vector& u);

/// Fills residual, energy and norms of a record for u.
SolutionRecord make_record(const Problem& problem, Vector u, SolutionKind kind, int iterations = 0);

/// (-Delta)^s g = 1 in the spectral basis.
SolutionRecord solve_torsion(const FractionalOperator& op);

struct SublinearOptions {
    double start_scale = 1e-3;        // start = start_scale * phi_1 / ||phi_1||_inf
    std::optional<Vector> start;      // overrides start_scale
    int max_iterations = 20000;
    double tolerance = 1e-12;         // sup-norm increment
};

/// Unique positive solution of (-Delta)^s v = lambda v^q, 0 < q < 1.
SolutionRecord solve_sublinear(const FractionalOperator& op, double lambda, double q,
                               const SublinearOptions& options = {});

struct Supersolution {
    double m = 0.0;
    Vector h;  // M g
};

/// Smallest M > 0 with M >= lambda M^q G^q + M^r G^r, G = ||g||_inf.
/// Throws NoSupersolution when infeasible.
double supersolution_scale(double lambda, double q, double r, double g_sup);
Supersolution build_supersolution(const ProblemParams& params, const Vector& torsion);

struct MonotoneOptions {
    int max_iterations = 200000;
    double tolerance = 1e-10;         // sup-norm increment
    double blowup = 1e8;              // sup norm treated as divergence
    bool check_inputs = true;
    int trace_stride = 1;
};

struct MonotoneResult {
    SolutionRecord record;
    IterationTrace trace;
    bool converged = false;
    bool diverged = false;
    double min_increment = 0.0;       // most negative step seen (>= -1e-13 when monotone)
};

/// u_{n+1} = ((-Delta)^s)^{-1}(lambda u_n^q + u_n^r) from a subsolution; the
/// supersolution, when given, bounds every iterate. Throws SolverError on an
/// ordering violation.
MonotoneResult monotone_iteration(const Problem& problem, const Vector& sub,
                                  const std::optional<Vector>& super, const MonotoneOptions& options = {});

struct NewtonOptions {
    int max_iterations = 60;
    double tolerance = 1e-10;         // residual norm
    int max_halvings = 30;
    bool relative = false;            // compare against tolerance * ||u||_M instead
};

struct NewtonResult {
    SolutionRecord record;
    bool converged = false;
    int iterations = 0;
    double rcond = 1.0;
    std::string failure;              // empty on success
    std::vector<double> residual_history;
};

/// Damped Newton on F(u) = (-Delta)^s u - lambda u^q - u^r keeping u > 0.
NewtonResult newton_solve(const Problem& problem, const Vector& init, const NewtonOptions& options = {});

/// Jacobian of F at u as a dense matrix acting on dof values.
Matrix residual_jacobian(const Problem& problem, const Vector& u);

enum class MountainPassStatus { Found, NoneFound, NumericalFailure };
std::string to_string(MountainPassStatus status);

struct MountainPassOptions {
    int path_points = 25;
    int max_iterations = 4000;
    double gradient_tolerance = 1e-5; // relative Sobolev-gradient norm before polishing
    double separation = 1e-3;         // ||u_mp - u_min||_inf
};

struct MountainPassResult {
    MountainPassStatus status = MountainPassStatus::NumericalFailure;
    SolutionRecord record;
    int iterations = 0;
    double peak_energy = 0.0;
    std::string message;
};

/// Path-deformation mountain-pass descent between u_min and t phi_1, Newton-polished.
MountainPassResult mountain_pass_solve(const Problem& problem, const Vector& u_min,
                                       const MountainPassOptions& options = {});

struct ComparisonReport {
    bool ordered = false;
    bool f_over_t_decreasing = true;
    bool sub_ok = true;
    bool super_ok = true;
    double max_violation = 0.0;       // max(u1 - u2)
};

/// u1 <= u2 + 1e-10 pointwise, plus the hypothesis checks of the comparison principle.
ComparisonReport comparison_check(const FractionalOperator& op, const Vector& u1, const Vector& u2,
                                  const std::function<double(double)>& f, double tol = 1e-10);

/// Plain pointwise ordering u1 <= u2 + tol.
bool ordered(const Vector& u1, const Vector& u2, double tol = 1e-10);

/// min_t (lambda t^q + t^r) / t by golden-section search on log t.
double concave_convex_ratio_min(double lambda, double q, double r);

}  // namespace fracmix
