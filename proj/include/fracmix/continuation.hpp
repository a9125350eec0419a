#pragma once

#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fracmix/mesh_domain.hpp"
#include "fracmix/nonlinear_solvers.hpp"
#include "fracmix/spectral_core.hpp"

namespace fracmix {

/// Mesh, partition and spectral operator of one boundary configuration.
struct SpectralSetup {
    MeshedDomain mesh;
    BoundaryPartition partition;
    std::shared_ptr<const MixedLaplacian> laplacian;
    std::shared_ptr<const EigenBasis> basis;
    FractionalOperator op;

    int dimension() const { return mesh.spec.dimension(); }
    /// Scatter dof values onto all mesh nodes (Dirichlet nodes get 0).
    Vector to_nodes(const Vector& dofs) const;
};

SpectralSetup make_setup(const MeshedDomain& mesh, const BoundaryPartition& partition, double s);
SpectralSetup make_setup(const DomainSpec& spec, double alpha, PartitionRule rule, double s);

enum class BranchKind { Minimal, MountainPass, BifurcationQ1 };
std::string to_string(BranchKind kind);

struct Branch {
    ProblemParams params;              // lambda unused
    double alpha = 0.0;
    BranchKind kind = BranchKind::Minimal;
    std::vector<SolutionRecord> points; // ordered by lambda as computed
    std::vector<double> nu1;           // linearized first eigenvalue per point
    std::string truncation;            // why the branch stopped early, if it did
    double max_order_violation = 0.0;  // max over consecutive pairs of (u_prev - u_next)
    std::string fold;                  // fold indication (bifurcation branch only)
};

struct ContinuationOptions {
    MonotoneOptions monotone{};
    NewtonOptions newton{};
    bool polish = true;                // Newton polish after monotone convergence
};

/// Minimal solutions along an increasing lambda grid, each seeded by the previous one.
Branch continue_minimal_branch(const Problem& tmpl, const std::vector<double>& lambdas,
                               const ContinuationOptions& options = {});

/// Mountain-pass solutions computed independently per lambda against the given minimal branch.
Branch mountain_pass_branch(const Problem& tmpl, const Branch& minimal,
                            const MountainPassOptions& options = {});

/// Evidence collected at one trial lambda of the bisection.
struct LambdaProbe {
    double lambda = 0.0;
    bool success = false;
    bool supersolution_feasible = false;
    double supersolution_m = 0.0;
    bool monotone_converged = false;
    bool monotone_diverged = false;
    bool newton_converged = false;
    std::string newton_failure;
    bool newton_residual_growth = false; // final residual not below the starting one
    double newton_initial_residual = 0.0;
    double newton_final_residual = 0.0;
    std::string method;                  // which test produced success
    /// Failure is certified when no supersolution exists and Newton from the continued branch fails.
    bool certified_failure() const { return !success && !supersolution_feasible && !newton_converged; }
};

struct LambdaStarOptions {
    double resolution = 1e-3;          // absolute target width
    int max_steps = 80;
    int monotone_iterations = 20000;
    NewtonOptions newton{};
};

struct LambdaStarEstimate {
    double lower = 0.0;
    double upper = 0.0;
    double width = 0.0;
    bool resolved = false;             // width <= resolution
    int steps = 0;
    LambdaProbe lower_certificate;
    LambdaProbe upper_certificate;
    std::optional<SolutionRecord> nearest_solution;  // converged solve at `lower`
    std::vector<LambdaProbe> probes;
};

/// Bisection for the existence threshold. For q = 1 success means a positive nontrivial
/// Newton solution seeded from the one-mode amplitude or the continued branch.
LambdaStarEstimate estimate_lambda_star(const Problem& tmpl, const LambdaStarOptions& options = {});

/// Amplitude of the one-mode Galerkin solution c phi_1 for q = 1; 0 when lambda >= lambda_1^s.
double galerkin_amplitude(const FractionalOperator& op, double lambda, double r);

/// q = 1 branch from near lambda_1^s down to small lambda (grid in any order; sorted decreasing).
Branch bifurcation_branch_q1(const Problem& tmpl, std::vector<double> lambdas,
                             const NewtonOptions& options = {});

struct AlphaSweepOptions {
    double lambda_fraction = 0.5;      // lambda = fraction * Lambda_lower(alpha)
    LambdaStarOptions lambda_star{};
    double relative_resolution = 1e-3; // overrides lambda_star.resolution as a fraction of lambda_1^s
    MountainPassOptions mountain_pass{};
    bool sobolev = true;
    int jobs = 1;
};

struct AlphaSweepRow {
    double alpha = 0.0;
    double dirichlet_measure = 0.0;
    double lambda1_s = 0.0;
    double sobolev_constant = 0.0;
    double lambda_lower = 0.0;
    double lambda_upper = 0.0;
    double lambda = 0.0;
    double min_sup = 0.0;
    double min_hs = 0.0;
    double min_energy = 0.0;
    std::string mp_status;
    double mp_sup = 0.0;
    double mp_hs = 0.0;
    double mp_energy = 0.0;
    std::string error;                 // non-empty when this alpha failed
};

struct AlphaSweepResult {
    std::vector<AlphaSweepRow> rows;   // ordered by alpha as given
    bool lambda1_decreasing = false;   // along decreasing alpha
    bool min_sup_decreasing = false;
    bool min_hs_decreasing = false;
    bool mp_hs_decreasing = false;
    bool lambda_star_decreasing = false;
};

/// Per-alpha protocol over a nested family; individual failures are recorded and the sweep continues.
AlphaSweepResult alpha_sweep(const PartitionFamily& family, const ProblemParams& tmpl,
                             const AlphaSweepOptions& options = {});

/// Largest ||u||_inf over a minimal branch and its mountain-pass partners.
struct UniformBoundReport {
    double lambda_lower = 0.0;
    std::vector<double> lambdas;
    std::vector<double> min_sup;
    std::vector<double> mp_sup;
    double max_sup = 0.0;
    int mp_failures = 0;
};

UniformBoundReport uniform_bound_study(const SpectralSetup& setup, const ProblemParams& tmpl,
                                       const std::vector<double>& fractions,
                                       const LambdaStarOptions& options = {});

/// "lambda,sup_norm,hs_norm,energy,residual,nu1,kind" rows.
void write_branch_csv(std::ostream& out, const Branch& branch);
void write_sweep_csv(std::ostream& out, const AlphaSweepResult& sweep);
nlohmann::json to_json(const SolutionRecord& record, bool include_field = false);
nlohmann::json to_json(const LambdaProbe& probe);
nlohmann::json to_json(const LambdaStarEstimate& estimate);

}  // namespace fracmix
