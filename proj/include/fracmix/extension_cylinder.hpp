#pragma once

#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "fracmix/spectral_core.hpp"

namespace fracmix {

struct CylinderOptions {
    double grading = 1.15;        // ratio between consecutive y-steps
    double first_step = 0.0;      // 0 selects 1e-3 of the smallest base spacing
    double decay_tolerance = 1e-8; // exp(-sqrt(lambda_1) Y_max) <= decay_tolerance
};

/// Truncated cylinder Omega x [0, Y_max] with a geometrically graded y-grid.
///
/// The y-direction uses exact integrals of the weight: mu_k is the y^{1-2s}
/// measure of the dual cell around y_k and c_{k+1/2} = 1 / int y^{2s-1} over
/// [y_k, y_{k+1}], so that profiles linear in y^{2s} carry an exact flux.
struct CylinderGrid {
    std::shared_ptr<const MixedLaplacian> base;
    double s = 0.75;
    double y_max = 0.0;
    Vector y;             // y_0 = 0 < y_1 < ... < y_m = Y_max
    Vector dual_weight;   // mu_k
    Vector conductance;   // c_{k+1/2}, size m

    int layers() const { return static_cast<int>(y.size()); }
};

/// lambda1 is the first eigenvalue of the mixed Laplacian (sets Y_max).
CylinderGrid make_cylinder_grid(std::shared_ptr<const MixedLaplacian> base, double s, double lambda1,
                                const CylinderOptions& options = {});

/// U(x_i, y_k) stored as dofs x layers; column 0 is the trace.
struct ExtensionField {
    Matrix values;
    double s = 0.75;
    double cap_ratio = 0.0;  // ||U(., Y_max)|| / ||U(., 0)||
    std::string warning;

    Vector trace() const { return values.col(0); }
};

/// Factorized weighted-Laplace operators on a fixed grid.
///
/// Dirichlet lateral nodes are eliminated, Neumann lateral nodes reuse the
/// reflected stencil of the base Laplacian; the cap at Y_max is homogeneous Neumann.
class CylinderSolver {
public:
    explicit CylinderSolver(CylinderGrid grid);

    const CylinderGrid& grid() const { return grid_; }

    /// Harmonic extension with trace u.
    ExtensionField solve_extension(const Vector& trace) const;
    /// Unscaled flux -lim y^{1-2s} dU/dy at y = 0 (includes the half-cell lateral term).
    Vector flux(const ExtensionField& field) const;
    /// Unscaled Dirichlet-to-Neumann map u -> flux(E[u]).
    Vector dtn(const Vector& trace) const;
    /// Trace of the extension whose unscaled flux equals f (inverse DtN).
    Vector neumann_trace(const Vector& f) const;
    /// int y^{1-2s} |grad U|^2 in the discrete quadrature.
    double weighted_energy(const ExtensionField& field) const;
    /// Residual of the interior weighted stencil (max-norm).
    double stencil_residual(const ExtensionField& field) const;

private:
    CylinderGrid grid_;
    struct Factorizations;
    std::shared_ptr<const Factorizations> factors_;
};

/// -kappa lim y^{1-2s} dU/dy, realized on the first interior layer.
Vector dtn_flux(const CylinderSolver& solver, const ExtensionField& field, double kappa);

struct KappaCalibration {
    double s = 0.75;
    double kappa = 0.0;
    double calibration_error = 0.0;
    /// 2^{2s-1} Gamma(s) / Gamma(1-s), for reference only.
    double reference_kappa = 0.0;
};

/// Least-squares fit of kappa so that the flux of E[phi_1] matches lambda_1^s phi_1.
KappaCalibration calibrate_kappa(const CylinderSolver& solver, const FractionalOperator& op);

/// ||kappa * flux(E[u]) - (-Delta)^s u|| / ||(-Delta)^s u|| in the mass norm.
double extension_vs_spectral_error(const CylinderSolver& solver, const FractionalOperator& op,
                                   const Vector& u, double kappa);

/// min over cylinder functions vanishing on Sigma_D^* of
/// int y^{1-2s}|grad phi|^2 / (int |phi(.,0)|^p)^{2/p}.
QuotientResult trace_inequality_constant(const CylinderSolver& solver, double p,
                                         const QuotientOptions& options = {});

/// CSV slice U(., y_k) with node coordinates.
void write_extension_slice_csv(std::ostream& out, const MeshedDomain& mesh, const CylinderSolver& solver,
                               const ExtensionField& field, int layer);

}  // namespace fracmix
