#pragma once

#include <memory>
#include <mutex>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "fracmix/mesh_domain.hpp"

namespace fracmix {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

/// Mixed Dirichlet-Neumann Laplacian on the non-Dirichlet nodes.
///
/// The stencil is the 3-point (1D) or 5-point (2D) second difference with
/// reflected ghost points on Neumann nodes. Dirichlet nodes are eliminated.
/// `stiffness` = diag(mass) * A is symmetric; A itself is mass-symmetric.
struct MixedLaplacian {
    std::vector<int> dof_to_node;
    std::vector<int> node_to_dof;  // -1 on Dirichlet nodes
    SparseMatrix stiffness;
    Vector mass;

    int size() const { return static_cast<int>(dof_to_node.size()); }
    /// A u = M^{-1} K u.
    Vector apply(const Vector& u) const;
    Matrix dense_operator() const;
};

MixedLaplacian assemble(const MeshedDomain& mesh, const BoundaryPartition& partition);

/// Ascending eigenpairs, mass-orthonormal, phi_1 sign-normalized positive.
struct EigenBasis {
    Vector lambdas;
    Matrix phis;  // dofs x count
    Vector mass;

    int count() const { return static_cast<int>(lambdas.size()); }
    int dofs() const { return static_cast<int>(mass.size()); }
    /// a_j = <u, phi_j>_mass.
    Vector coefficients(const Vector& u) const;
    Vector synthesize(const Vector& coeffs) const { return phis * coeffs; }
    double inner(const Vector& u, const Vector& v) const;
    double l2_norm(const Vector& u) const;
    /// max |<phi_i, phi_j> - delta_ij|
    double orthonormality_defect() const;
};

/// Dense symmetric eigendecomposition of M^{-1/2} K M^{-1/2}; throws
/// SolverError if the residual check ||A phi - lambda phi|| <= 1e-9 lambda fails.
EigenBasis eigendecompose(const MixedLaplacian& laplacian);

/// Generic generalized eigensolve used for diagonal and hand-built test matrices.
EigenBasis eigendecompose(const Matrix& stiffness, const Vector& mass);

/// Spectral power (-Delta)^s acting through a shared eigenbasis.
class FractionalOperator {
public:
    /// Standing hypothesis 1/2 < s < 1; throws ValidationError otherwise.
    FractionalOperator(std::shared_ptr<const EigenBasis> basis, double s);

    /// Any s in (0, 1]; used for power identities that need s = 1 or small s.
    static FractionalOperator with_any_order(std::shared_ptr<const EigenBasis> basis, double s);

    double order() const { return s_; }
    const EigenBasis& basis() const { return *basis_; }
    std::shared_ptr<const EigenBasis> shared_basis() const { return basis_; }
    int dofs() const { return basis_->dofs(); }
    const Vector& mass() const { return basis_->mass; }
    const Vector& powered_eigenvalues() const { return lambda_s_; }

    Vector apply(const Vector& u) const;
    /// ((-Delta)^s)^{-1} f
    Vector solve(const Vector& f) const;
    double hs_norm(const Vector& u) const;
    double first_eigenvalue() const { return lambda_s_(0); }
    /// Dense matrix of the operator, Phi diag(lambda^s) Phi^T M; built once and shared by copies.
    const Matrix& dense() const;

private:
    FractionalOperator(std::shared_ptr<const EigenBasis> basis, double s, bool checked);

    std::shared_ptr<const EigenBasis> basis_;
    double s_;
    Vector lambda_s_;
    struct DenseCache;
    std::shared_ptr<DenseCache> dense_;
};

Vector apply_fractional(const FractionalOperator& op, const Vector& u);
double hs_norm(const FractionalOperator& op, const Vector& u);
double first_eigenvalue_s(const FractionalOperator& op);

struct QuotientResult {
    double value = 0.0;
    Vector minimizer;
    int iterations = 0;
    bool converged = false;
    std::vector<double> trace;  // quotient per iteration
};

struct QuotientOptions {
    int max_iterations = 2000;
    double tolerance = 1e-12;  // relative decrease per iteration
};

/// Largest admissible Lebesgue exponent for the quotient (infinity in 1D).
double critical_exponent(int dimension, double s);

/// min ||u||_{H^s}^2 / ||u||_{L^p}^2 over the discrete space, started from phi_1.
QuotientResult sobolev_quotient(const FractionalOperator& op, double p, int dimension,
                                const QuotientOptions& options = {});

struct LinearizedEigen {
    double nu1 = 0.0;
    Vector eigenfunction;
};

/// Smallest eigenvalue of (-Delta)^s - diag(a) in the mass inner product.
LinearizedEigen linearized_first_eigenvalue(const FractionalOperator& op, const Vector& potential);

/// Eigenvalues as CSV ("index,lambda,lambda_s").
void write_eigenvalues_csv(std::ostream& out, const EigenBasis& basis, double s);

}  // namespace fracmix
