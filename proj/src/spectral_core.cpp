#include "fracmix/spectral_core.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "fracmix/error.hpp"
#include "fracmix/quotient_minimizer.hpp"

namespace fracmix {

Vector MixedLaplacian::apply(const Vector& u) const
{
    return (stiffness * u).cwiseQuotient(mass);
}

Matrix MixedLaplacian::dense_operator() const
{
    Matrix k = Matrix(stiffness);
    return mass.cwiseInverse().asDiagonal() * k;
}

MixedLaplacian assemble(const MeshedDomain& mesh, const BoundaryPartition& partition)
{
    if (partition.dirichlet_nodes.empty()) {
        throw ValidationError("assemble: empty Dirichlet set (the mixed Laplacian would be singular)");
    }
    if (partition.is_dirichlet.size() != mesh.node_count()) {
        throw ValidationError("assemble: partition was built on a different mesh");
    }
    MixedLaplacian lap;
    const int n = static_cast<int>(mesh.node_count());
    lap.node_to_dof.assign(n, -1);
    for (int node = 0; node < n; ++node) {
        if (mesh.on_boundary[node] && partition.is_dirichlet[node]) continue;
        lap.node_to_dof[node] = static_cast<int>(lap.dof_to_node.size());
        lap.dof_to_node.push_back(node);
    }
    const int ndof = lap.size();
    lap.mass.resize(ndof);

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(ndof) * 5);
    const int dim = mesh.spec.dimension();
    for (int p = 0; p < ndof; ++p) {
        const int node = lap.dof_to_node[p];
        const double m = mesh.cell_measure(node);
        lap.mass(p) = m;
        double diag = 0.0;
        for (int a = 0; a < dim; ++a) {
            const int na = mesh.spec.nodes[a];
            const double h2 = mesh.spec.spacing(a) * mesh.spec.spacing(a);
            const int i = mesh.axis_index(node, a);
            const int stride = (a == 0) ? 1 : mesh.nx();
            diag += 2.0 / h2;
            auto couple = [&](int neighbour, double coef) {
                const int q = lap.node_to_dof[neighbour];
                if (q >= 0) triplets.emplace_back(p, q, m * coef);
            };
            if (i == 0) {
                couple(node + stride, -2.0 / h2);  // reflected ghost
            } else if (i == na - 1) {
                couple(node - stride, -2.0 / h2);
            } else {
                couple(node - stride, -1.0 / h2);
                couple(node + stride, -1.0 / h2);
            }
        }
        triplets.emplace_back(p, p, m * diag);
    }
    lap.stiffness.resize(ndof, ndof);
    lap.stiffness.setFromTriplets(triplets.begin(), triplets.end());
    return lap;
}

Vector EigenBasis::coefficients(const Vector& u) const
{
    if (u.size() != mass.size()) throw ValidationError("grid function has wrong dimension");
    return phis.transpose() * mass.cwiseProduct(u);
}

double EigenBasis::inner(const Vector& u, const Vector& v) const
{
    return mass.cwiseProduct(u).dot(v);
}

double EigenBasis::l2_norm(const Vector& u) const
{
    return std::sqrt(inner(u, u));
}

double EigenBasis::orthonormality_defect() const
{
    const Matrix gram = phis.transpose() * mass.asDiagonal() * phis;
    return (gram - Matrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
}

EigenBasis eigendecompose(const Matrix& stiffness, const Vector& mass)
{
    if (stiffness.rows() != stiffness.cols() || stiffness.rows() != mass.size()) {
        throw ValidationError("eigendecompose: dimension mismatch");
    }
    const Vector d = mass.cwiseSqrt().cwiseInverse();
    const Matrix sym = d.asDiagonal() * stiffness * d.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (sym + sym.transpose()));
    if (solver.info() != Eigen::Success) {
        throw SolverError("eigendecompose: symmetric eigensolver did not converge");
    }
    EigenBasis basis;
    basis.lambdas = solver.eigenvalues();
    basis.phis = d.asDiagonal() * solver.eigenvectors();
    basis.mass = mass;
    for (int j = 0; j < basis.count(); ++j) {
        auto col = basis.phis.col(j);
        const double total = mass.dot(col);
        double sign = total;
        if (std::abs(total) < 1e-10) {
            Eigen::Index k = 0;
            col.cwiseAbs().maxCoeff(&k);
            sign = col(k);
        }
        if (sign < 0.0) col = -col;
    }

    const Matrix residual = mass.cwiseInverse().asDiagonal() * (stiffness * basis.phis) -
                            basis.phis * basis.lambdas.asDiagonal();
    for (int j = 0; j < basis.count(); ++j) {
        const double r = std::sqrt(mass.dot(residual.col(j).cwiseAbs2()));
        const double scale = std::max(std::abs(basis.lambdas(j)), basis.lambdas.cwiseAbs().maxCoeff() * 1e-7);
        if (r > 1e-9 * scale) {
            std::ostringstream os;
            os << "eigendecompose: residual " << r << " for mode " << j << " exceeds 1e-9 lambda";
            throw SolverError(os.str());
        }
    }
    return basis;
}

EigenBasis eigendecompose(const MixedLaplacian& laplacian)
{
    EigenBasis basis = eigendecompose(Matrix(laplacian.stiffness), laplacian.mass);
    if (!(basis.lambdas(0) > 0.0)) {
        throw SolverError("eigendecompose: first eigenvalue is not positive");
    }
    return basis;
}

struct FractionalOperator::DenseCache {
    std::once_flag once;
    Matrix matrix;
};

FractionalOperator::FractionalOperator(std::shared_ptr<const EigenBasis> basis, double s)
    : FractionalOperator(std::move(basis), s, true)
{
}

FractionalOperator FractionalOperator::with_any_order(std::shared_ptr<const EigenBasis> basis, double s)
{
    return FractionalOperator(std::move(basis), s, false);
}

FractionalOperator::FractionalOperator(std::shared_ptr<const EigenBasis> basis, double s, bool checked)
    : basis_(std::move(basis)), s_(s)
{
    if (!basis_) throw ValidationError("fractional operator needs an eigenbasis");
    if (checked && !(s > 0.5 && s < 1.0)) {
        throw ValidationError("fractional order s must lie in (1/2, 1)");
    }
    if (!checked && !(s > 0.0 && s <= 1.0)) {
        throw ValidationError("fractional order s must lie in (0, 1]");
    }
    lambda_s_ = basis_->lambdas.array().pow(s_).matrix();
    dense_ = std::make_shared<DenseCache>();
}

Vector FractionalOperator::apply(const Vector& u) const
{
    return basis_->synthesize(lambda_s_.cwiseProduct(basis_->coefficients(u)));
}

Vector FractionalOperator::solve(const Vector& f) const
{
    return basis_->synthesize(basis_->coefficients(f).cwiseQuotient(lambda_s_));
}

double FractionalOperator::hs_norm(const Vector& u) const
{
    const Vector a = basis_->coefficients(u);
    return std::sqrt(lambda_s_.dot(a.cwiseAbs2()));
}

const Matrix& FractionalOperator::dense() const
{
    std::call_once(dense_->once, [this] {
        dense_->matrix = basis_->phis * lambda_s_.asDiagonal() * basis_->phis.transpose() *
                         basis_->mass.asDiagonal();
    });
    return dense_->matrix;
}

Vector apply_fractional(const FractionalOperator& op, const Vector& u) { return op.apply(u); }

double hs_norm(const FractionalOperator& op, const Vector& u) { return op.hs_norm(u); }

double first_eigenvalue_s(const FractionalOperator& op) { return op.first_eigenvalue(); }

double critical_exponent(int dimension, double s)
{
    if (dimension <= 2.0 * s) return std::numeric_limits<double>::infinity();
    return 2.0 * dimension / (dimension - 2.0 * s);
}

QuotientResult sobolev_quotient(const FractionalOperator& op, double p, int dimension,
                                const QuotientOptions& options)
{
    if (!(p >= 1.0) || p > critical_exponent(dimension, op.order())) {
        throw ValidationError("sobolev_quotient: exponent p outside [1, 2N/(N-2s)]");
    }
    QuotientProblem qp;
    qp.apply = [&op](const Vector& u) { return op.apply(u); };
    qp.precondition = [&op](const Vector& g) { return op.solve(g); };
    qp.mass = op.mass();
    qp.p = p;
    return minimize_quotient(qp, op.basis().phis.col(0), options);
}

LinearizedEigen linearized_first_eigenvalue(const FractionalOperator& op, const Vector& potential)
{
    const EigenBasis& b = op.basis();
    if (potential.size() != b.dofs()) throw ValidationError("potential has wrong dimension");
    Matrix coupling = b.phis.transpose() * b.mass.cwiseProduct(potential).asDiagonal() * b.phis;
    coupling = -0.5 * (coupling + coupling.transpose());
    coupling.diagonal() += op.powered_eigenvalues();
    Eigen::SelfAdjointEigenSolver<Matrix> solver(coupling);
    if (solver.info() != Eigen::Success) {
        throw SolverError("linearized_first_eigenvalue: eigensolver failed");
    }
    LinearizedEigen out;
    out.nu1 = solver.eigenvalues()(0);
    out.eigenfunction = b.synthesize(solver.eigenvectors().col(0));
    if (b.mass.dot(out.eigenfunction) < 0.0) out.eigenfunction = -out.eigenfunction;
    return out;
}

void write_eigenvalues_csv(std::ostream& out, const EigenBasis& basis, double s)
{
    out << "index,lambda,lambda_s\n";
    out << std::setprecision(17);
    for (int j = 0; j < basis.count(); ++j) {
        out << j + 1 << ',' << basis.lambdas(j) << ',' << std::pow(basis.lambdas(j), s) << '\n';
    }
}

}  // namespace fracmix
