#include "fracmix/quotient_minimizer.hpp"

#include <cmath>

#include "fracmix/error.hpp"

namespace fracmix {

double lp_norm(const Vector& u, const Vector& mass, double p)
{
    double acc = 0.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) acc += mass(i) * std::pow(std::abs(u(i)), p);
    return std::pow(acc, 1.0 / p);
}

namespace {

double quotient(const QuotientProblem& qp, const Vector& u)
{
    const double n = lp_norm(u, qp.mass, qp.p);
    const Vector bu = qp.apply(u);
    return qp.mass.cwiseProduct(bu).dot(u) / (n * n);
}

}  // namespace

QuotientResult minimize_quotient(const QuotientProblem& qp, Vector u, const QuotientOptions& options)
{
    if (!(qp.p >= 1.0)) throw ValidationError("quotient exponent p must be >= 1");
    QuotientResult result;
    u /= lp_norm(u, qp.mass, qp.p);
    double q = quotient(qp, u);
    result.trace.push_back(q);

    for (int it = 0; it < options.max_iterations; ++it) {
        // Gradient of Q at ||u||_p = 1, up to the factor 2, in the mass inner product.
        Vector g = qp.apply(u);
        for (Eigen::Index i = 0; i < u.size(); ++i) {
            g(i) -= q * std::pow(std::abs(u(i)), qp.p - 2.0) * u(i);
        }
        const double gnorm = std::sqrt(qp.mass.cwiseProduct(g).dot(g));
        Vector d = -qp.precondition(g);
        double slope = qp.mass.cwiseProduct(g).dot(d);
        if (!(slope < 0.0)) {
            d = -g;
            slope = -gnorm * gnorm;
        }

        double t = 1.0;
        double q_new = q;
        Vector trial;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            trial = u + t * d;
            const double n = lp_norm(trial, qp.mass, qp.p);
            if (n > 0.0 && std::isfinite(n)) {
                trial /= n;
                q_new = quotient(qp, trial);
                if (q_new <= q + 1e-4 * t * slope) {
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        result.iterations = it + 1;
        if (!accepted) {
            // No representable decrease left: stationary up to rounding.
            result.converged = gnorm <= 1e-6 * std::abs(q);
            break;
        }
        const double decrease = q - q_new;
        u = trial;
        q = q_new;
        result.trace.push_back(q);
        if (decrease <= options.tolerance * std::abs(q) && gnorm <= 1e-6 * std::abs(q)) {
            result.converged = true;
            break;
        }
    }
    result.value = q;
    result.minimizer = u;
    return result;
}

}  // namespace fracmix
