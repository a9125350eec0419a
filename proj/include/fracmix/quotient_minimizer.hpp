#pragma once

#include <functional>

#include "fracmix/spectral_core.hpp"

namespace fracmix {

/// Rayleigh-type quotient Q(u) = E(u) / ||u||_{L^p}^2 with E(u) = <B u, u>_mass.
struct QuotientProblem {
    std::function<Vector(const Vector&)> apply;         // B u
    std::function<Vector(const Vector&)> precondition;  // approximately B^{-1}
    Vector mass;
    double p = 2.0;
};

double lp_norm(const Vector& u, const Vector& mass, double p);

/// Preconditioned steepest descent with backtracking on the normalized iterate.
/// For p = 2 and an exact preconditioner a unit step is one inverse-iteration step.
QuotientResult minimize_quotient(const QuotientProblem& problem, Vector start,
                                 const QuotientOptions& options);

}  // namespace fracmix
