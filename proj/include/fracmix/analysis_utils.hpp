#pragma once

#include <array>
#include <functional>
#include <vector>

#include "json.hpp"

#include "fracmix/mesh_domain.hpp"
#include "fracmix/spectral_core.hpp"

namespace fracmix {

using Point = std::array<double, 2>;  // 1D problems use the first coordinate only
using ScalarField = std::function<double(const Point&)>;

/// Inversion center and the decay exponent N - 2s of the fractional Kelvin transform.
struct KelvinParams {
    int dimension = 2;
    double s = 0.75;
    Point center{0.0, 0.0};
    double min_radius = 1e-12;  // samples closer to the center are rejected

    /// Requires N in {1, 2} and N > 2s.
    void validate() const;
};

/// c + (x - c) / |x - c|^2.
Point kelvin_point(const Point& x, const KelvinParams& params);

/// v(x) = |x - c|^{2s-N} u(c + (x - c)/|x - c|^2) on the sample set.
std::vector<double> kelvin_transform(const ScalarField& u, const std::vector<Point>& samples,
                                     const KelvinParams& params);

/// The same transform as a field, so it can be composed with itself.
ScalarField kelvin_field(ScalarField u, const KelvinParams& params);

/// max |K(K(u))(x) - u(x)| over the samples.
double kelvin_involution_defect(const ScalarField& u, const std::vector<Point>& samples,
                                const KelvinParams& params);

/// Rectangle surrogate of a half-space with mixed data on {x2 = 0}:
/// Dirichlet on the bottom for x1 <= tau, on the left side and on the top;
/// Neumann on the bottom for x1 > tau and, unless `dirichlet_right`, on the right side.
BoundaryPartition half_strip_partition(const MeshedDomain& mesh, double tau, bool dirichlet_right = false);

struct MonotonicityReport {
    int axis = 0;
    int buffer = 3;
    double tolerance = 1e-8;
    double min_difference = 0.0;  // smallest forward difference in the scanned region
    Point worst{0.0, 0.0};        // left node of the smallest difference
    int scanned = 0;
    int violations = 0;
    bool pass = false;
};

/// Forward differences of nodal values along `axis` on a rectangle mesh, skipping
/// `buffer` cells next to the truncation sides (left, right and top).
MonotonicityReport monotonicity_check(const MeshedDomain& mesh, const Vector& nodal, int axis = 0,
                                      int buffer = 3, double tolerance = 1e-8);

nlohmann::json to_json(const MonotonicityReport& report);

}  // namespace fracmix
