#pragma once

#include <functional>

#include "adacanon/linalg.hpp"
#include "adacanon/matrix.hpp"
#include "adacanon/rng.hpp"

namespace adacanon {

/// Element of SO(3). Invariants: RᵀR = I and det = +1 within 1e-10.
struct Rotation3 {
    Matrix entries = Matrix::identity(3);
};

struct AxisAngle {
    double axis[3] = {0.0, 0.0, 1.0};  // unit vector
    double angle = 0.0;                // radians in [0, pi]
};

struct Permutation {
    std::vector<std::size_t> mapping;  // bijection on 0..N-1
};

/// Scalar objective over square matrices; `gradient` is the Euclidean
/// (ambient) gradient and may be empty, in which case central finite
/// differences are used.
struct ScalarObjective {
    std::function<double(const Matrix&)> value;
    std::function<Matrix(const Matrix&)> gradient;
};

struct RefineOptions {
    int steps = 10;
    double step_size = 0.05;
    int max_halvings = 5;
};

/// Haar-distributed element of O(m): QR of an iid standard-Gaussian
/// matrix with the diagonal of R forced positive. Redraws on the
/// (probability-zero) rank-deficient signal.
Matrix haar_orthogonal(std::size_t m, RngStream& rng);

/// Haar-uniform rotation: O(3) draw with one column negated if det = -1.
Rotation3 haar_rotation3(RngStream& rng);

/// Rodrigues closed form.
Rotation3 rotation_from_axis_angle(const AxisAngle& p);

/// exp of the skew form of v (a rotation by |v| about v/|v|).
Rotation3 rotation_exp(const double v[3]);

double rotation_determinant(const Matrix& r);

/// Gradient ascent on O(m) with polar retraction. Each step moves along
/// the Euclidean gradient and projects back; a step that would decrease
/// the objective halves the step size up to `max_halvings` times, after
/// which the best iterate seen is returned. The result never scores
/// below the start.
///
/// Throws std::runtime_error (NonFiniteGradient).
Matrix refine_orthogonal(const Matrix& u0, const ScalarObjective& objective,
                         const RefineOptions& opts);

/// Same contract on SO(3); the local chart is a 3-vector axis-angle
/// increment applied on the left, with the tangent gradient taken
/// analytically from `objective.gradient` when present and by central
/// finite differences (h = 1e-5) otherwise.
Rotation3 refine_rotation3(const Rotation3& r0, const ScalarObjective& objective,
                           const RefineOptions& opts);

/// All n! permutations in lexicographic order. Throws std::invalid_argument
/// (TooLarge) for n > 8.
std::vector<Permutation> enumerate_permutations(std::size_t n);

}  // namespace adacanon
