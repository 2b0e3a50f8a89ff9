#pragma once

#include "adacanon/matrix.hpp"

namespace adacanon {

/// Eigendecomposition of a real symmetric matrix. `values` ascending,
/// columns of `vectors` are the matching eigenvectors. Each column is
/// sign-fixed so its largest-magnitude entry is positive (ties broken by
/// lowest index), which makes the decomposition fully deterministic.
struct EigenPairs {
    std::vector<double> values;
    Matrix vectors;
};

/// Cyclic Jacobi with threshold sweeps. Off-diagonal Frobenius tolerance
/// 1e-12 * ||m||_F, capped at 100 sweeps.
///
/// Throws std::invalid_argument (NotSquare / NotSymmetric, asymmetry above
/// 1e-12) and std::runtime_error (NoConvergence).
EigenPairs eigh_symmetric(const Matrix& m);

struct QrResult {
    Matrix q;  // rows x cols, orthonormal columns
    Matrix r;  // cols x cols, upper triangular
    bool rank_deficient = false;  // some |r_ii| < 1e-12; caller decides
};

/// Householder QR. Requires rows >= cols.
QrResult qr(const Matrix& m);

/// Nearest orthogonal matrix in Frobenius norm (the orthogonal polar
/// factor U·Vᵀ of the SVD), computed by the Newton iteration
/// X <- (X + X⁻ᵀ)/2. Throws std::invalid_argument (NotSquare) or
/// std::runtime_error (Singular: smallest singular value below 1e-12).
Matrix polar_orthogonal(const Matrix& m);

/// LU with partial pivoting; solve and inverse helpers.
struct LuFactors {
    Matrix lu;
    std::vector<std::size_t> perm;
    double min_pivot = 0.0;  // smallest |pivot| encountered
    int sign = 1;
};

LuFactors lu_factor(const Matrix& m);
std::vector<double> lu_solve(const LuFactors& f, std::vector<double> b);
Matrix lu_inverse(const LuFactors& f);

double determinant(const Matrix& m);

}  // namespace adacanon
