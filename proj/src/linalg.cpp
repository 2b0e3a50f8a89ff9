#include "adacanon/linalg.hpp"

#include <algorithm>
#include <numeric>

namespace adacanon {

namespace {

double offdiag_frobenius(const Matrix& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
}

// Flip each eigenvector column so its largest-magnitude entry is positive.
void fix_column_signs(Matrix& v) {
    const std::size_t n = v.rows();
    for (std::size_t j = 0; j < v.cols(); ++j) {
        std::size_t arg = 0;
        double best = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double a = std::abs(v(i, j));
            if (a > best) {
                best = a;
                arg = i;
            }
        }
        if (v(arg, j) < 0.0)
            for (std::size_t i = 0; i < n; ++i) v(i, j) = -v(i, j);
    }
}

}  // namespace

EigenPairs eigh_symmetric(const Matrix& m) {
    const std::size_t n = m.rows();
    if (n != m.cols()) throw std::invalid_argument("eigh_symmetric: NotSquare");
    double asym = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            asym = std::max(asym, std::abs(m(i, j) - m(j, i)));
    if (asym > 1e-12)
        throw std::invalid_argument("eigh_symmetric: NotSymmetric (max asymmetry " +
                                    std::to_string(asym) + ")");

    Matrix a = m;
    // Symmetrize exactly so the sweep sees consistent halves.
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = 0.5 * (a(i, j) + a(j, i));
            a(i, j) = v;
            a(j, i) = v;
        }
    Matrix v = Matrix::identity(n);

    const double tol = 1e-12 * std::max(a.frobenius_norm(), 1e-300);
    const int max_sweeps = 100;
    bool converged = (n < 2);

    for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
        const double off = offdiag_frobenius(a);
        if (off <= tol) {
            converged = true;
            break;
        }
        // Rotations below this threshold are deferred to later sweeps.
        const double thresh = off / (n * n);
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) <= thresh || apq == 0.0) continue;
                const double app = a(p, p), aqq = a(q, q);
                const double theta = (aqq - app) / (2.0 * apq);
                // Smaller-angle root of t^2 + 2 t theta - 1 = 0.
                const double t = (theta >= 0.0)
                                     ? 1.0 / (theta + std::sqrt(1.0 + theta * theta))
                                     : -1.0 / (-theta + std::sqrt(1.0 + theta * theta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;

                double* ap = a.row(p);
                double* aq = a.row(q);
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = ap[k], akq = aq[k];
                    ap[k] = c * akp - s * akq;
                    aq[k] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double* vk = v.row(k);
                    const double vkp = vk[p], vkq = vk[q];
                    vk[p] = c * vkp - s * vkq;
                    vk[q] = s * vkp + c * vkq;
                }
            }
        }
        if (offdiag_frobenius(a) <= tol) converged = true;
    }
    if (!converged && offdiag_frobenius(a) > tol)
        throw std::runtime_error("eigh_symmetric: NoConvergence (sweep cap hit)");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });

    EigenPairs out;
    out.values.resize(n);
    out.vectors = Matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        out.values[j] = a(order[j], order[j]);
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = v(i, order[j]);
    }
    fix_column_signs(out.vectors);
    return out;
}

QrResult qr(const Matrix& m) {
    const std::size_t rows = m.rows(), cols = m.cols();
    if (rows < cols) throw std::invalid_argument("qr: requires rows >= cols");

    // Householder reflectors accumulated in-place; thin Q recovered afterwards.
    Matrix r = m;
    std::vector<std::vector<double>> reflectors;
    reflectors.reserve(cols);

    for (std::size_t k = 0; k < cols; ++k) {
        double norm = 0.0;
        for (std::size_t i = k; i < rows; ++i) norm += r(i, k) * r(i, k);
        norm = std::sqrt(norm);

        std::vector<double> u(rows, 0.0);
        if (norm > 0.0) {
            const double alpha = (r(k, k) >= 0.0) ? -norm : norm;
            double unorm = 0.0;
            for (std::size_t i = k; i < rows; ++i) u[i] = r(i, k);
            u[k] -= alpha;
            for (std::size_t i = k; i < rows; ++i) unorm += u[i] * u[i];
            unorm = std::sqrt(unorm);
            if (unorm > 0.0) {
                for (std::size_t i = k; i < rows; ++i) u[i] /= unorm;
                for (std::size_t j = k; j < cols; ++j) {
                    double s = 0.0;
                    for (std::size_t i = k; i < rows; ++i) s += u[i] * r(i, j);
                    s *= 2.0;
                    for (std::size_t i = k; i < rows; ++i) r(i, j) -= s * u[i];
                }
            }
        }
        reflectors.push_back(std::move(u));
    }

    QrResult out;
    out.r = Matrix(cols, cols);
    for (std::size_t i = 0; i < cols; ++i)
        for (std::size_t j = i; j < cols; ++j) out.r(i, j) = r(i, j);
    for (std::size_t i = 0; i < cols; ++i)
        if (std::abs(out.r(i, i)) < 1e-12) out.rank_deficient = true;

    // Q = H_0 ... H_{cols-1} applied to the first `cols` identity columns.
    out.q = Matrix(rows, cols);
    for (std::size_t j = 0; j < cols; ++j) {
        std::vector<double> e(rows, 0.0);
        e[j] = 1.0;
        for (std::size_t k = cols; k-- > 0;) {
            const std::vector<double>& u = reflectors[k];
            double s = 0.0;
            for (std::size_t i = k; i < rows; ++i) s += u[i] * e[i];
            s *= 2.0;
            for (std::size_t i = k; i < rows; ++i) e[i] -= s * u[i];
        }
        for (std::size_t i = 0; i < rows; ++i) out.q(i, j) = e[i];
    }

    // Positive-diagonal convention: flip column/row pairs so diag(r) >= 0,
    // which makes the factorization of a full-rank input unique.
    for (std::size_t k = 0; k < cols; ++k) {
        if (out.r(k, k) >= 0.0) continue;
        for (std::size_t j = k; j < cols; ++j) out.r(k, j) = -out.r(k, j);
        for (std::size_t i = 0; i < rows; ++i) out.q(i, k) = -out.q(i, k);
    }
    return out;
}

LuFactors lu_factor(const Matrix& m) {
    if (m.rows() != m.cols()) throw std::invalid_argument("lu_factor: NotSquare");
    const std::size_t n = m.rows();
    LuFactors f;
    f.lu = m;
    f.perm.resize(n);
    std::iota(f.perm.begin(), f.perm.end(), 0);
    f.min_pivot = std::numeric_limits<double>::infinity();

    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        double best = std::abs(f.lu(k, k));
        for (std::size_t i = k + 1; i < n; ++i) {
            const double v = std::abs(f.lu(i, k));
            if (v > best) {
                best = v;
                piv = i;
            }
        }
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(f.lu(k, j), f.lu(piv, j));
            std::swap(f.perm[k], f.perm[piv]);
            f.sign = -f.sign;
        }
        f.min_pivot = std::min(f.min_pivot, best);
        if (best == 0.0) continue;  // singular column; recorded via min_pivot
        const double inv = 1.0 / f.lu(k, k);
        for (std::size_t i = k + 1; i < n; ++i) {
            const double l = f.lu(i, k) * inv;
            f.lu(i, k) = l;
            if (l == 0.0) continue;
            for (std::size_t j = k + 1; j < n; ++j) f.lu(i, j) -= l * f.lu(k, j);
        }
    }
    return f;
}

std::vector<double> lu_solve(const LuFactors& f, std::vector<double> b) {
    const std::size_t n = f.lu.rows();
    if (b.size() != n) throw std::invalid_argument("lu_solve: dimension mismatch");
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = b[f.perm[i]];
    for (std::size_t i = 1; i < n; ++i) {
        double s = x[i];
        for (std::size_t j = 0; j < i; ++j) s -= f.lu(i, j) * x[j];
        x[i] = s;
    }
    for (std::size_t i = n; i-- > 0;) {
        double s = x[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= f.lu(i, j) * x[j];
        x[i] = s / f.lu(i, i);
    }
    return x;
}

Matrix lu_inverse(const LuFactors& f) {
    const std::size_t n = f.lu.rows();
    Matrix inv(n, n);
    std::vector<double> e(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        std::fill(e.begin(), e.end(), 0.0);
        e[j] = 1.0;
        std::vector<double> x = lu_solve(f, e);
        for (std::size_t i = 0; i < n; ++i) inv(i, j) = x[i];
    }
    return inv;
}

double determinant(const Matrix& m) {
    LuFactors f = lu_factor(m);
    double d = f.sign;
    for (std::size_t i = 0; i < m.rows(); ++i) d *= f.lu(i, i);
    return d;
}

Matrix polar_orthogonal(const Matrix& m) {
    const std::size_t n = m.rows();
    if (n != m.cols()) throw std::invalid_argument("polar_orthogonal: NotSquare");

    Matrix x = m;
    for (int iter = 0; iter < 60; ++iter) {
        LuFactors f = lu_factor(x);
        if (f.min_pivot < 1e-12) throw std::runtime_error("polar_orthogonal: Singular");
        Matrix xit = lu_inverse(f);
        Matrix next(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) next(i, j) = 0.5 * (x(i, j) + xit(j, i));
        const double delta = max_abs_diff(next, x);
        x = std::move(next);
        if (delta < 1e-14) break;
    }
    if (orthogonality_defect(x) > 1e-10)
        throw std::runtime_error("polar_orthogonal: Singular (iteration failed to orthogonalize)");
    return x;
}

}  // namespace adacanon
