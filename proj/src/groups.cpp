#include "adacanon/groups.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace adacanon {

Matrix haar_orthogonal(std::size_t m, RngStream& rng) {
    if (m < 1) throw std::invalid_argument("haar_orthogonal: m >= 1 required");
    for (;;) {
        Matrix g(m, m);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j) g(i, j) = rng.next_gaussian();
        QrResult f = qr(g);
        if (f.rank_deficient) continue;
        // Forcing sign(r_ii) > 0 makes the factorization unique, so the
        // distribution of Q is exactly Haar.
        for (std::size_t j = 0; j < m; ++j)
            if (f.r(j, j) < 0.0)
                for (std::size_t i = 0; i < m; ++i) f.q(i, j) = -f.q(i, j);
        return f.q;
    }
}

double rotation_determinant(const Matrix& r) {
    return r(0, 0) * (r(1, 1) * r(2, 2) - r(1, 2) * r(2, 1)) -
           r(0, 1) * (r(1, 0) * r(2, 2) - r(1, 2) * r(2, 0)) +
           r(0, 2) * (r(1, 0) * r(2, 1) - r(1, 1) * r(2, 0));
}

Rotation3 haar_rotation3(RngStream& rng) {
    Rotation3 out;
    out.entries = haar_orthogonal(3, rng);
    if (rotation_determinant(out.entries) < 0.0)
        for (std::size_t i = 0; i < 3; ++i) out.entries(i, 2) = -out.entries(i, 2);
    return out;
}

Rotation3 rotation_from_axis_angle(const AxisAngle& p) {
    double v[3] = {p.axis[0] * p.angle, p.axis[1] * p.angle, p.axis[2] * p.angle};
    return rotation_exp(v);
}

Rotation3 rotation_exp(const double v[3]) {
    const double theta = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    Rotation3 out;
    Matrix& r = out.entries;
    if (theta < 1e-300) return out;
    const double kx = v[0] / theta, ky = v[1] / theta, kz = v[2] / theta;
    const double c = std::cos(theta), s = std::sin(theta), t = 1.0 - c;
    r(0, 0) = c + kx * kx * t;
    r(0, 1) = kx * ky * t - kz * s;
    r(0, 2) = kx * kz * t + ky * s;
    r(1, 0) = ky * kx * t + kz * s;
    r(1, 1) = c + ky * ky * t;
    r(1, 2) = ky * kz * t - kx * s;
    r(2, 0) = kz * kx * t - ky * s;
    r(2, 1) = kz * ky * t + kx * s;
    r(2, 2) = c + kz * kz * t;
    return out;
}

namespace {

Matrix finite_difference_gradient(const ScalarObjective& obj, const Matrix& u, double h = 1e-6) {
    Matrix g(u.rows(), u.cols());
    Matrix probe = u;
    for (std::size_t i = 0; i < u.rows(); ++i)
        for (std::size_t j = 0; j < u.cols(); ++j) {
            const double orig = probe(i, j);
            probe(i, j) = orig + h;
            const double fp = obj.value(probe);
            probe(i, j) = orig - h;
            const double fm = obj.value(probe);
            probe(i, j) = orig;
            g(i, j) = (fp - fm) / (2.0 * h);
        }
    return g;
}

void check_finite(const Matrix& g, const char* where) {
    if (!g.all_finite()) throw std::runtime_error(std::string(where) + ": NonFiniteGradient");
}

}  // namespace

Matrix refine_orthogonal(const Matrix& u0, const ScalarObjective& objective,
                         const RefineOptions& opts) {
    if (opts.steps <= 0) return u0;
    Matrix best = u0;
    double best_val = objective.value(u0);
    Matrix cur = u0;
    double cur_val = best_val;
    double step = opts.step_size;

    for (int it = 0; it < opts.steps; ++it) {
        Matrix g = objective.gradient ? objective.gradient(cur)
                                      : finite_difference_gradient(objective, cur);
        check_finite(g, "refine_orthogonal");

        bool accepted = false;
        double trial_step = step;
        for (int h = 0; h <= opts.max_halvings; ++h) {
            Matrix cand = polar_orthogonal(cur + trial_step * g);
            const double val = objective.value(cand);
            if (std::isfinite(val) && val >= cur_val) {
                cur = std::move(cand);
                cur_val = val;
                accepted = true;
                break;
            }
            trial_step *= 0.5;
        }
        if (cur_val > best_val) {
            best_val = cur_val;
            best = cur;
        }
        if (!accepted) break;  // keep the best iterate seen
    }
    return best;
}

Rotation3 refine_rotation3(const Rotation3& r0, const ScalarObjective& objective,
                           const RefineOptions& opts) {
    if (opts.steps <= 0) return r0;

    // Tangent gradient in the left axis-angle chart at R: component i is
    // d/dh objective(exp(h e_i^) R) at h = 0.
    auto tangent_gradient = [&](const Rotation3& r) {
        double t[3];
        if (objective.gradient) {
            const Matrix g = objective.gradient(r.entries);
            check_finite(g, "refine_rotation3");
            // t_i = <G, E_i R> with E_i the skew basis.
            // E_x = [[0,0,0],[0,0,-1],[0,1,0]]: (E_x R) row 1 = -R row 2, row 2 = R row 1.
            t[0] = 0.0;
            for (std::size_t j = 0; j < 3; ++j)
                t[0] += g(1, j) * (-r.entries(2, j)) + g(2, j) * r.entries(1, j);
            // E_y = [[0,0,1],[0,0,0],[-1,0,0]]
            t[1] = 0.0;
            for (std::size_t j = 0; j < 3; ++j)
                t[1] += g(0, j) * r.entries(2, j) + g(2, j) * (-r.entries(0, j));
            // E_z = [[0,-1,0],[1,0,0],[0,0,0]]
            t[2] = 0.0;
            for (std::size_t j = 0; j < 3; ++j)
                t[2] += g(0, j) * (-r.entries(1, j)) + g(1, j) * r.entries(0, j);
        } else {
            const double h = 1e-5;
            for (int i = 0; i < 3; ++i) {
                double vp[3] = {0, 0, 0}, vm[3] = {0, 0, 0};
                vp[i] = h;
                vm[i] = -h;
                const double fp = objective.value(matmul(rotation_exp(vp).entries, r.entries));
                const double fm = objective.value(matmul(rotation_exp(vm).entries, r.entries));
                t[i] = (fp - fm) / (2.0 * h);
                if (!std::isfinite(t[i]))
                    throw std::runtime_error("refine_rotation3: NonFiniteGradient");
            }
        }
        return std::array<double, 3>{t[0], t[1], t[2]};
    };

    Rotation3 best = r0;
    double best_val = objective.value(r0.entries);
    Rotation3 cur = r0;
    double cur_val = best_val;
    double step = opts.step_size;

    for (int it = 0; it < opts.steps; ++it) {
        const auto t = tangent_gradient(cur);
        bool accepted = false;
        double trial_step = step;
        for (int h = 0; h <= opts.max_halvings; ++h) {
            double v[3] = {trial_step * t[0], trial_step * t[1], trial_step * t[2]};
            Rotation3 cand;
            cand.entries = matmul(rotation_exp(v).entries, cur.entries);
            const double val = objective.value(cand.entries);
            if (std::isfinite(val) && val >= cur_val) {
                cur = std::move(cand);
                cur_val = val;
                accepted = true;
                break;
            }
            trial_step *= 0.5;
        }
        if (cur_val > best_val) {
            best_val = cur_val;
            best = cur;
        }
        if (!accepted) break;
    }
    return best;
}

std::vector<Permutation> enumerate_permutations(std::size_t n) {
    if (n > 8) throw std::invalid_argument("enumerate_permutations: TooLarge (n > 8)");
    std::vector<std::size_t> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    std::vector<Permutation> out;
    do {
        out.push_back(Permutation{ids});
    } while (std::next_permutation(ids.begin(), ids.end()));
    return out;
}

}  // namespace adacanon
