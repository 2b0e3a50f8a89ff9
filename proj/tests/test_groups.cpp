#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "adacanon/groups.hpp"

using namespace adacanon;

TEST_SUITE_BEGIN("groups");

TEST_CASE("haar O(1) is a sign") {
    RngStream rng(0, 0);
    for (int i = 0; i < 50; ++i) {
        Matrix u = haar_orthogonal(1, rng);
        CHECK(std::abs(std::abs(u(0, 0)) - 1.0) < 1e-12);
    }
}

TEST_CASE("haar orthogonality across seeds") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        RngStream rng(seed, 42);
        Matrix u = haar_orthogonal(1 + seed % 9, rng);
        CHECK(orthogonality_defect(u) < 1e-10);
    }
}

TEST_CASE("haar O(2) moments match the angle-parameterized integrals") {
    // Entry (0,0) of a Haar O(2) draw is +-cos(theta) with theta uniform:
    // mean 0. trace^2 integrates to 2 cos^2 over the rotation component and
    // 0 over reflections, averaging to 1.
    RngStream rng(123, 7);
    double mean00 = 0.0, mean_tr2 = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        Matrix u = haar_orthogonal(2, rng);
        mean00 += u(0, 0);
        const double tr = u(0, 0) + u(1, 1);
        mean_tr2 += tr * tr;
    }
    mean00 /= n;
    mean_tr2 /= n;
    CHECK(std::abs(mean00) < 0.02);
    CHECK(std::abs(mean_tr2 - 1.0) < 0.05);
}

TEST_CASE("haar rotations have unit determinant") {
    RngStream rng(9, 1);
    for (int i = 0; i < 200; ++i) {
        Rotation3 r = haar_rotation3(rng);
        CHECK(orthogonality_defect(r.entries) < 1e-10);
        CHECK(rotation_determinant(r.entries) == doctest::Approx(1.0).epsilon(1e-10));
    }
}

TEST_CASE("haar rotation trace averages to zero") {
    // Against the closed-form Haar density (1-cos t)/pi on [0, pi], the
    // integral of the trace 1 + 2 cos t is exactly 0.
    RngStream rng(77, 3);
    double mean_tr = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        Rotation3 r = haar_rotation3(rng);
        mean_tr += r.entries(0, 0) + r.entries(1, 1) + r.entries(2, 2);
    }
    mean_tr /= n;
    CHECK(std::abs(mean_tr) < 0.05);
}

TEST_CASE("rotating the north pole is symmetric in z") {
    RngStream rng(31, 5);
    double mean_z = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        Rotation3 r = haar_rotation3(rng);
        mean_z += r.entries(2, 2);  // (R e_z)_z
    }
    mean_z /= n;
    CHECK(std::abs(mean_z) < 0.02);
}

TEST_CASE("rodrigues formula basics") {
    AxisAngle zero;
    zero.angle = 0.0;
    CHECK(max_abs_diff(rotation_from_axis_angle(zero).entries, Matrix::identity(3)) < 1e-15);

    AxisAngle quarter;
    quarter.axis[0] = 0.0;
    quarter.axis[1] = 0.0;
    quarter.axis[2] = 1.0;
    quarter.angle = M_PI / 2.0;
    Matrix expected(3, 3);
    expected(0, 1) = -1.0;
    expected(1, 0) = 1.0;
    expected(2, 2) = 1.0;
    CHECK(max_abs_diff(rotation_from_axis_angle(quarter).entries, expected) < 1e-12);
}

TEST_CASE("rodrigues matches the series expansion of exp(skew)") {
    RngStream rng(2, 6);
    for (int trial = 0; trial < 50; ++trial) {
        double axis[3] = {rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian()};
        const double norm = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
        for (double& a : axis) a /= norm;
        AxisAngle p;
        p.axis[0] = axis[0];
        p.axis[1] = axis[1];
        p.axis[2] = axis[2];
        p.angle = rng.next_double() * M_PI;

        Matrix k(3, 3);  // skew(angle * axis)
        k(0, 1) = -axis[2] * p.angle;
        k(0, 2) = axis[1] * p.angle;
        k(1, 0) = axis[2] * p.angle;
        k(1, 2) = -axis[0] * p.angle;
        k(2, 0) = -axis[1] * p.angle;
        k(2, 1) = axis[0] * p.angle;

        Matrix series = Matrix::identity(3);
        Matrix term = Matrix::identity(3);
        for (int i = 1; i <= 30; ++i) {
            term = matmul(term, k);
            term *= 1.0 / i;
            series += term;
        }
        CHECK(max_abs_diff(rotation_from_axis_angle(p).entries, series) < 1e-9);
    }
}

TEST_CASE("rng determinism and stream independence") {
    RngStream a(42, 1), b(42, 1), c(42, 2);
    for (int i = 0; i < 100; ++i) {
        const double va = a.next_double();
        CHECK(va == b.next_double());
    }
    // Different stream, same seed: different draws.
    RngStream a2(42, 1);
    bool all_equal = true;
    for (int i = 0; i < 10; ++i) all_equal = all_equal && (a2.next_u64() == c.next_u64());
    CHECK_FALSE(all_equal);
}

TEST_CASE("refine_orthogonal respects the monotone-best contract") {
    // trace(U) is maximized on O(m) at U = I.
    ScalarObjective trace_obj;
    trace_obj.value = [](const Matrix& u) {
        double t = 0.0;
        for (std::size_t i = 0; i < u.rows(); ++i) t += u(i, i);
        return t;
    };
    trace_obj.gradient = [](const Matrix& u) { return Matrix::identity(u.rows()); };

    RefineOptions opts;
    opts.steps = 20;
    CHECK(max_abs_diff(refine_orthogonal(Matrix::identity(4), trace_obj, opts),
                       Matrix::identity(4)) < 1e-9);

    opts.steps = 0;
    RngStream rng(4, 4);
    Matrix u0 = haar_orthogonal(4, rng);
    CHECK(max_abs_diff(refine_orthogonal(u0, trace_obj, opts), u0) == 0.0);
}

TEST_CASE("refine_orthogonal reaches the closed-form maximizer of trace(QᵀU)") {
    RngStream rng(15, 2);
    for (int trial = 0; trial < 5; ++trial) {
        const std::size_t m = 3 + trial;
        Matrix q = haar_orthogonal(m, rng);
        ScalarObjective obj;
        obj.value = [&q](const Matrix& u) {
            double t = 0.0;
            for (std::size_t i = 0; i < q.rows(); ++i)
                for (std::size_t j = 0; j < q.cols(); ++j) t += q(i, j) * u(i, j);
            return t;
        };
        obj.gradient = [&q](const Matrix&) { return q; };

        RefineOptions opts;
        opts.steps = 50;
        opts.step_size = 0.2;
        Matrix u0 = haar_orthogonal(m, rng);
        // Polar retraction stays in one connected component of O(m); put the
        // start in the same component as the maximizer Q so m is reachable.
        if (determinant(u0) * determinant(q) < 0.0)
            for (std::size_t i = 0; i < m; ++i) u0(i, 0) = -u0(i, 0);
        const Matrix refined = refine_orthogonal(u0, obj, opts);
        // Global max is trace(QᵀQ) = m, attained at U = Q.
        CHECK(obj.value(refined) > static_cast<double>(m) - 1e-3);
        CHECK(obj.value(refined) >= obj.value(u0) - 1e-12);
        CHECK(orthogonality_defect(refined) < 1e-10);
    }
}

TEST_CASE("refine_rotation3 contract") {
    ScalarObjective trace_obj;
    trace_obj.value = [](const Matrix& u) { return u(0, 0) + u(1, 1) + u(2, 2); };

    RefineOptions opts;
    opts.steps = 20;
    Rotation3 id;
    CHECK(max_abs_diff(refine_rotation3(id, trace_obj, opts).entries, Matrix::identity(3)) <
          1e-9);

    RngStream rng(3, 3);
    for (int trial = 0; trial < 5; ++trial) {
        Rotation3 q = haar_rotation3(rng);
        ScalarObjective obj;
        obj.value = [&q](const Matrix& u) {
            double t = 0.0;
            for (std::size_t i = 0; i < 3; ++i)
                for (std::size_t j = 0; j < 3; ++j) t += q.entries(i, j) * u(i, j);
            return t;
        };
        RefineOptions o2;
        o2.steps = 80;
        o2.step_size = 0.3;
        Rotation3 r0 = haar_rotation3(rng);
        Rotation3 refined = refine_rotation3(r0, obj, o2);
        CHECK(obj.value(refined.entries) > 3.0 - 1e-2);
        CHECK(rotation_determinant(refined.entries) == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(orthogonality_defect(refined.entries) < 1e-10);

        o2.steps = 0;
        Rotation3 same = refine_rotation3(r0, obj, o2);
        CHECK(max_abs_diff(same.entries, r0.entries) == 0.0);
    }
}

TEST_CASE("permutation enumeration") {
    CHECK(enumerate_permutations(1).size() == 1);

    auto s3 = enumerate_permutations(3);
    REQUIRE(s3.size() == 6);
    CHECK(s3.front().mapping == std::vector<std::size_t>{0, 1, 2});
    CHECK(s3.back().mapping == std::vector<std::size_t>{2, 1, 0});
    for (std::size_t i = 1; i < s3.size(); ++i) CHECK(s3[i - 1].mapping < s3[i].mapping);

    auto s8 = enumerate_permutations(8);
    CHECK(s8.size() == 40320);
    std::set<std::vector<std::size_t>> uniq;
    for (const auto& p : s8) uniq.insert(p.mapping);
    CHECK(uniq.size() == 40320);

    CHECK_THROWS_AS(enumerate_permutations(9), std::invalid_argument);
}

TEST_SUITE_END();
