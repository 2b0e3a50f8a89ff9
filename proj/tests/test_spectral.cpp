#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <map>

#include "adacanon/groups.hpp"
#include "adacanon/spectral.hpp"

using namespace adacanon;

namespace {

Graph cycle_graph(std::size_t n, std::size_t channels = 1) {
    Graph g;
    g.n = n;
    g.adjacency = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        g.adjacency(i, (i + 1) % n) = 1.0;
        g.adjacency((i + 1) % n, i) = 1.0;
    }
    g.signal = Matrix(n, channels);
    return g;
}

Graph random_graph(std::size_t n, RngStream& rng, std::size_t channels = 2) {
    Graph g;
    g.n = n;
    g.adjacency = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (rng.next_double() < 0.4) {
                const double w = 0.5 + rng.next_double();
                g.adjacency(i, j) = w;
                g.adjacency(j, i) = w;
            }
    g.signal = Matrix(n, channels);
    for (auto& v : g.signal.data()) v = rng.next_gaussian();
    return g;
}

}  // namespace

TEST_SUITE_BEGIN("spectral");

TEST_CASE("normalized laplacian closed forms") {
    Graph k2;
    k2.n = 2;
    k2.adjacency = Matrix(2, 2);
    k2.adjacency(0, 1) = 1.0;
    k2.adjacency(1, 0) = 1.0;
    k2.signal = Matrix(2, 1);
    Matrix l = normalized_laplacian(k2);
    CHECK(l(0, 0) == doctest::Approx(1.0));
    CHECK(l(0, 1) == doctest::Approx(-1.0));
    EigenPairs ep = eigh_symmetric(l);
    CHECK(ep.values[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(ep.values[1] == doctest::Approx(2.0).epsilon(1e-12));

    Graph empty;
    empty.n = 3;
    empty.adjacency = Matrix(3, 3);
    empty.signal = Matrix(3, 1);
    CHECK(max_abs_diff(normalized_laplacian(empty), Matrix::identity(3)) == 0.0);
}

TEST_CASE("cycle spectrum matches the circulant closed form") {
    const std::size_t n = 6;
    Graph c = cycle_graph(n);
    EigenPairs ep = eigh_symmetric(normalized_laplacian(c));
    std::vector<double> expected;
    for (std::size_t k = 0; k < n; ++k) expected.push_back(1.0 - std::cos(2.0 * M_PI * k / n));
    std::sort(expected.begin(), expected.end());
    for (std::size_t i = 0; i < n; ++i)
        CHECK(ep.values[i] == doctest::Approx(expected[i]).epsilon(1e-9));

    // Eigenvalues stay inside [0, 2].
    CHECK(ep.values.front() >= -1e-9);
    CHECK(ep.values.back() <= 2.0 + 1e-9);
}

TEST_CASE("laplacian input validation") {
    Graph bad;
    bad.n = 2;
    bad.adjacency = Matrix(2, 2);
    bad.adjacency(0, 1) = 1.0;
    bad.adjacency(1, 0) = 1.0 + 1e-6;
    CHECK_THROWS_AS(normalized_laplacian(bad), std::invalid_argument);

    Graph neg;
    neg.n = 2;
    neg.adjacency = Matrix(2, 2);
    neg.adjacency(0, 1) = -1.0;
    neg.adjacency(1, 0) = -1.0;
    CHECK_THROWS_AS(normalized_laplacian(neg), std::invalid_argument);
}

TEST_CASE("functional calculus") {
    RngStream rng(1, 1);
    Graph g = random_graph(8, rng);
    Matrix l = normalized_laplacian(g);

    CHECK(max_abs_diff(apply_scalar_function(l, [](double x) { return x; }), l) < 1e-9);
    CHECK(max_abs_diff(apply_scalar_function(l, [](double) { return 1.0; }),
                       Matrix::identity(8)) < 1e-9);

    // p(x) = 2 - x + 3x^2 - 0.5x^3 against Horner matrix evaluation.
    auto p = [](double x) { return 2.0 - x + 3.0 * x * x - 0.5 * x * x * x; };
    Matrix horner = Matrix::identity(8) * -0.5;
    horner = matmul(horner, l);
    for (std::size_t i = 0; i < 8; ++i) horner(i, i) += 3.0;
    horner = matmul(horner, l);
    for (std::size_t i = 0; i < 8; ++i) horner(i, i) += -1.0;
    horner = matmul(horner, l);
    for (std::size_t i = 0; i < 8; ++i) horner(i, i) += 2.0;
    CHECK(max_abs_diff(apply_scalar_function(l, p), horner) < 1e-9);
}

TEST_CASE("cycle automorphism invariance of isotropic filters") {
    const std::size_t n = 8;
    Graph c = cycle_graph(n);
    Matrix l = normalized_laplacian(c);
    auto p = [](double x) { return 1.0 - 0.7 * x + 0.2 * x * x; };
    Matrix pl = apply_scalar_function(l, p);

    // Cyclic shift permutation matrix.
    Matrix rot(n, n);
    for (std::size_t i = 0; i < n; ++i) rot(i, (i + 1) % n) = 1.0;
    Matrix conj = matmul(rot, matmul_a_bt(pl, rot));
    CHECK(max_abs_diff(conj, pl) < 1e-9);
}

TEST_CASE("dyadic band plan") {
    BandPlan plan = dyadic_band_plan(2.0, 0.5, 3);
    REQUIRE(plan.boundaries.size() == 4);
    CHECK(plan.boundaries[0] == doctest::Approx(0.25));
    CHECK(plan.boundaries[1] == doctest::Approx(0.5));
    CHECK(plan.boundaries[2] == doctest::Approx(1.0));
    CHECK(plan.boundaries[3] == doctest::Approx(2.0));
    // The lowest band absorbs [0, b_0].
    CHECK(plan.band_of(0.0) == 0);
    CHECK(plan.band_of(0.3) == 0);
    CHECK(plan.band_of(0.5) == 1);
    CHECK(plan.band_of(2.0) == 2);

    BandPlan single = dyadic_band_plan(2.0, 0.5, 1);
    CHECK(single.bands() == 1);
    CHECK(single.band_of(0.0) == 0);
    CHECK(single.band_of(2.0) == 0);

    CHECK_THROWS_AS(dyadic_band_plan(2.0, 1.5, 3), std::invalid_argument);

    // Grid-cover oracle: every lambda in [0, 2] lands in exactly one band.
    for (int i = 0; i <= 10000; ++i) {
        const double lam = 2.0 * i / 10000.0;
        const std::size_t k = plan.band_of(lam);
        CHECK(k < plan.bands());
        const double lo = (k == 0) ? 0.0 : plan.boundaries[k];
        const double hi = plan.boundaries[k + 1];
        CHECK(lam >= lo - 1e-12);
        if (lam < 2.0) CHECK(lam < hi + 1e-12);
    }
}

TEST_CASE("band decomposition closed forms and projection algebra") {
    SUBCASE("identity in one band") {
        BandPlan plan = dyadic_band_plan(1.5, 0.5, 1);
        BandDecomposition dec = band_decompose(Matrix::identity(5), plan);
        CHECK(dec.dims[0] == 5);
        CHECK(max_abs_diff(dec.projection(0), Matrix::identity(5)) < 1e-9);
    }

    SUBCASE("K_2 split at 1") {
        Graph k2;
        k2.n = 2;
        k2.adjacency = Matrix(2, 2);
        k2.adjacency(0, 1) = 1.0;
        k2.adjacency(1, 0) = 1.0;
        k2.signal = Matrix(2, 1);
        BandPlan plan = dyadic_band_plan(2.0, 0.5, 2);  // bands [0,1), [1,2]
        BandDecomposition dec = band_decompose(normalized_laplacian(k2), plan);
        CHECK(dec.dims[0] == 1);
        CHECK(dec.dims[1] == 1);
        CHECK(dec.eigenvalues[0][0] == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(dec.eigenvalues[1][0] == doctest::Approx(2.0).epsilon(1e-12));
    }

    SUBCASE("projection identities on random graphs") {
        RngStream rng(2, 2);
        for (int trial = 0; trial < 10; ++trial) {
            Graph g = random_graph(10, rng);
            Matrix l = normalized_laplacian(g);
            BandPlan plan = dyadic_band_plan(2.0, 0.5, 4);
            BandDecomposition dec = band_decompose(l, plan);

            Matrix sum(10, 10);
            for (std::size_t k = 0; k < dec.bands(); ++k) {
                Matrix p = dec.projection(k);
                CHECK(max_abs_diff(matmul(p, p), p) < 1e-9);        // idempotent
                CHECK(max_abs_diff(p.transposed(), p) < 1e-9);      // self-adjoint
                for (std::size_t j = k + 1; j < dec.bands(); ++j) {
                    Matrix cross = matmul(p, dec.projection(j));
                    CHECK(cross.max_abs() < 1e-9);                  // mutually annihilating
                }
                sum += p;
            }
            CHECK(max_abs_diff(sum, Matrix::identity(10)) < 1e-9);  // full cover
        }
    }
}

TEST_CASE("spectral coefficients") {
    RngStream rng(3, 3);
    Graph g = random_graph(9, rng);
    Matrix l = normalized_laplacian(g);
    BandPlan plan = dyadic_band_plan(2.0, 0.5, 3);
    BandDecomposition dec = band_decompose(l, plan);

    SUBCASE("zero signal") {
        SpectralCoeffs c = spectral_coefficients(dec, Matrix(9, 2));
        for (const auto& m : c.per_band)
            if (!m.empty()) CHECK(m.max_abs() == 0.0);
    }

    SUBCASE("eigenvector maps to a unit coefficient") {
        std::size_t band = 0;
        while (dec.dims[band] == 0) ++band;
        Matrix s(9, 1);
        for (std::size_t i = 0; i < 9; ++i) s(i, 0) = dec.basis[band](i, 0);
        SpectralCoeffs c = spectral_coefficients(dec, s);
        CHECK(c.per_band[band](0, 0) == doctest::Approx(1.0).epsilon(1e-9));
        double off = 0.0;
        for (std::size_t k = 0; k < c.bands(); ++k) {
            if (c.per_band[k].empty()) continue;
            for (std::size_t i = 0; i < c.per_band[k].rows(); ++i)
                if (!(k == band && i == 0)) off = std::max(off, std::abs(c.per_band[k](i, 0)));
        }
        CHECK(off < 1e-9);
    }

    SUBCASE("Parseval under full cover") {
        SpectralCoeffs c = spectral_coefficients(dec, g.signal);
        double coeff_energy = 0.0;
        for (const auto& m : c.per_band)
            if (!m.empty()) coeff_energy += m.frobenius_norm() * m.frobenius_norm();
        const double sig_energy = g.signal.frobenius_norm() * g.signal.frobenius_norm();
        CHECK(coeff_energy == doctest::Approx(sig_energy).epsilon(1e-9));
    }

    CHECK_THROWS_AS(spectral_coefficients(dec, Matrix(5, 2)), std::invalid_argument);
}

TEST_CASE("pad truncate") {
    RngStream rng(4, 4);
    Graph g = random_graph(8, rng);
    BandPlan plan = dyadic_band_plan(2.0, 0.5, 3);
    BandDecomposition dec = band_decompose(normalized_laplacian(g), plan);
    SpectralCoeffs c = spectral_coefficients(dec, g.signal);

    SUBCASE("identity reshape when J_k = M_k") {
        Matrix padded = pad_truncate(c, dec.dims);
        std::size_t offset = 0;
        for (std::size_t k = 0; k < c.bands(); ++k) {
            for (std::size_t i = 0; i < dec.dims[k]; ++i)
                for (std::size_t t = 0; t < c.channels; ++t)
                    CHECK(padded(offset + i, t) == c.per_band[k](i, t));
            offset += dec.dims[k];
        }
    }

    SUBCASE("zero-dim band pads to zero rows") {
        std::vector<std::size_t> jk(c.bands(), 2);
        Matrix padded = pad_truncate(c, jk);
        CHECK(padded.rows() == 2 * c.bands());
        std::size_t offset = 0;
        for (std::size_t k = 0; k < c.bands(); ++k) {
            for (std::size_t i = dec.dims[k]; i < 2; ++i)
                for (std::size_t t = 0; t < c.channels; ++t)
                    CHECK(padded(offset + i, t) == 0.0);
            offset += 2;
        }
    }

    SUBCASE("truncation keeps the smallest in-band eigenvalues") {
        std::size_t band = 0;
        for (std::size_t k = 0; k < c.bands(); ++k)
            if (dec.dims[k] > dec.dims[band]) band = k;
        if (dec.dims[band] >= 2) {
            std::vector<std::size_t> jk(c.bands(), 0);
            jk[band] = dec.dims[band] - 1;
            Matrix padded = pad_truncate(c, jk);
            // Rows correspond to the ascending-eigenvalue order of the band.
            for (std::size_t i = 0; i + 1 < dec.dims[band]; ++i) {
                CHECK(dec.eigenvalues[band][i] <= dec.eigenvalues[band][i + 1] + 1e-15);
                for (std::size_t t = 0; t < c.channels; ++t)
                    CHECK(padded(i, t) == c.per_band[band](i, t));
            }
        }
    }
}

TEST_CASE("orientation regularizer") {
    SUBCASE("shared blocks give zero penalty") {
        std::vector<std::size_t> dims = {2, 3};
        std::vector<OrthogonalBlock> blocks = {identity_block(dims), identity_block(dims)};
        auto r = orientation_regularizer(blocks);
        CHECK(r.penalty == 0.0);
    }

    SUBCASE("O(1) sign flip gives 4 per band") {
        OrthogonalBlock plus, minus;
        plus.blocks = {Matrix::identity(1), Matrix::identity(1)};
        minus.blocks = {Matrix::identity(1) * -1.0, Matrix::identity(1) * -1.0};
        auto r = orientation_regularizer({plus, minus});
        CHECK(r.penalty == doctest::Approx(8.0));  // 4 per band over 2 bands
    }

    SUBCASE("matches the naive double loop") {
        RngStream rng(5, 5);
        std::vector<OrthogonalBlock> blocks(3);
        for (auto& b : blocks) {
            b.blocks.resize(2);
            b.blocks[0] = haar_orthogonal(3, rng);
            b.blocks[1] = haar_orthogonal(2, rng);
        }
        auto r = orientation_regularizer(blocks);
        double naive = 0.0;
        for (std::size_t d = 0; d < 3; ++d)
            for (std::size_t e = 0; e < 3; ++e) {
                if (d == e) continue;
                for (std::size_t k = 0; k < 2; ++k)
                    naive += std::pow((blocks[d].blocks[k] - blocks[e].blocks[k]).frobenius_norm(), 2);
            }
        naive /= 2.0;  // unordered pairs
        CHECK(r.penalty == doctest::Approx(naive).epsilon(1e-12));
    }
}

TEST_CASE("anlsf forward basics") {
    RngStream rng(6, 6);
    Graph g = random_graph(10, rng);
    Matrix l = normalized_laplacian(g);
    BandPlan plan = dyadic_band_plan(2.0, 0.5, 3);
    BandDecomposition dec = band_decompose(l, plan);
    SpectralCoeffs c = spectral_coefficients(dec, g.signal);

    AnlsfModel model =
        make_anlsf_model(plan, dec.dims, dec.dims, 2, 2, 16, rng.derive(1));

    SUBCASE("identity blocks equal the unrotated pipeline") {
        OrthogonalBlock id = identity_block(dec.dims);
        const std::vector<double> flat = anlsf_flatten(model, c, id);
        Matrix padded = pad_truncate(c, model.jk);
        std::size_t idx = 0;
        for (std::size_t i = 0; i < padded.rows(); ++i)
            for (std::size_t t = 0; t < padded.cols(); ++t) CHECK(flat[idx++] == padded(i, t));
    }

    SUBCASE("norm-only readout is rotation invariant") {
        // Per-band norms are preserved by any orthogonal block.
        auto fam = anlsf_family(model);
        RngStream crng(7, 7);
        auto blocks = fam.sample(crng, 4);
        OrthogonalBlock id = identity_block(dec.dims);
        auto norm_of = [&](const OrthogonalBlock& u) {
            const auto flat = anlsf_flatten(model, c, u);
            double s = 0.0;
            for (double v : flat) s += v * v;
            return s;
        };
        const double base = norm_of(id);
        for (const auto& u : blocks) CHECK(norm_of(u) == doctest::Approx(base).epsilon(1e-9));
    }

    SUBCASE("block dim mismatch throws") {
        OrthogonalBlock bad = identity_block(dec.dims);
        for (auto& b : bad.blocks)
            if (!b.empty()) {
                b = Matrix::identity(b.rows() + 1);
                break;
            }
        CHECK_THROWS_AS(anlsf_forward(model, c, bad, 0), std::invalid_argument);
    }
}

TEST_CASE("anlsf single-band exhaustive 2x2 rotation grid oracle") {
    // One band of dimension 2: prior maximization over O(2) must match an
    // exhaustive grid over rotations and reflections.
    RngStream rng(8, 8);
    BandPlan plan = dyadic_band_plan(2.0, 0.5, 1);
    std::vector<std::size_t> dims = {2};
    AnlsfModel model = make_anlsf_model(plan, dims, dims, 1, 1, 8, rng.derive(0));

    SpectralCoeffs c;
    c.channels = 1;
    c.per_band.resize(1);
    c.per_band[0] = Matrix(2, 1);
    c.per_band[0](0, 0) = 0.8;
    c.per_band[0](1, 0) = -0.4;

    PointScore score = anlsf_score(model, 0);
    auto fam = anlsf_family(model);

    double grid_best = -1e300;
    for (int i = 0; i < 3600; ++i) {
        const double a = 2.0 * M_PI * i / 3600.0;
        for (int refl = 0; refl < 2; ++refl) {
            OrthogonalBlock u;
            u.blocks.resize(1);
            u.blocks[0] = Matrix(2, 2);
            u.blocks[0](0, 0) = std::cos(a);
            u.blocks[0](0, 1) = -std::sin(a);
            u.blocks[0](1, 0) = std::sin(a);
            u.blocks[0](1, 1) = std::cos(a);
            if (refl) {
                u.blocks[0](1, 0) = -u.blocks[0](1, 0);
                u.blocks[0](1, 1) = -u.blocks[0](1, 1);
            }
            grid_best = std::max(grid_best, score.value(fam.apply(u, c)));
        }
    }

    SearchBudget budget;
    budget.candidates = 32;
    budget.refine_steps = 30;
    budget.step_size = 0.1;
    auto d = prior_maximize(fam, Prior{}, score, c, budget, RngStream(9, 9));
    // Sample-and-refine agrees with the exhaustive grid up to grid resolution
    // (the continuous search may sit slightly above the best grid point).
    CHECK(d.raw_logit == doctest::Approx(grid_best).epsilon(5e-3));
    CHECK(d.refine_gain >= -1e-12);
}

TEST_CASE("anlsf orbit-consistent basis change leaves logits identical") {
    RngStream rng(10, 1);
    Graph g = random_graph(12, rng);
    BandPlan plan = dyadic_band_plan(2.0, 0.5, 3);
    BandDecomposition dec = band_decompose(normalized_laplacian(g), plan);
    SpectralCoeffs c = spectral_coefficients(dec, g.signal);
    AnlsfModel model = make_anlsf_model(plan, dec.dims, dec.dims, 2, 2, 16, rng.derive(3));

    auto fam = anlsf_family(model);
    std::vector<Prior> priors(2);
    std::vector<PointScore> scores;
    for (std::size_t d = 0; d < 2; ++d) scores.push_back(anlsf_score(model, d));

    SearchBudget budget;
    budget.candidates = 8;
    budget.refine_steps = 3;
    budget.step_size = 0.05;

    RngStream wrng(11, 2);
    for (int trial = 0; trial < 10; ++trial) {
        auto w = fam.sample(wrng, 1)[0];  // random basis change per band
        auto rep = invariance_oracle(fam, priors, scores, c, w, InvarianceMode::OrbitConsistent,
                                     budget, RngStream(12, trial));
        CHECK(rep.agree);
        CHECK(rep.max_abs_logit_delta < 1e-9);
    }
}

TEST_CASE("anlsf node synthesis") {
    RngStream rng(13, 3);
    Graph g = random_graph(9, rng);
    BandPlan plan = dyadic_band_plan(2.0, 0.5, 3);
    BandDecomposition dec = band_decompose(normalized_laplacian(g), plan);
    SpectralCoeffs c = spectral_coefficients(dec, g.signal);
    OrthogonalBlock id = identity_block(dec.dims);
    auto identity_map = [](const std::vector<double>& v) { return v; };

    SUBCASE("identity map reconstructs the signal under full cover") {
        Matrix rec = anlsf_node_synthesis(dec, c, id, dec.dims, identity_map, 2);
        CHECK(max_abs_diff(rec, g.signal) < 1e-9);
    }

    SUBCASE("zeroing one band removes exactly its projection") {
        std::size_t band = 0;
        while (dec.dims[band] == 0) ++band;
        std::size_t offset = 0;
        for (std::size_t k = 0; k < band; ++k) offset += dec.dims[k];
        const std::size_t rows = dec.dims[band];
        auto zero_band = [&](const std::vector<double>& v) {
            std::vector<double> out = v;
            for (std::size_t i = 0; i < rows * 2; ++i) out[offset * 2 + i] = 0.0;
            return out;
        };
        Matrix rec = anlsf_node_synthesis(dec, c, id, dec.dims, zero_band, 2);
        Matrix expected = g.signal - matmul(dec.projection(band), g.signal);
        CHECK(max_abs_diff(rec, expected) < 1e-9);
    }

    SUBCASE("random blocks still reconstruct with the matching transpose") {
        // U_kᵀ U_k = I inside synthesis-analysis makes it block independent.
        auto fam = anlsf_family(
            make_anlsf_model(plan, dec.dims, dec.dims, 2, 1, 4, rng.derive(9)));
        RngStream crng(14, 4);
        auto u = fam.sample(crng, 1)[0];
        Matrix rec = anlsf_node_synthesis(dec, c, u, dec.dims, identity_map, 2);
        CHECK(max_abs_diff(rec, g.signal) < 1e-9);
    }
}

TEST_CASE("decomposition cache round trip") {
    RngStream rng(15, 5);
    Graph g = random_graph(7, rng);
    Matrix l = normalized_laplacian(g);
    BandPlan plan = dyadic_band_plan(2.0, 0.5, 3);
    BandDecomposition dec = band_decompose(l, plan);

    const std::string path = "test_dec_cache.bin";
    save_decomposition(dec, plan, graph_hash(g), path);

    BandDecomposition loaded;
    REQUIRE(load_decomposition(loaded, plan, graph_hash(g), path));
    REQUIRE(loaded.bands() == dec.bands());
    for (std::size_t k = 0; k < dec.bands(); ++k) {
        CHECK(loaded.dims[k] == dec.dims[k]);
        if (dec.dims[k] > 0) CHECK(max_abs_diff(loaded.basis[k], dec.basis[k]) == 0.0);
    }

    // Wrong plan or wrong graph refuses to load.
    BandPlan other = dyadic_band_plan(2.0, 0.5, 4);
    CHECK_FALSE(load_decomposition(loaded, other, graph_hash(g), path));
    CHECK_FALSE(load_decomposition(loaded, plan, graph_hash(g) + 1, path));
    std::remove(path.c_str());
}

TEST_SUITE_END();
