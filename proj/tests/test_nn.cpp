#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "adacanon/mlp.hpp"

using namespace adacanon;

namespace {

// Central finite differences on the loss fn over every parameter entry,
// with a Richardson consistency check that rejects probes sitting next to
// a relu kink or a pooling tie (where the finite difference itself is not
// a valid derivative estimate).
struct FdCheck {
    int checked = 0;
    int failed = 0;
};

template <class LossFn>
void fd_probe_mlp(MlpParams& p, LossFn loss, RngStream& rng, FdCheck& out, double rel_tol = 1e-5,
                  int probes = 40) {
    const double h = 1e-6;
    for (int probe = 0; probe < probes; ++probe) {
        const std::size_t layer = rng.next_below(p.layers.size());
        auto& w = p.layers[layer].weight.data();
        const std::size_t idx = rng.next_below(w.size());

        Gradients g = Gradients::zeros_like(p);
        loss(p, &g);
        const double analytic = g.dweight[layer].data()[idx];

        const double orig = w[idx];
        auto eval = [&](double v) {
            w[idx] = v;
            const double l = loss(p, nullptr);
            w[idx] = orig;
            return l;
        };
        const double d1 = (eval(orig + h) - eval(orig - h)) / (2 * h);
        const double d2 = (eval(orig + 2 * h) - eval(orig - 2 * h)) / (4 * h);
        const double scale = std::max({1.0, std::abs(d1), std::abs(d2)});
        if (std::abs(d1 - d2) > 1e-4 * scale) continue;  // near a kink; resample

        ++out.checked;
        const double denom = std::max({std::abs(analytic), std::abs(d1), 1e-6});
        if (std::abs(analytic - d1) / denom > rel_tol) ++out.failed;
    }
}

}  // namespace

TEST_SUITE_BEGIN("nn");

TEST_CASE("forward trivial cases") {
    MlpParams zero;
    MlpLayer l;
    l.weight = Matrix(2, 3);
    l.bias = {0.0, 0.0};
    zero.layers.push_back(l);
    auto out = mlp_forward(zero, {1.0, -2.0, 3.0});
    CHECK(out[0] == 0.0);
    CHECK(out[1] == 0.0);

    MlpParams ident;
    MlpLayer il;
    il.weight = Matrix::identity(3);
    il.bias = {0.0, 0.0, 0.0};
    ident.layers.push_back(il);
    auto out2 = mlp_forward(ident, {0.5, -1.5, 2.0});
    CHECK(out2[0] == 0.5);
    CHECK(out2[1] == -1.5);
    CHECK(out2[2] == 2.0);

    CHECK_THROWS_AS(mlp_forward(ident, {1.0}), std::invalid_argument);
}

TEST_CASE("forward matches an independent re-evaluation") {
    RngStream rng(1, 1);
    MlpParams p = make_mlp({4, 5, 3}, Activation::Tanh, rng.derive(0));
    std::vector<double> x = rng.gaussians(4);
    auto out = mlp_forward(p, x);

    // Straightforward duplicate implementation.
    std::vector<double> a = x;
    for (const auto& layer : p.layers) {
        std::vector<double> z(layer.weight.rows(), 0.0);
        for (std::size_t i = 0; i < layer.weight.rows(); ++i) {
            for (std::size_t j = 0; j < layer.weight.cols(); ++j)
                z[i] += layer.weight(i, j) * a[j];
            z[i] += layer.bias[i];
            if (layer.activation == Activation::Tanh) z[i] = std::tanh(z[i]);
        }
        a = z;
    }
    for (std::size_t i = 0; i < out.size(); ++i)
        CHECK(out[i] == doctest::Approx(a[i]).epsilon(1e-12));
}

TEST_CASE("backward trivial cases") {
    RngStream rng(2, 2);
    MlpParams p = make_mlp({3, 4, 2}, Activation::Relu, rng.derive(0));
    ForwardTape tape;
    mlp_forward(p, {1.0, 2.0, 3.0}, &tape);
    Gradients g = mlp_backward(p, tape, {0.0, 0.0});
    CHECK(g.all_finite());
    for (const auto& w : g.dweight) CHECK(w.max_abs() == 0.0);

    // Single linear layer, upstream e_1: weight gradient row 0 is x^T.
    MlpParams lin;
    MlpLayer l;
    l.weight = Matrix(2, 3);
    l.bias = {0.0, 0.0};
    lin.layers.push_back(l);
    ForwardTape t2;
    mlp_forward(lin, {1.0, 2.0, 3.0}, &t2);
    Gradients g2 = mlp_backward(lin, t2, {1.0, 0.0});
    CHECK(g2.dweight[0](0, 0) == 1.0);
    CHECK(g2.dweight[0](0, 1) == 2.0);
    CHECK(g2.dweight[0](0, 2) == 3.0);
    CHECK(g2.dweight[0](1, 0) == 0.0);
}

TEST_CASE("backward matches finite differences on random nets") {
    RngStream rng(3, 3);
    FdCheck check;
    for (int arch = 0; arch < 5; ++arch) {
        const Activation act = arch % 2 == 0 ? Activation::Tanh : Activation::Relu;
        MlpParams p = make_mlp({5, 8, 8, 2}, act, rng.derive(arch));
        std::vector<double> x = rng.gaussians(5);
        std::vector<double> y = {1.0, 0.0};

        auto loss = [&](MlpParams& q, Gradients* g) {
            ForwardTape tape;
            auto s = mlp_forward(q, x, &tape);
            std::vector<double> ds;
            const double l = bce_with_logits(s, y, {}, ds);
            if (g) *g = mlp_backward(q, tape, ds);
            return l;
        };
        fd_probe_mlp(p, loss, rng, check);
    }
    CHECK(check.checked >= 150);
    CHECK(check.failed == 0);
}

TEST_CASE("bce stable form") {
    std::vector<double> ds;
    const double l0 = bce_with_logits({0.0, 0.0, 0.0}, {1.0, 0.0, 1.0}, {}, ds);
    CHECK(l0 == doctest::Approx(3.0 * std::log(2.0)).epsilon(1e-12));

    const double lsat = bce_with_logits({100.0}, {1.0}, {}, ds);
    CHECK(lsat < 1e-40);
    CHECK(std::abs(ds[0]) < 1e-40);

    // Matches the naive sigmoid-then-log form where that form is finite.
    RngStream rng(4, 4);
    for (int i = 0; i < 200; ++i) {
        const double s = 8.0 * (rng.next_double() - 0.5);
        const double y = rng.next_below(2) ? 1.0 : 0.0;
        const double naive = -y * std::log(1.0 / (1.0 + std::exp(-s))) -
                             (1.0 - y) * std::log(1.0 - 1.0 / (1.0 + std::exp(-s)));
        const double stable = bce_with_logits({s}, {y}, {}, ds);
        CHECK(stable == doctest::Approx(naive).epsilon(1e-9));
    }

    // Per-class weights scale both loss and gradient.
    const double lw = bce_with_logits({0.0}, {1.0}, {2.0}, ds);
    CHECK(lw == doctest::Approx(2.0 * std::log(2.0)));
    CHECK(ds[0] == doctest::Approx(2.0 * (-0.5)));
}

TEST_CASE("pool modes") {
    Matrix single(1, 3);
    single(0, 0) = 1.0;
    single(0, 1) = -2.0;
    single(0, 2) = 0.5;
    for (PoolMode mode : {PoolMode::Max, PoolMode::Sum, PoolMode::Mean}) {
        auto r = pool(single, mode);
        CHECK(r.values[0] == 1.0);
        CHECK(r.values[1] == -2.0);
        CHECK(r.values[2] == 0.5);
    }

    Matrix pm(2, 2);
    pm(0, 0) = 1.0;
    pm(0, 1) = -3.0;
    pm(1, 0) = -1.0;
    pm(1, 1) = 3.0;
    auto sum = pool(pm, PoolMode::Sum);
    CHECK(sum.values[0] == 0.0);
    CHECK(sum.values[1] == 0.0);

    RngStream rng(5, 5);
    Matrix m(10, 4);
    for (auto& v : m.data()) v = rng.next_gaussian();
    auto mx = pool(m, PoolMode::Max);
    for (std::size_t j = 0; j < 4; ++j) {
        double best = m(0, j);
        for (std::size_t i = 1; i < 10; ++i) best = std::max(best, m(i, j));
        CHECK(mx.values[j] == best);
        CHECK(m(mx.argmax[j], j) == best);
    }

    CHECK_THROWS_AS(pool(Matrix(), PoolMode::Sum), std::invalid_argument);
}

TEST_CASE("pool permutation invariance") {
    RngStream rng(6, 6);
    Matrix m(7, 3);
    for (auto& v : m.data()) v = rng.next_gaussian();
    Matrix perm(7, 3);
    const std::size_t order[7] = {3, 0, 6, 1, 5, 2, 4};
    for (std::size_t i = 0; i < 7; ++i)
        for (std::size_t j = 0; j < 3; ++j) perm(i, j) = m(order[i], j);
    for (PoolMode mode : {PoolMode::Max, PoolMode::Sum, PoolMode::Mean}) {
        auto a = pool(m, mode);
        auto b = pool(perm, mode);
        for (std::size_t j = 0; j < 3; ++j) {
            if (mode == PoolMode::Max)
                CHECK(a.values[j] == b.values[j]);
            else
                CHECK(a.values[j] == doctest::Approx(b.values[j]).epsilon(1e-12));
        }
    }
}

TEST_CASE("adam basics and convex-problem oracle") {
    RngStream rng(7, 7);
    MlpParams p = make_mlp({3, 2}, Activation::Identity, rng.derive(0));
    OptimizerState st = OptimizerState::init(p, 0.01);
    const MlpParams before = p;
    Gradients zero = Gradients::zeros_like(p);
    optimizer_step(st, p, zero);
    CHECK(max_abs_diff(p.layers[0].weight, before.layers[0].weight) == 0.0);

    // Constant gradient: parameter moves opposite to its sign.
    Gradients g = Gradients::zeros_like(p);
    g.dweight[0](0, 0) = 1.0;
    g.dweight[0](1, 1) = -1.0;
    optimizer_step(st, p, g);
    CHECK(p.layers[0].weight(0, 0) < before.layers[0].weight(0, 0));
    CHECK(p.layers[0].weight(1, 1) > before.layers[0].weight(1, 1));

    // Quadratic bowl ||w - w*||^2.
    MlpParams q = make_mlp({1, 4}, Activation::Identity, rng.derive(1));
    std::vector<double> target = rng.gaussians(4);
    OptimizerState st2 = OptimizerState::init(q, 0.01);
    for (int it = 0; it < 500; ++it) {
        Gradients dg = Gradients::zeros_like(q);
        for (std::size_t i = 0; i < 4; ++i)
            dg.dweight[0](i, 0) = 2.0 * (q.layers[0].weight(i, 0) - target[i]);
        optimizer_step(st2, q, dg);
    }
    double dist = 0.0;
    for (std::size_t i = 0; i < 4; ++i)
        dist += std::pow(q.layers[0].weight(i, 0) - target[i], 2);
    CHECK(std::sqrt(dist) < 1e-3);

    Gradients bad = Gradients::zeros_like(p);
    bad.dweight[0](0, 0) = std::nan("");
    CHECK_THROWS_AS(optimizer_step(st, p, bad), std::runtime_error);
}

TEST_CASE("checkpoint round trip") {
    RngStream rng(8, 8);
    MlpParams p = make_mlp({6, 5, 2}, Activation::Relu, rng.derive(0));
    const std::string path = "test_checkpoint.bin";
    save_mlp(p, path, 1234);
    std::uint64_t tag = 0;
    MlpParams q = load_mlp(path, &tag);
    CHECK(tag == 1234);
    REQUIRE(q.layers.size() == p.layers.size());
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        CHECK(max_abs_diff(p.layers[l].weight, q.layers[l].weight) == 0.0);
        CHECK(p.layers[l].bias == q.layers[l].bias);
        CHECK(p.layers[l].activation == q.layers[l].activation);
    }
    std::remove(path.c_str());
}

TEST_SUITE_END();
