#include "adacanon/pointcloud.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace adacanon {

double multiset_distance(const PointCloud& x, const PointCloud& y, MultisetMode mode) {
    const std::size_t n = x.size();
    if (n != y.size()) throw std::invalid_argument("multiset_distance: SizeMismatch");
    const std::size_t cols = x.points.cols();

    auto dist_for = [&](const std::vector<std::size_t>& perm) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < cols; ++c) {
                const double d = x.points(i, c) - y.points(perm[i], c);
                s += d * d;
            }
        return std::sqrt(s);
    };

    if (mode == MultisetMode::Brute) {
        if (n > 8) throw std::invalid_argument("multiset_distance: TooLargeForBrute (N > 8)");
        double best = std::numeric_limits<double>::infinity();
        for (const Permutation& p : enumerate_permutations(n))
            best = std::min(best, dist_for(p.mapping));
        return best;
    }

    // Greedy upper bound: lexicographically sort both row sets and pair in order.
    auto sorted_order = [cols](const Matrix& m) {
        std::vector<std::size_t> order(m.rows());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            for (std::size_t c = 0; c < cols; ++c) {
                if (m(a, c) < m(b, c)) return true;
                if (m(a, c) > m(b, c)) return false;
            }
            return a < b;
        });
        return order;
    };
    const auto ox = sorted_order(x.points);
    const auto oy = sorted_order(y.points);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < cols; ++c) {
            const double d = x.points(ox[i], c) - y.points(oy[i], c);
            s += d * d;
        }
    return std::sqrt(s);
}

KnnGraph knn_graph(const PointCloud& x, std::size_t k) {
    if (k < 1) throw std::invalid_argument("knn_graph: k >= 1 required");
    const std::size_t n = x.size();
    KnnGraph g;
    g.k = k;
    g.neighbors.resize(n);
    const std::size_t take = std::min(k, n > 0 ? n - 1 : 0);
    std::vector<std::pair<double, std::size_t>> cand(n);
    for (std::size_t i = 0; i < n; ++i) {
        cand.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double d = 0.0;
            for (std::size_t c = 0; c < x.points.cols(); ++c) {
                const double v = x.points(i, c) - x.points(j, c);
                d += v * v;
            }
            cand.emplace_back(d, j);
        }
        std::sort(cand.begin(), cand.end());  // ties break to the lower index
        g.neighbors[i].reserve(take);
        for (std::size_t t = 0; t < take; ++t) g.neighbors[i].push_back(cand[t].second);
    }
    return g;
}

PointBackbone make_backbone(BackboneKind kind, std::size_t hidden, std::size_t feature,
                            std::size_t knn_k, RngStream rng) {
    PointBackbone b;
    b.kind = kind;
    b.knn_k = knn_k;
    const std::size_t in = (kind == BackboneKind::Dgcnn) ? 6 : 3;
    b.per_point = make_mlp({in, hidden, hidden}, Activation::Relu, rng.derive(0));
    b.per_point.layers.back().activation = Activation::Relu;
    b.post = make_mlp({hidden, feature}, Activation::Identity, rng.derive(1));
    return b;
}

namespace {

std::vector<double> edge_input(const PointCloud& x, std::size_t i, std::size_t j) {
    std::vector<double> e(6);
    for (std::size_t c = 0; c < 3; ++c) {
        e[c] = x.points(j, c) - x.points(i, c);
        e[3 + c] = x.points(i, c);
    }
    return e;
}

}  // namespace

std::vector<double> backbone_forward(const PointBackbone& b, const PointCloud& x,
                                     BackboneTape* tape) {
    const std::size_t n = x.size();
    if (n == 0) throw std::invalid_argument("backbone_forward: EmptyInput");
    const std::size_t f = b.per_point.output_dim();
    BackboneTape local;
    BackboneTape& t = tape ? *tape : local;
    t.unit_tapes.clear();
    t.edge_src.clear();
    t.point_pool_argmax.clear();

    Matrix point_features;
    if (b.kind == BackboneKind::Dgcnn) {
        if (n < 2) throw std::invalid_argument("backbone_forward: dgcnn needs N >= 2");
        const KnnGraph g = knn_graph(x, b.knn_k);
        point_features = Matrix(n, f);
        t.point_pool_argmax.resize(n);
        std::size_t edge_index = 0;
        for (std::size_t i = 0; i < n; ++i) {
            Matrix edge_rows(g.neighbors[i].size(), f);
            std::vector<std::size_t> edge_ids(g.neighbors[i].size());
            for (std::size_t e = 0; e < g.neighbors[i].size(); ++e) {
                ForwardTape ut;
                std::vector<double> raw =
                    mlp_forward(b.per_point, edge_input(x, i, g.neighbors[i][e]),
                                tape ? &ut : nullptr);
                for (std::size_t c = 0; c < f; ++c)
                    edge_rows(e, c) = raw[c] > 0.0 ? raw[c] : 0.0;  // relu after the edge net
                if (tape) t.unit_tapes.push_back(std::move(ut));
                t.edge_src.push_back(i);
                edge_ids[e] = edge_index++;
            }
            PoolResult pr = pool(edge_rows, PoolMode::Max);
            for (std::size_t c = 0; c < f; ++c) point_features(i, c) = pr.values[c];
            t.point_pool_argmax[i].resize(f);
            for (std::size_t c = 0; c < f; ++c) t.point_pool_argmax[i][c] = edge_ids[pr.argmax[c]];
        }
    } else {
        point_features = Matrix(n, f);
        for (std::size_t i = 0; i < n; ++i) {
            ForwardTape ut;
            std::vector<double> px = {x.points(i, 0), x.points(i, 1), x.points(i, 2)};
            std::vector<double> out = mlp_forward(b.per_point, px, tape ? &ut : nullptr);
            for (std::size_t c = 0; c < f; ++c) point_features(i, c) = out[c];
            if (tape) t.unit_tapes.push_back(std::move(ut));
        }
    }

    const PoolMode mode = (b.kind == BackboneKind::DeepSet) ? PoolMode::Sum : PoolMode::Max;
    PoolResult pr = pool(point_features, mode);
    t.point_features = std::move(point_features);
    t.pool_argmax = pr.argmax;
    t.pooled = pr.values;
    return mlp_forward(b.post, pr.values, tape ? &t.post_tape : nullptr);
}

BackboneGradients backbone_backward(const PointBackbone& b, const PointCloud& x,
                                    const BackboneTape& tape,
                                    const std::vector<double>& upstream) {
    BackboneGradients g;
    g.per_point = Gradients::zeros_like(b.per_point);
    g.post = Gradients::zeros_like(b.post);

    std::vector<double> dpooled;
    Gradients post_grad = mlp_backward(b.post, tape.post_tape, upstream, &dpooled);
    g.post.accumulate(post_grad);

    const std::size_t f = b.per_point.output_dim();
    const std::size_t n = x.size();

    if (b.kind == BackboneKind::DeepSet) {
        for (std::size_t i = 0; i < n; ++i) {
            Gradients pg = mlp_backward(b.per_point, tape.unit_tapes[i], dpooled);
            g.per_point.accumulate(pg);
        }
        return g;
    }

    if (b.kind == BackboneKind::PointNet) {
        // Route each channel to its winning point.
        std::vector<std::vector<double>> per_point_upstream(n);
        for (std::size_t c = 0; c < f; ++c) {
            if (dpooled[c] == 0.0) continue;
            auto& u = per_point_upstream[tape.pool_argmax[c]];
            if (u.empty()) u.assign(f, 0.0);
            u[c] += dpooled[c];
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (per_point_upstream[i].empty()) continue;
            Gradients pg = mlp_backward(b.per_point, tape.unit_tapes[i], per_point_upstream[i]);
            g.per_point.accumulate(pg);
        }
        return g;
    }

    // Dgcnn: two max-pool stages, then relu, then the edge net.
    std::vector<std::vector<double>> per_edge_upstream(tape.unit_tapes.size());
    for (std::size_t c = 0; c < f; ++c) {
        if (dpooled[c] == 0.0) continue;
        const std::size_t win_point = tape.pool_argmax[c];
        const std::size_t win_edge = tape.point_pool_argmax[win_point][c];
        auto& u = per_edge_upstream[win_edge];
        if (u.empty()) u.assign(f, 0.0);
        // relu mask from the raw edge output.
        const double raw = tape.unit_tapes[win_edge].post.back()[c];
        if (raw > 0.0) u[c] += dpooled[c];
    }
    for (std::size_t e = 0; e < per_edge_upstream.size(); ++e) {
        if (per_edge_upstream[e].empty()) continue;
        Gradients pg = mlp_backward(b.per_point, tape.unit_tapes[e], per_edge_upstream[e]);
        g.per_point.accumulate(pg);
    }
    return g;
}

std::vector<double> deepset_forward(const PointCloud& x, const MlpParams& phi,
                                    const MlpParams& xi) {
    PointBackbone b;
    b.kind = BackboneKind::DeepSet;
    b.per_point = phi;
    b.post = xi;
    return backbone_forward(b, x);
}

std::vector<double> pointnet_forward(const PointCloud& x, const MlpParams& phi,
                                     const MlpParams& head) {
    PointBackbone b;
    b.kind = BackboneKind::PointNet;
    b.per_point = phi;
    b.post = head;
    return backbone_forward(b, x);
}

Matrix dgcnn_edgeconv(const PointCloud& x, const KnnGraph& graph, const MlpParams& edge_mlp) {
    const std::size_t n = x.size();
    const std::size_t f = edge_mlp.output_dim();
    Matrix out(n, f);
    for (std::size_t i = 0; i < n; ++i) {
        if (graph.neighbors[i].empty())
            throw std::invalid_argument("dgcnn_edgeconv: point without neighbors");
        Matrix rows(graph.neighbors[i].size(), f);
        for (std::size_t e = 0; e < graph.neighbors[i].size(); ++e) {
            std::vector<double> raw = mlp_forward(edge_mlp, edge_input(x, i, graph.neighbors[i][e]));
            for (std::size_t c = 0; c < f; ++c) rows(e, c) = raw[c] > 0.0 ? raw[c] : 0.0;
        }
        PoolResult pr = pool(rows, PoolMode::Max);
        for (std::size_t c = 0; c < f; ++c) out(i, c) = pr.values[c];
    }
    return out;
}

PointCloud rotate_cloud(const PointCloud& x, const Rotation3& r) {
    PointCloud out;
    out.label = x.label;
    out.points = matmul_a_bt(x.points, r.entries);  // x_i Rᵀ
    return out;
}

AcPointModel make_ac_point_model(BackboneKind kind, std::size_t hidden, std::size_t feature,
                                 std::size_t knn_k, std::size_t num_classes, RngStream rng) {
    AcPointModel m;
    m.backbone = make_backbone(kind, hidden, feature, knn_k, rng.derive(0));
    for (std::size_t d = 0; d < num_classes; ++d)
        m.heads.push_back(make_mlp({feature, 1}, Activation::Identity, rng.derive(1, d)));
    return m;
}

PointScore ac_point_score(const AcPointModel& model, std::size_t class_id) {
    // Points are flattened N x 3 coordinates; rebuild the cloud to score.
    const AcPointModel* m = &model;
    PointScore s;
    s.value = [m, class_id](const std::vector<double>& flat) {
        PointCloud c;
        c.points = Matrix::from_rows(flat.size() / 3, 3, flat);
        const std::vector<double> feature = backbone_forward(m->backbone, c);
        return mlp_forward(m->heads[class_id], feature)[0];
    };
    return s;
}

TransformationFamily<Rotation3, PointCloud> so3_family(const AcPointModel& model) {
    (void)model;
    TransformationFamily<Rotation3, PointCloud> fam;
    fam.sample = [](RngStream& rng, int count) {
        std::vector<Rotation3> out;
        out.reserve(count);
        for (int i = 0; i < count; ++i) {
            RngStream sub = rng.derive(static_cast<std::uint64_t>(i));
            out.push_back(haar_rotation3(sub));
        }
        return out;
    };
    fam.apply = [](const Rotation3& r, const PointCloud& x) {
        return rotate_cloud(x, r).points.data();
    };
    fam.refine = [](const Rotation3& r0, const TransformObjective<Rotation3>& obj, int steps,
                    double step_size) {
        ScalarObjective so;
        so.value = [&obj](const Matrix& m) {
            Rotation3 r;
            r.entries = m;
            return obj.value(r);
        };
        RefineOptions opts;
        opts.steps = steps;
        opts.step_size = step_size;
        return refine_rotation3(r0, so, opts);
    };
    fam.compose = [](const Rotation3& u, const Rotation3& v) {
        Rotation3 out;
        out.entries = matmul(u.entries, v.entries);
        return out;
    };
    fam.inverse = [](const Rotation3& u) {
        Rotation3 out;
        out.entries = u.entries.transposed();
        return out;
    };
    fam.act = [](const Rotation3& v, const PointCloud& x) { return rotate_cloud(x, v); };
    return fam;
}

AcClassification ac_classify(const AcPointModel& model, const PointCloud& x,
                             const std::vector<Prior>& priors, const SearchBudget& budget,
                             RngStream rng, bool force_identity) {
    const auto fam = so3_family(model);
    AcClassification out;
    for (std::size_t d = 0; d < model.num_classes(); ++d) {
        PointScore score = ac_point_score(model, d);
        if (force_identity) {
            SearchBudget b = budget;
            b.refine_steps = 0;
            out.decisions.push_back(prior_maximize_with_candidates(
                fam, priors[d], score, x, {Rotation3{}}, b, static_cast<int>(d)));
        } else {
            out.decisions.push_back(prior_maximize(fam, priors[d], score, x, budget,
                                                   rng.derive(0xD07u, d), static_cast<int>(d)));
        }
    }
    out.predicted = one_vs_rest_decide(out.decisions);
    return out;
}

void ac_point_backward(const AcPointModel& model, const PointCloud& x, const Rotation3& r,
                       std::size_t class_id, double upstream, BackboneGradients& backbone_grad,
                       Gradients& head_grad) {
    const PointCloud rotated = rotate_cloud(x, r);
    BackboneTape tape;
    const std::vector<double> feature = backbone_forward(model.backbone, rotated, &tape);
    ForwardTape head_tape;
    mlp_forward(model.heads[class_id], feature, &head_tape);
    std::vector<double> dfeature;
    Gradients hg = mlp_backward(model.heads[class_id], head_tape, {upstream}, &dfeature);
    head_grad.accumulate(hg);
    BackboneGradients bg = backbone_backward(model.backbone, rotated, tape, dfeature);
    backbone_grad.per_point.accumulate(bg.per_point);
    backbone_grad.post.accumulate(bg.post);
}

}  // namespace adacanon
