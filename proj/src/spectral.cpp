#include "adacanon/spectral.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "adacanon/groups.hpp"

namespace adacanon {

Matrix normalized_laplacian(const Graph& g) {
    const std::size_t n = g.n;
    if (g.adjacency.rows() != n || g.adjacency.cols() != n)
        throw std::invalid_argument("normalized_laplacian: adjacency shape mismatch");
    double asym = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            asym = std::max(asym, std::abs(g.adjacency(i, j) - g.adjacency(j, i)));
    if (asym > 1e-12)
        throw std::invalid_argument("normalized_laplacian: AsymmetricAdjacency");
    for (double v : g.adjacency.data())
        if (v < 0.0) throw std::invalid_argument("normalized_laplacian: NegativeWeight");

    std::vector<double> dinv_sqrt(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double deg = 0.0;
        for (std::size_t j = 0; j < n; ++j) deg += g.adjacency(i, j);
        dinv_sqrt[i] = deg > 0.0 ? 1.0 / std::sqrt(deg) : 0.0;  // isolated node -> identity row
    }
    Matrix l(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j)
            l(i, j) = -dinv_sqrt[i] * g.adjacency(i, j) * dinv_sqrt[j];
        l(i, i) += 1.0;
    }
    // Exact symmetry for the eigensolver.
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = 0.5 * (l(i, j) + l(j, i));
            l(i, j) = v;
            l(j, i) = v;
        }
    return l;
}

Matrix gso_matrix(const Graph& g, GsoKind kind) {
    switch (kind) {
        case GsoKind::NormalizedLaplacian: return normalized_laplacian(g);
        case GsoKind::Adjacency: return g.adjacency;
        case GsoKind::CombinatorialLaplacian: {
            Matrix l = g.adjacency * -1.0;
            for (std::size_t i = 0; i < g.n; ++i) {
                double deg = 0.0;
                for (std::size_t j = 0; j < g.n; ++j) deg += g.adjacency(i, j);
                l(i, i) += deg + g.adjacency(i, i);
            }
            return l;
        }
    }
    throw std::invalid_argument("gso_matrix: unknown kind");
}

Matrix apply_scalar_function(const Matrix& l, const std::function<double(double)>& f) {
    EigenPairs ep = eigh_symmetric(l);
    Matrix scaled = ep.vectors;
    for (std::size_t j = 0; j < scaled.cols(); ++j) {
        const double fj = f(ep.values[j]);
        for (std::size_t i = 0; i < scaled.rows(); ++i) scaled(i, j) *= fj;
    }
    return matmul_a_bt(scaled, ep.vectors);
}

std::size_t BandPlan::band_of(double lambda) const {
    const double snap = 1e-9 * lambda_max();
    for (std::size_t k = 0; k < boundaries.size(); ++k)
        if (std::abs(lambda - boundaries[k]) <= snap) lambda = boundaries[k];
    // Band k covers [b_{k-1}, b_k); band 0 extends to 0; top band closed.
    for (std::size_t k = 1; k < boundaries.size(); ++k)
        if (lambda < boundaries[k]) return k - 1;
    return bands() - 1;
}

std::uint64_t BandPlan::fingerprint() const {
    std::uint64_t h = fnv1a64(boundaries.data(), boundaries.size() * sizeof(double));
    return hash_combine(h, boundaries.size());
}

BandPlan dyadic_band_plan(double lambda_max, double r, std::size_t band_count) {
    if (!(r > 0.0 && r < 1.0)) throw std::invalid_argument("dyadic_band_plan: BadDecay");
    if (band_count < 1) throw std::invalid_argument("dyadic_band_plan: band_count >= 1");
    if (!(lambda_max > 0.0)) throw std::invalid_argument("dyadic_band_plan: lambda_max > 0");
    BandPlan plan;
    plan.decay = r;
    plan.boundaries.resize(band_count + 1);
    for (std::size_t k = 0; k <= band_count; ++k)
        plan.boundaries[k] = lambda_max * std::pow(r, static_cast<double>(band_count - k));
    return plan;
}

Matrix BandDecomposition::projection(std::size_t k) const {
    if (dims[k] == 0) return Matrix(n, n);
    return matmul_a_bt(basis[k], basis[k]);
}

BandDecomposition band_decompose(const Matrix& gso, const BandPlan& plan) {
    return band_decompose(eigh_symmetric(gso), plan);
}

BandDecomposition band_decompose(const EigenPairs& ep, const BandPlan& plan) {
    const std::size_t n = ep.values.size();
    const std::size_t B = plan.bands();

    std::vector<std::vector<std::size_t>> members(B);
    for (std::size_t i = 0; i < n; ++i) members[plan.band_of(ep.values[i])].push_back(i);

    BandDecomposition dec;
    dec.n = n;
    dec.basis.resize(B);
    dec.eigenvalues.resize(B);
    dec.dims.resize(B);
    for (std::size_t k = 0; k < B; ++k) {
        const auto& idx = members[k];
        dec.dims[k] = idx.size();
        if (idx.empty()) continue;
        dec.basis[k] = Matrix(n, idx.size());
        dec.eigenvalues[k].reserve(idx.size());
        for (std::size_t c = 0; c < idx.size(); ++c) {
            dec.eigenvalues[k].push_back(ep.values[idx[c]]);
            for (std::size_t i = 0; i < n; ++i) dec.basis[k](i, c) = ep.vectors(i, idx[c]);
        }
    }
    return dec;
}

SpectralCoeffs spectral_coefficients(const BandDecomposition& dec, const Matrix& signal) {
    if (signal.rows() != dec.n)
        throw std::invalid_argument("spectral_coefficients: ShapeMismatch (signal rows)");
    SpectralCoeffs out;
    out.channels = signal.cols();
    out.per_band.resize(dec.bands());
    for (std::size_t k = 0; k < dec.bands(); ++k)
        if (dec.dims[k] > 0) out.per_band[k] = matmul_at_b(dec.basis[k], signal);
    return out;
}

Matrix pad_truncate(const SpectralCoeffs& coeffs, const std::vector<std::size_t>& target_rows) {
    if (target_rows.size() != coeffs.bands())
        throw std::invalid_argument("pad_truncate: per-band target count mismatch");
    std::size_t total = 0;
    for (std::size_t j : target_rows) total += j;
    Matrix out(total, coeffs.channels);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < coeffs.bands(); ++k) {
        const Matrix& c = coeffs.per_band[k];
        const std::size_t keep = std::min<std::size_t>(c.rows(), target_rows[k]);
        for (std::size_t i = 0; i < keep; ++i)
            for (std::size_t t = 0; t < coeffs.channels; ++t) out(offset + i, t) = c(i, t);
        offset += target_rows[k];
    }
    return out;
}

OrthogonalBlock identity_block(const std::vector<std::size_t>& dims) {
    OrthogonalBlock b;
    b.blocks.reserve(dims.size());
    for (std::size_t m : dims) b.blocks.push_back(m > 0 ? Matrix::identity(m) : Matrix());
    return b;
}

RegularizerResult orientation_regularizer(const std::vector<OrthogonalBlock>& class_blocks) {
    RegularizerResult out;
    const std::size_t D = class_blocks.size();
    if (D == 0) return out;
    const std::size_t B = class_blocks[0].blocks.size();
    for (const auto& cb : class_blocks)
        if (cb.blocks.size() != B)
            throw std::invalid_argument("orientation_regularizer: DimMismatch (band count)");

    out.gradients.resize(D);
    for (std::size_t d = 0; d < D; ++d) {
        out.gradients[d].blocks.resize(B);
        for (std::size_t k = 0; k < B; ++k)
            out.gradients[d].blocks[k] =
                Matrix(class_blocks[d].blocks[k].rows(), class_blocks[d].blocks[k].cols());
    }

    for (std::size_t k = 0; k < B; ++k) {
        for (std::size_t d = 0; d < D; ++d) {
            for (std::size_t e = d + 1; e < D; ++e) {
                const Matrix& a = class_blocks[d].blocks[k];
                const Matrix& b = class_blocks[e].blocks[k];
                if (a.rows() != b.rows() || a.cols() != b.cols())
                    throw std::invalid_argument("orientation_regularizer: DimMismatch");
                if (a.empty()) continue;
                for (std::size_t i = 0; i < a.data().size(); ++i) {
                    const double diff = a.data()[i] - b.data()[i];
                    out.penalty += diff * diff;
                    out.gradients[d].blocks[k].data()[i] += 2.0 * diff;
                    out.gradients[e].blocks[k].data()[i] -= 2.0 * diff;
                }
            }
        }
    }
    return out;
}

std::size_t AnlsfModel::flat_dim() const {
    std::size_t j = 0;
    for (std::size_t v : jk) j += v;
    return j * channels;
}

AnlsfModel make_anlsf_model(const BandPlan& plan, const std::vector<std::size_t>& band_dims,
                            const std::vector<std::size_t>& jk, std::size_t channels,
                            std::size_t num_classes, std::size_t hidden, RngStream rng) {
    AnlsfModel m;
    m.plan = plan;
    m.band_dims = band_dims;
    m.jk = jk;
    m.channels = channels;
    m.phi = make_mlp({m.flat_dim(), hidden, hidden}, Activation::Relu, rng.derive(0));
    // phi's top layer feeds the heads through its activation.
    m.phi.layers.back().activation = Activation::Relu;
    for (std::size_t d = 0; d < num_classes; ++d)
        m.heads.push_back(make_mlp({hidden, 1}, Activation::Identity, rng.derive(1, d)));
    return m;
}

namespace {

void check_block_dims(const AnlsfModel& model, const OrthogonalBlock& block) {
    if (block.blocks.size() != model.band_dims.size())
        throw std::invalid_argument("anlsf: BlockDimMismatch (band count)");
    for (std::size_t k = 0; k < block.blocks.size(); ++k) {
        if (model.jk[k] == 0 || model.band_dims[k] == 0) continue;
        if (block.blocks[k].rows() != model.band_dims[k] ||
            block.blocks[k].cols() != model.band_dims[k])
            throw std::invalid_argument("anlsf: BlockDimMismatch (band " + std::to_string(k) +
                                        ")");
    }
}

}  // namespace

std::vector<double> anlsf_flatten(const AnlsfModel& model, const SpectralCoeffs& coeffs,
                                  const OrthogonalBlock& block) {
    check_block_dims(model, block);
    if (coeffs.bands() != model.band_dims.size() || coeffs.channels != model.channels)
        throw std::invalid_argument("anlsf: BlockDimMismatch (coefficients)");
    std::vector<double> flat(model.flat_dim(), 0.0);
    const std::size_t T = model.channels;
    std::size_t offset = 0;
    for (std::size_t k = 0; k < model.band_dims.size(); ++k) {
        const std::size_t J = model.jk[k];
        if (J == 0) continue;
        const std::size_t M = model.band_dims[k];
        if (M > 0) {
            const Matrix& c = coeffs.per_band[k];
            const Matrix& u = block.blocks[k];
            const std::size_t keep = std::min(M, J);
            // Rows of U_k C_k, truncated to the first `keep`.
            for (std::size_t i = 0; i < keep; ++i) {
                const double* ui = u.row(i);
                for (std::size_t t = 0; t < T; ++t) {
                    double s = 0.0;
                    for (std::size_t r = 0; r < M; ++r) s += ui[r] * c(r, t);
                    flat[offset + i * T + t] = s;
                }
            }
        }
        offset += J * T;
    }
    return flat;
}

double anlsf_forward(const AnlsfModel& model, const SpectralCoeffs& coeffs,
                     const OrthogonalBlock& block, std::size_t class_id) {
    const std::vector<double> flat = anlsf_flatten(model, coeffs, block);
    const std::vector<double> hidden = mlp_forward(model.phi, flat);
    return mlp_forward(model.heads[class_id], hidden)[0];
}

PointScore anlsf_score(const AnlsfModel& model, std::size_t class_id) {
    PointScore s;
    const MlpParams* phi = &model.phi;
    const MlpParams* head = &model.heads[class_id];
    s.value = [phi, head](const std::vector<double>& flat) {
        return mlp_forward(*head, mlp_forward(*phi, flat))[0];
    };
    s.gradient = [phi, head](const std::vector<double>& flat) {
        ForwardTape phi_tape, head_tape;
        const std::vector<double> hidden = mlp_forward(*phi, flat, &phi_tape);
        mlp_forward(*head, hidden, &head_tape);
        std::vector<double> dhidden;
        mlp_backward(*head, head_tape, {1.0}, &dhidden);
        std::vector<double> dflat;
        mlp_backward(*phi, phi_tape, dhidden, &dflat);
        return dflat;
    };
    return s;
}

void anlsf_backward(const AnlsfModel& model, const SpectralCoeffs& coeffs,
                    const OrthogonalBlock& block, std::size_t class_id, double upstream,
                    Gradients& phi_grad, Gradients& head_grad) {
    const std::vector<double> flat = anlsf_flatten(model, coeffs, block);
    ForwardTape phi_tape, head_tape;
    const std::vector<double> hidden = mlp_forward(model.phi, flat, &phi_tape);
    mlp_forward(model.heads[class_id], hidden, &head_tape);
    std::vector<double> dhidden;
    Gradients hg = mlp_backward(model.heads[class_id], head_tape, {upstream}, &dhidden);
    Gradients pg = mlp_backward(model.phi, phi_tape, dhidden, nullptr);
    head_grad.accumulate(hg);
    phi_grad.accumulate(pg);
}

OrthogonalBlock refine_orthogonal_block(const OrthogonalBlock& u0,
                                        const TransformObjective<OrthogonalBlock>& objective,
                                        int steps, double step_size) {
    if (steps <= 0 || !objective.gradient) return u0;
    OrthogonalBlock best = u0;
    double best_val = objective.value(u0);
    OrthogonalBlock cur = u0;
    double cur_val = best_val;

    for (int it = 0; it < steps; ++it) {
        OrthogonalBlock g = objective.gradient(cur);
        bool accepted = false;
        double trial = step_size;
        for (int h = 0; h <= 5; ++h) {
            OrthogonalBlock cand = cur;
            bool ok = true;
            for (std::size_t k = 0; k < cand.blocks.size(); ++k) {
                if (cand.blocks[k].empty() || g.blocks[k].empty()) continue;
                if (!g.blocks[k].all_finite())
                    throw std::runtime_error("refine_orthogonal_block: NonFiniteGradient");
                if (g.blocks[k].max_abs() == 0.0) continue;
                try {
                    cand.blocks[k] = polar_orthogonal(cur.blocks[k] + trial * g.blocks[k]);
                } catch (const std::runtime_error&) {
                    ok = false;
                    break;
                }
            }
            const double val = ok ? objective.value(cand)
                                  : -std::numeric_limits<double>::infinity();
            if (ok && std::isfinite(val) && val >= cur_val) {
                cur = std::move(cand);
                cur_val = val;
                accepted = true;
                break;
            }
            trial *= 0.5;
        }
        if (cur_val > best_val) {
            best_val = cur_val;
            best = cur;
        }
        if (!accepted) break;
    }
    return best;
}

TransformationFamily<OrthogonalBlock, SpectralCoeffs> anlsf_family(const AnlsfModel& model) {
    TransformationFamily<OrthogonalBlock, SpectralCoeffs> fam;
    const std::vector<std::size_t> dims = model.band_dims;
    const std::vector<std::size_t> jk = model.jk;
    const AnlsfModel* m = &model;

    fam.sample = [dims, jk](RngStream& rng, int count) {
        std::vector<OrthogonalBlock> out;
        out.reserve(count);
        for (int i = 0; i < count; ++i) {
            OrthogonalBlock b;
            b.blocks.resize(dims.size());
            for (std::size_t k = 0; k < dims.size(); ++k) {
                if (dims[k] == 0 || jk[k] == 0) continue;
                RngStream sub = rng.derive(static_cast<std::uint64_t>(i), k);
                b.blocks[k] = haar_orthogonal(dims[k], sub);
            }
            out.push_back(std::move(b));
        }
        return out;
    };
    fam.apply = [m](const OrthogonalBlock& u, const SpectralCoeffs& c) {
        return anlsf_flatten(*m, c, u);
    };
    fam.pull_back_gradient = [m](const OrthogonalBlock& u, const SpectralCoeffs& c,
                                 const std::vector<double>& dflat) {
        OrthogonalBlock g;
        g.blocks.resize(m->band_dims.size());
        const std::size_t T = m->channels;
        std::size_t offset = 0;
        for (std::size_t k = 0; k < m->band_dims.size(); ++k) {
            const std::size_t J = m->jk[k];
            if (J == 0) continue;
            const std::size_t M = m->band_dims[k];
            if (M > 0) {
                // d/dU_k of <dflat, rows of U_k C_k>: row i gets
                // sum_t dflat[i,t] * C_k(:,t).
                g.blocks[k] = Matrix(M, M);
                const Matrix& ck = c.per_band[k];
                const std::size_t keep = std::min(M, J);
                for (std::size_t i = 0; i < keep; ++i) {
                    double* gi = g.blocks[k].row(i);
                    for (std::size_t t = 0; t < T; ++t) {
                        const double d = dflat[offset + i * T + t];
                        if (d == 0.0) continue;
                        for (std::size_t r = 0; r < M; ++r) gi[r] += d * ck(r, t);
                    }
                }
            }
            offset += J * T;
        }
        (void)u;
        return g;
    };
    fam.refine = refine_orthogonal_block;
    fam.compose = [](const OrthogonalBlock& u, const OrthogonalBlock& w) {
        OrthogonalBlock out;
        out.blocks.resize(u.blocks.size());
        for (std::size_t k = 0; k < u.blocks.size(); ++k) {
            if (u.blocks[k].empty()) continue;
            if (w.blocks.size() > k && !w.blocks[k].empty())
                out.blocks[k] = matmul_a_bt(u.blocks[k], w.blocks[k]);
            else
                out.blocks[k] = u.blocks[k];
        }
        return out;
    };
    fam.inverse = [](const OrthogonalBlock& w) {
        OrthogonalBlock out;
        out.blocks.resize(w.blocks.size());
        for (std::size_t k = 0; k < w.blocks.size(); ++k)
            if (!w.blocks[k].empty()) out.blocks[k] = w.blocks[k].transposed();
        return out;
    };
    fam.act = [](const OrthogonalBlock& w, const SpectralCoeffs& c) {
        // Basis change X_k -> X_k W_k turns coefficients into W_kᵀ C_k.
        SpectralCoeffs out = c;
        for (std::size_t k = 0; k < c.per_band.size(); ++k) {
            if (c.per_band[k].empty() || w.blocks.size() <= k || w.blocks[k].empty()) continue;
            out.per_band[k] = matmul_at_b(w.blocks[k], c.per_band[k]);
        }
        return out;
    };
    return fam;
}

std::vector<CanonDecision<OrthogonalBlock>> anlsf_canonicalize(
    const AnlsfModel& model, const SpectralCoeffs& coeffs, const std::vector<Prior>& priors,
    const SearchBudget& budget, RngStream rng, double lambda_reg) {
    const auto fam = anlsf_family(model);
    std::vector<CanonDecision<OrthogonalBlock>> out;
    std::vector<OrthogonalBlock> decided;

    for (std::size_t d = 0; d < model.num_classes(); ++d) {
        PointScore score = anlsf_score(model, d);
        RngStream class_rng = rng.derive(0xCA0Eu, d);
        if (lambda_reg > 0.0 && !decided.empty()) {
            // Reward orientations away from already-decided classes.
            TransformationFamily<OrthogonalBlock, SpectralCoeffs> reg_fam = fam;
            const PointScore base = score;
            reg_fam.refine = [&, lambda_reg](const OrthogonalBlock& u0,
                                             const TransformObjective<OrthogonalBlock>& obj,
                                             int steps, double step) {
                TransformObjective<OrthogonalBlock> shifted;
                shifted.value = [&](const OrthogonalBlock& u) {
                    std::vector<OrthogonalBlock> all = decided;
                    all.push_back(u);
                    return obj.value(u) + lambda_reg * orientation_regularizer(all).penalty;
                };
                if (obj.gradient) {
                    shifted.gradient = [&](const OrthogonalBlock& u) {
                        OrthogonalBlock g = obj.gradient(u);
                        std::vector<OrthogonalBlock> all = decided;
                        all.push_back(u);
                        RegularizerResult reg = orientation_regularizer(all);
                        const OrthogonalBlock& rg = reg.gradients.back();
                        for (std::size_t k = 0; k < g.blocks.size(); ++k) {
                            if (g.blocks[k].empty() || rg.blocks[k].empty()) continue;
                            for (std::size_t i = 0; i < g.blocks[k].data().size(); ++i)
                                g.blocks[k].data()[i] += lambda_reg * rg.blocks[k].data()[i];
                        }
                        return g;
                    };
                }
                return refine_orthogonal_block(u0, shifted, steps, step);
            };
            out.push_back(prior_maximize(reg_fam, priors[d], score, coeffs, budget, class_rng,
                                         static_cast<int>(d)));
        } else {
            out.push_back(prior_maximize(fam, priors[d], score, coeffs, budget, class_rng,
                                         static_cast<int>(d)));
        }
        decided.push_back(out.back().transform);
    }
    return out;
}

Matrix anlsf_node_synthesis(
    const BandDecomposition& dec, const SpectralCoeffs& coeffs, const OrthogonalBlock& block,
    const std::vector<std::size_t>& jk,
    const std::function<std::vector<double>(const std::vector<double>&)>& feature_map,
    std::size_t out_channels) {
    const std::size_t T = coeffs.channels;
    std::size_t total_j = 0;
    for (std::size_t v : jk) total_j += v;

    // Rotated, padded, flattened analysis coefficients.
    std::vector<double> flat(total_j * T, 0.0);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < dec.bands(); ++k) {
        const std::size_t J = jk[k];
        if (J == 0) continue;
        const std::size_t M = dec.dims[k];
        if (M > 0) {
            const std::size_t keep = std::min(M, J);
            for (std::size_t i = 0; i < keep; ++i)
                for (std::size_t t = 0; t < T; ++t) {
                    double s = 0.0;
                    for (std::size_t r = 0; r < M; ++r)
                        s += block.blocks[k](i, r) * coeffs.per_band[k](r, t);
                    flat[offset + i * T + t] = s;
                }
        }
        offset += J * T;
    }

    const std::vector<double> features = feature_map(flat);
    if (features.size() != total_j * out_channels)
        throw std::invalid_argument("anlsf_node_synthesis: feature size mismatch");

    Matrix out(dec.n, out_channels);
    offset = 0;
    for (std::size_t k = 0; k < dec.bands(); ++k) {
        const std::size_t J = jk[k];
        if (J == 0) continue;
        const std::size_t M = dec.dims[k];
        if (M > 0) {
            const std::size_t keep = std::min(M, J);
            // Y_k (J x T') embedded to M rows, then V_k U_kᵀ Y_k.
            Matrix uty(M, out_channels);
            for (std::size_t r = 0; r < M; ++r)
                for (std::size_t t = 0; t < out_channels; ++t) {
                    double s = 0.0;
                    for (std::size_t i = 0; i < keep; ++i)
                        s += block.blocks[k](i, r) * features[offset + i * out_channels + t];
                    uty(r, t) = s;
                }
            const Matrix node = matmul(dec.basis[k], uty);
            out += node;
        }
        offset += J * out_channels;
    }
    return out;
}

std::uint64_t graph_hash(const Graph& g) {
    std::uint64_t h = fnv1a64(&g.n, sizeof(g.n));
    h = fnv1a64(g.adjacency.data().data(), g.adjacency.data().size() * sizeof(double), h);
    return h;
}

namespace {
constexpr std::uint32_t kCacheMagic = 0x41444344;  // "ADCD"
constexpr std::uint32_t kCacheVersion = 1;
}  // namespace

void save_decomposition(const BandDecomposition& dec, const BandPlan& plan,
                        std::uint64_t ghash, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_decomposition: cannot open " + path);
    auto w32 = [&](std::uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
    auto w64 = [&](std::uint64_t v) { f.write(reinterpret_cast<const char*>(&v), 8); };
    w32(kCacheMagic);
    w32(kCacheVersion);
    w64(plan.fingerprint());
    w64(ghash);
    w64(dec.n);
    w64(dec.bands());
    for (std::size_t k = 0; k < dec.bands(); ++k) {
        w64(dec.dims[k]);
        if (dec.dims[k] == 0) continue;
        f.write(reinterpret_cast<const char*>(dec.eigenvalues[k].data()),
                static_cast<std::streamsize>(dec.dims[k] * sizeof(double)));
        f.write(reinterpret_cast<const char*>(dec.basis[k].data().data()),
                static_cast<std::streamsize>(dec.basis[k].data().size() * sizeof(double)));
    }
}

bool load_decomposition(BandDecomposition& dec, const BandPlan& plan, std::uint64_t ghash,
                        const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) return false;
    auto r32 = [&]() {
        std::uint32_t v = 0;
        f.read(reinterpret_cast<char*>(&v), 4);
        return v;
    };
    auto r64 = [&]() {
        std::uint64_t v = 0;
        f.read(reinterpret_cast<char*>(&v), 8);
        return v;
    };
    if (r32() != kCacheMagic || r32() != kCacheVersion) return false;
    if (r64() != plan.fingerprint()) return false;
    if (r64() != ghash) return false;
    BandDecomposition out;
    out.n = r64();
    const std::uint64_t bands = r64();
    out.basis.resize(bands);
    out.eigenvalues.resize(bands);
    out.dims.resize(bands);
    for (std::uint64_t k = 0; k < bands; ++k) {
        out.dims[k] = r64();
        if (out.dims[k] == 0) continue;
        out.eigenvalues[k].resize(out.dims[k]);
        f.read(reinterpret_cast<char*>(out.eigenvalues[k].data()),
               static_cast<std::streamsize>(out.dims[k] * sizeof(double)));
        out.basis[k] = Matrix(out.n, out.dims[k]);
        f.read(reinterpret_cast<char*>(out.basis[k].data().data()),
               static_cast<std::streamsize>(out.basis[k].data().size() * sizeof(double)));
    }
    if (!f) return false;
    dec = std::move(out);
    return true;
}

}  // namespace adacanon
