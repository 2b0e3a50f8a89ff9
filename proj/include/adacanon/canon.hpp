#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "adacanon/rng.hpp"

namespace adacanon {

/// Monotone scalar map applied to a raw logit before maximization.
/// Descending priors are maximized by negating the ordering, so one code
/// path covers both directions.
struct Prior {
    enum class Direction { Ascending, Descending };
    Direction direction = Direction::Ascending;
    std::function<double(double)> transform;  // empty = identity

    double value(double s) const { return transform ? transform(s) : s; }
    bool ascending() const { return direction == Direction::Ascending; }
};

struct SearchBudget {
    int candidates = 8;
    int refine_steps = 0;
    double step_size = 0.05;
    bool refine_top_only = true;
};

/// Scalar score over canonical-space points (flattened to doubles).
/// `gradient` is optional; families use it to pull analytic gradients
/// back onto their transform manifolds during refinement.
struct PointScore {
    std::function<double(const std::vector<double>&)> value;
    std::function<std::vector<double>(const std::vector<double>&)> gradient;
};

/// Objective over transforms, assembled by the engine and handed to a
/// family's refine hook.
template <class Transform>
struct TransformObjective {
    std::function<double(const Transform&)> value;
    std::function<Transform(const Transform&)> gradient;  // ambient; may be empty
};

/// A parameterized set of maps from raw inputs into the score's domain.
///
/// Required: `sample` and `apply`. The rest are optional and unlock,
/// respectively: local refinement, the composition law
/// apply(compose(u,v), g) == apply(u, act(v,g)), and group actions on
/// inputs for the invariance oracles.
template <class Transform, class Input>
struct TransformationFamily {
    std::function<std::vector<Transform>(RngStream&, int)> sample;
    std::function<std::vector<double>(const Transform&, const Input&)> apply;
    std::function<Transform(const Transform&, const Input&, const std::vector<double>&)>
        pull_back_gradient;  // d(score)/d(point) -> ambient d(score)/d(transform)
    std::function<Transform(const Transform&, const TransformObjective<Transform>&, int steps,
                            double step_size)>
        refine;
    std::function<Transform(const Transform&, const Transform&)> compose;
    std::function<Transform(const Transform&)> inverse;
    std::function<Input(const Transform&, const Input&)> act;
};

/// Outcome of one per-class search.
template <class Transform>
struct CanonDecision {
    int class_id = 0;
    Transform transform{};
    double raw_logit = 0.0;
    double prior_value = 0.0;  // prior transform applied to raw_logit
    int candidate_index = -1;
    double refine_gain = 0.0;           // prior-value improvement from refinement
    long evaluations = 0;               // forward score evaluations spent
    long gradient_evaluations = 0;      // backward/gradient evaluations spent
};

namespace detail {

template <class Transform, class Input>
TransformObjective<Transform> make_transform_objective(
    const TransformationFamily<Transform, Input>& fam, const PointScore& score, const Input& g,
    double sign, long* eval_counter, long* grad_counter) {
    TransformObjective<Transform> obj;
    obj.value = [&fam, &score, &g, sign, eval_counter](const Transform& u) {
        if (eval_counter) ++*eval_counter;
        return sign * score.value(fam.apply(u, g));
    };
    if (score.gradient && fam.pull_back_gradient) {
        obj.gradient = [&fam, &score, &g, sign, grad_counter](const Transform& u) {
            if (grad_counter) ++*grad_counter;
            std::vector<double> point = fam.apply(u, g);
            std::vector<double> dpoint = score.gradient(point);
            if (sign < 0.0)
                for (auto& v : dpoint) v = -v;
            return fam.pull_back_gradient(u, g, dpoint);
        };
    }
    return obj;
}

}  // namespace detail

/// Prior maximization over an explicit candidate list: evaluates
/// prior∘score∘apply(u_i, g) for each candidate, optionally refines (all
/// or only the best sampled one), and returns the best decision with ties
/// broken by lowest candidate index. Candidates with non-finite scores
/// are excluded; if every candidate is non-finite a std::runtime_error
/// (NonFiniteScore) is thrown.
template <class Transform, class Input>
CanonDecision<Transform> prior_maximize_with_candidates(
    const TransformationFamily<Transform, Input>& fam, const Prior& prior,
    const PointScore& score, const Input& g, const std::vector<Transform>& candidates,
    const SearchBudget& budget, int class_id = 0) {
    if (candidates.empty())
        throw std::invalid_argument("prior_maximize: candidate budget K >= 1 required");

    CanonDecision<Transform> best;
    best.class_id = class_id;
    const double sign = prior.ascending() ? 1.0 : -1.0;

    struct Scored {
        double raw;
        double prior_value;
        bool finite;
    };
    std::vector<Scored> scored(candidates.size());
    bool any_finite = false;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        ++best.evaluations;
        const double s = score.value(fam.apply(candidates[i], g));
        scored[i].raw = s;
        scored[i].finite = std::isfinite(s);
        scored[i].prior_value = scored[i].finite ? prior.value(s) : 0.0;
        any_finite = any_finite || scored[i].finite;
    }
    if (!any_finite) throw std::runtime_error("prior_maximize: NonFiniteScore for all candidates");

    auto better = [&](double pv_a, double pv_b) {
        return prior.ascending() ? pv_a > pv_b : pv_a < pv_b;
    };

    int best_idx = -1;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (!scored[i].finite) continue;
        if (best_idx < 0 || better(scored[i].prior_value, scored[best_idx].prior_value))
            best_idx = static_cast<int>(i);
    }

    const bool do_refine = budget.refine_steps > 0 && static_cast<bool>(fam.refine);
    Transform chosen = candidates[best_idx];
    double chosen_raw = scored[best_idx].raw;
    double chosen_pv = scored[best_idx].prior_value;
    double gain = 0.0;
    int chosen_index = best_idx;

    if (do_refine) {
        auto obj = detail::make_transform_objective(fam, score, g, sign, &best.evaluations,
                                                    &best.gradient_evaluations);
        auto refine_one = [&](int idx) {
            Transform u = fam.refine(candidates[idx], obj, budget.refine_steps, budget.step_size);
            ++best.evaluations;
            const double raw = score.value(fam.apply(u, g));
            return std::make_pair(std::move(u), raw);
        };
        if (budget.refine_top_only) {
            auto [u, raw] = refine_one(best_idx);
            if (std::isfinite(raw) && !better(scored[best_idx].prior_value, prior.value(raw))) {
                gain = prior.value(raw) - scored[best_idx].prior_value;
                chosen = std::move(u);
                chosen_raw = raw;
                chosen_pv = prior.value(raw);
            }
        } else {
            int arg = -1;
            Transform arg_u{};
            double arg_raw = 0.0, arg_pv = 0.0;
            for (std::size_t i = 0; i < candidates.size(); ++i) {
                if (!scored[i].finite) continue;
                auto [u, raw] = refine_one(static_cast<int>(i));
                if (!std::isfinite(raw)) continue;
                const double pv = prior.value(raw);
                if (arg < 0 || better(pv, arg_pv)) {
                    arg = static_cast<int>(i);
                    arg_u = std::move(u);
                    arg_raw = raw;
                    arg_pv = pv;
                }
            }
            if (arg >= 0 && !better(chosen_pv, arg_pv)) {
                gain = arg_pv - scored[arg].prior_value;
                chosen = std::move(arg_u);
                chosen_raw = arg_raw;
                chosen_pv = arg_pv;
                chosen_index = arg;
            }
        }
    }

    best.transform = std::move(chosen);
    best.raw_logit = chosen_raw;
    best.prior_value = chosen_pv;
    best.candidate_index = chosen_index;
    best.refine_gain = gain;
    return best;
}

/// Samples budget.candidates transforms from the family's stream and runs
/// prior maximization over them.
template <class Transform, class Input>
CanonDecision<Transform> prior_maximize(const TransformationFamily<Transform, Input>& fam,
                                        const Prior& prior, const PointScore& score,
                                        const Input& g, const SearchBudget& budget, RngStream rng,
                                        int class_id = 0) {
    if (budget.candidates < 1)
        throw std::invalid_argument("prior_maximize: candidate budget K >= 1 required");
    std::vector<Transform> candidates = fam.sample(rng, budget.candidates);
    return prior_maximize_with_candidates(fam, prior, score, g, candidates, budget, class_id);
}

/// Argmax over raw logits; ties break to the lowest class id.
/// Throws std::invalid_argument (MissingClass) when fewer than two
/// decisions are supplied.
template <class Transform>
int one_vs_rest_decide(const std::vector<CanonDecision<Transform>>& decisions) {
    if (decisions.size() < 2)
        throw std::invalid_argument("one_vs_rest_decide: MissingClass (need D >= 2 decisions)");
    int best = 0;
    for (std::size_t d = 1; d < decisions.size(); ++d)
        if (decisions[d].raw_logit > decisions[best].raw_logit) best = static_cast<int>(d);
    return best;
}

struct LipschitzCheck {
    double lhs = 0.0;  // |max_u f - max_u y|
    double rhs = 0.0;  // max_u |f - y|
    bool holds = false;
};

/// Exhaustive check of the max-stability inequality
/// |max_u f(κ_u g) - max_u y(κ_u g)| <= max_u |f(κ_u g) - y(κ_u g)|
/// over a finite candidate set.
template <class Transform, class Input>
LipschitzCheck lipschitz_oracle(const TransformationFamily<Transform, Input>& fam,
                                const std::vector<Transform>& candidates, const PointScore& f,
                                const PointScore& y, const Input& g) {
    if (candidates.empty()) throw std::invalid_argument("lipschitz_oracle: empty candidate set");
    double max_f = -std::numeric_limits<double>::infinity();
    double max_y = -std::numeric_limits<double>::infinity();
    double max_gap = 0.0;
    for (const Transform& u : candidates) {
        const std::vector<double> point = fam.apply(u, g);
        const double fv = f.value(point), yv = y.value(point);
        max_f = std::max(max_f, fv);
        max_y = std::max(max_y, yv);
        max_gap = std::max(max_gap, std::abs(fv - yv));
    }
    LipschitzCheck out;
    out.lhs = std::abs(max_f - max_y);
    out.rhs = max_gap;
    out.holds = out.lhs <= out.rhs + 1e-12;
    return out;
}

enum class InvarianceMode { OrbitConsistent, Resampled };

struct InvarianceReport {
    int pred_base = -1;
    int pred_acted = -1;
    bool agree = false;
    double max_abs_logit_delta = 0.0;
    std::vector<double> logits_base;
    std::vector<double> logits_acted;
};

/// Compares the one-vs-rest decision on g against the decision on
/// act(v, g).
///
/// Orbit-consistent mode composes every candidate with v⁻¹ so the two
/// searches walk the same orbit points and the logits agree exactly (up
/// to float noise). Resampled mode draws an independent candidate set for
/// the acted input and reports the observed agreement.
///
/// Throws std::invalid_argument (ComposeUnsupported) if the family lacks
/// compose/inverse/act in orbit-consistent mode.
template <class Transform, class Input>
InvarianceReport invariance_oracle(const TransformationFamily<Transform, Input>& fam,
                                   const std::vector<Prior>& priors,
                                   const std::vector<PointScore>& scores, const Input& g,
                                   const Transform& v, InvarianceMode mode,
                                   const SearchBudget& budget, RngStream rng) {
    if (!fam.act) throw std::invalid_argument("invariance_oracle: ComposeUnsupported (no act)");
    if (mode == InvarianceMode::OrbitConsistent && (!fam.compose || !fam.inverse))
        throw std::invalid_argument("invariance_oracle: ComposeUnsupported");
    const std::size_t D = scores.size();

    const Input acted = fam.act(v, g);
    InvarianceReport rep;
    rep.logits_base.resize(D);
    rep.logits_acted.resize(D);

    std::vector<CanonDecision<Transform>> base, other;
    for (std::size_t d = 0; d < D; ++d) {
        RngStream class_rng = rng.derive(0xBA5Eu, d);
        std::vector<Transform> candidates = fam.sample(class_rng, budget.candidates);
        base.push_back(prior_maximize_with_candidates(fam, priors[d], scores[d], g, candidates,
                                                      budget, static_cast<int>(d)));
        if (mode == InvarianceMode::OrbitConsistent) {
            const Transform vinv = fam.inverse(v);
            std::vector<Transform> mapped;
            mapped.reserve(candidates.size());
            for (const Transform& u : candidates) mapped.push_back(fam.compose(u, vinv));
            other.push_back(prior_maximize_with_candidates(fam, priors[d], scores[d], acted,
                                                           mapped, budget, static_cast<int>(d)));
        } else {
            RngStream fresh = rng.derive(0x5EEDu, d);
            std::vector<Transform> resampled = fam.sample(fresh, budget.candidates);
            other.push_back(prior_maximize_with_candidates(fam, priors[d], scores[d], acted,
                                                           resampled, budget,
                                                           static_cast<int>(d)));
        }
        rep.logits_base[d] = base.back().raw_logit;
        rep.logits_acted[d] = other.back().raw_logit;
        rep.max_abs_logit_delta =
            std::max(rep.max_abs_logit_delta, std::abs(base.back().raw_logit - other.back().raw_logit));
    }
    rep.pred_base = one_vs_rest_decide(base);
    rep.pred_acted = one_vs_rest_decide(other);
    rep.agree = rep.pred_base == rep.pred_acted;
    return rep;
}

/// Evidence table for continuity of the canonicalized score: perturbs g
/// by random directions of norm eps and records the change of the
/// fixed-candidate maximum.
template <class Transform, class Input>
std::vector<std::pair<double, double>> continuity_probe(
    const TransformationFamily<Transform, Input>& fam, const Prior& prior,
    const PointScore& score, const Input& g,
    const std::function<Input(const Input&, double, RngStream&)>& perturb,
    const std::vector<double>& eps_grid, const std::vector<Transform>& candidates,
    RngStream rng) {
    SearchBudget budget;
    budget.candidates = static_cast<int>(candidates.size());
    budget.refine_steps = 0;
    const double base =
        prior_maximize_with_candidates(fam, prior, score, g, candidates, budget).prior_value;
    std::vector<std::pair<double, double>> table;
    for (double eps : eps_grid) {
        if (eps == 0.0) {
            table.emplace_back(0.0, 0.0);
            continue;
        }
        Input moved = perturb(g, eps, rng);
        const double val =
            prior_maximize_with_candidates(fam, prior, score, moved, candidates, budget)
                .prior_value;
        table.emplace_back(eps, std::abs(val - base));
    }
    return table;
}

}  // namespace adacanon
