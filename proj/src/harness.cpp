#include "adacanon/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>

#include <json.hpp>

namespace adacanon {

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    const int workers = std::max(1, std::min<int>(threads, static_cast<int>(n)));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                fn(i);
            }
        });
    }
    for (auto& t : pool) t.join();
}

int resolve_threads(int configured) {
    if (const char* env = std::getenv("ADACANON_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    return configured > 0 ? configured : 1;
}

void MetricsReport::finalize() {
    if (per_fold_accuracy.empty()) return;
    double sum = 0.0;
    for (double a : per_fold_accuracy) sum += a;
    mean_accuracy = sum / static_cast<double>(per_fold_accuracy.size());
    double var = 0.0;
    for (double a : per_fold_accuracy) var += (a - mean_accuracy) * (a - mean_accuracy);
    std_accuracy = std::sqrt(var / static_cast<double>(per_fold_accuracy.size()));
}

std::string MetricsReport::to_json() const {
    nlohmann::ordered_json j;
    j["task"] = task;
    j["model"] = model;
    j["seed"] = seed;
    j["folds"] = per_fold_accuracy.size();
    j["per_fold_accuracy"] = per_fold_accuracy;
    j["mean_accuracy"] = mean_accuracy;
    j["std_accuracy"] = std_accuracy;
    j["per_class_logit_mean"] = per_class_logit_mean;
    j["per_class_refine_gain_mean"] = per_class_refine_gain_mean;
    j["candidate_evaluations"] = candidate_evaluations;
    j["gradient_evaluations"] = gradient_evaluations;
    return j.dump(2);
}

std::string MetricsReport::timing_json() const {
    nlohmann::ordered_json j;
    j["wall_clock_seconds"] = wall_clock_seconds;
    return j.dump(2);
}

// ---------------------------------------------------------------------------
// Graph side.

std::vector<CanonDecision<OrthogonalBlock>> AnlsfClassifier::canonicalize(
    const Sample& s, const SearchBudget& budget, RngStream rng) const {
    if (frozen) {
        std::vector<CanonDecision<OrthogonalBlock>> out;
        OrthogonalBlock id;
        id.blocks.resize(model.band_dims.size());
        for (std::size_t k = 0; k < model.band_dims.size(); ++k)
            if (model.band_dims[k] > 0 && model.jk[k] > 0)
                id.blocks[k] = Matrix::identity(model.band_dims[k]);
        for (std::size_t d = 0; d < model.num_classes(); ++d) {
            CanonDecision<OrthogonalBlock> dec;
            dec.class_id = static_cast<int>(d);
            dec.transform = id;
            dec.raw_logit = anlsf_forward(model, s.coeffs, id, d);
            dec.prior_value = priors[d].value(dec.raw_logit);
            dec.candidate_index = 0;
            dec.evaluations = 1;
            out.push_back(std::move(dec));
        }
        return out;
    }
    return anlsf_canonicalize(model, s.coeffs, priors, budget, rng, lambda_reg);
}

AnlsfClassifier::GradSink AnlsfClassifier::make_sink() const {
    GradSink sink;
    sink.phi = Gradients::zeros_like(model.phi);
    for (const auto& h : model.heads) sink.heads.push_back(Gradients::zeros_like(h));
    return sink;
}

void AnlsfClassifier::accumulate(const Sample& s,
                                 const std::vector<CanonDecision<OrthogonalBlock>>& decisions,
                                 const std::vector<double>& dlogits, GradSink& sink) const {
    for (std::size_t d = 0; d < decisions.size(); ++d) {
        if (dlogits[d] == 0.0) continue;
        anlsf_backward(model, s.coeffs, decisions[d].transform, d, dlogits[d], sink.phi,
                       sink.heads[d]);
    }
}

void AnlsfClassifier::reduce(GradSink& into, const GradSink& from) const {
    into.phi.accumulate(from.phi);
    for (std::size_t d = 0; d < into.heads.size(); ++d) into.heads[d].accumulate(from.heads[d]);
}

void AnlsfClassifier::init_optimizers(double lr, double weight_decay) {
    phi_opt_ = OptimizerState::init(model.phi, lr, weight_decay);
    head_opts_.clear();
    for (const auto& h : model.heads) head_opts_.push_back(OptimizerState::init(h, lr, weight_decay));
}

void AnlsfClassifier::apply(const GradSink& sink, double scale) {
    Gradients phi = sink.phi;
    phi.scale(scale);
    optimizer_step(phi_opt_, model.phi, phi);
    for (std::size_t d = 0; d < model.heads.size(); ++d) {
        Gradients hg = sink.heads[d];
        hg.scale(scale);
        optimizer_step(head_opts_[d], model.heads[d], hg);
    }
}

std::vector<PreparedGraph> GraphPipeline::prepare(const GraphDataset& data) const {
    std::vector<PreparedGraph> out(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        out[i].coeffs = spectral_coefficients(decomposition, data.signals[i]);
        out[i].label = data.labels[i];
    }
    return out;
}

GraphPipeline build_graph_pipeline(const GraphDataset& data, const ExperimentConfig& cfg,
                                   const std::string& cache_dir) {
    GraphPipeline pipe;
    Graph g0 = data.sample(0);
    const std::uint64_t ghash = graph_hash(g0);

    // The eigendecomposition is plan-independent; cache it under a
    // full-span sentinel plan and re-band against the actual plan, which
    // is anchored at this topology's largest eigenvalue.
    BandPlan full_span;
    full_span.boundaries = {0.0, 1e300};

    std::string cache_path;
    if (!cache_dir.empty()) {
        std::filesystem::create_directories(cache_dir);
        char name[64];
        std::snprintf(name, sizeof(name), "eig_%016llx.bin",
                      static_cast<unsigned long long>(ghash));
        cache_path = cache_dir + "/" + name;
    }

    BandDecomposition full;
    if (cache_path.empty() || !load_decomposition(full, full_span, ghash, cache_path)) {
        full = band_decompose(normalized_laplacian(g0), full_span);
        if (!cache_path.empty()) save_decomposition(full, full_span, ghash, cache_path);
    }

    EigenPairs ep;
    ep.values = full.eigenvalues[0];
    ep.vectors = std::move(full.basis[0]);

    pipe.plan = dyadic_band_plan(ep.values.back(), cfg.band_decay, cfg.band_count);
    pipe.decomposition = band_decompose(ep, pipe.plan);

    // J_k rule: observed dims (here exact, one topology), optional cap,
    // bands beyond bands_keep dropped.
    pipe.jk = pipe.decomposition.dims;
    for (std::size_t k = 0; k < pipe.jk.size(); ++k) {
        if (cfg.bands_keep > 0 && k >= cfg.bands_keep) pipe.jk[k] = 0;
        if (cfg.jk_cap > 0) pipe.jk[k] = std::min(pipe.jk[k], cfg.jk_cap);
    }
    pipe.channels = data.signals.empty() ? 0 : data.signals[0].cols();
    return pipe;
}

GraphPipeline build_raw_pipeline(const GraphDataset& data) {
    GraphPipeline pipe;
    const std::size_t n = data.adjacency.rows();
    pipe.plan = dyadic_band_plan(2.0, 0.5, 1);
    pipe.decomposition.n = n;
    pipe.decomposition.basis = {Matrix::identity(n)};
    pipe.decomposition.eigenvalues = {std::vector<double>(n, 0.0)};
    pipe.decomposition.dims = {n};
    pipe.jk = {n};
    pipe.channels = data.signals.empty() ? 0 : data.signals[0].cols();
    return pipe;
}

AnlsfClassifier make_graph_classifier(const GraphPipeline& pipe, const ExperimentConfig& cfg,
                                      std::size_t num_classes, RngStream rng, bool frozen) {
    AnlsfClassifier cls;
    cls.model = make_anlsf_model(pipe.plan, pipe.decomposition.dims, pipe.jk, pipe.channels,
                                 num_classes, cfg.hidden, rng);
    cls.frozen = frozen;
    cls.lambda_reg = cfg.lambda_reg;
    cls.priors.assign(num_classes, Prior{});
    return cls;
}

// ---------------------------------------------------------------------------
// Point-cloud side.

AcPointClassifier::Sample AcPointClassifier::augment(const Sample& s, RngStream rng) const {
    if (!z_augment) return s;
    AxisAngle aa;
    aa.axis[0] = 0.0;
    aa.axis[1] = 0.0;
    aa.axis[2] = 1.0;
    aa.angle = rng.next_double() * 2.0 * M_PI;
    // Azimuthal-only training poses; the angle range folds into [0, pi]
    // by flipping the axis.
    if (aa.angle > M_PI) {
        aa.angle = 2.0 * M_PI - aa.angle;
        aa.axis[2] = -1.0;
    }
    return rotate_cloud(s, rotation_from_axis_angle(aa));
}

std::vector<CanonDecision<Rotation3>> AcPointClassifier::canonicalize(
    const Sample& s, const SearchBudget& budget, RngStream rng) const {
    AcClassification res = ac_classify(model, s, priors, budget, rng, frozen);
    return std::move(res.decisions);
}

AcPointClassifier::GradSink AcPointClassifier::make_sink() const {
    GradSink sink;
    sink.backbone.per_point = Gradients::zeros_like(model.backbone.per_point);
    sink.backbone.post = Gradients::zeros_like(model.backbone.post);
    for (const auto& h : model.heads) sink.heads.push_back(Gradients::zeros_like(h));
    return sink;
}

void AcPointClassifier::accumulate(const Sample& s,
                                   const std::vector<CanonDecision<Rotation3>>& decisions,
                                   const std::vector<double>& dlogits, GradSink& sink) const {
    for (std::size_t d = 0; d < decisions.size(); ++d) {
        if (dlogits[d] == 0.0) continue;
        ac_point_backward(model, s, decisions[d].transform, d, dlogits[d], sink.backbone,
                          sink.heads[d]);
    }
}

void AcPointClassifier::reduce(GradSink& into, const GradSink& from) const {
    into.backbone.per_point.accumulate(from.backbone.per_point);
    into.backbone.post.accumulate(from.backbone.post);
    for (std::size_t d = 0; d < into.heads.size(); ++d) into.heads[d].accumulate(from.heads[d]);
}

void AcPointClassifier::init_optimizers(double lr, double weight_decay) {
    per_point_opt_ = OptimizerState::init(model.backbone.per_point, lr, weight_decay);
    post_opt_ = OptimizerState::init(model.backbone.post, lr, weight_decay);
    head_opts_.clear();
    for (const auto& h : model.heads) head_opts_.push_back(OptimizerState::init(h, lr, weight_decay));
}

void AcPointClassifier::apply(const GradSink& sink, double scale) {
    Gradients pp = sink.backbone.per_point;
    pp.scale(scale);
    optimizer_step(per_point_opt_, model.backbone.per_point, pp);
    Gradients po = sink.backbone.post;
    po.scale(scale);
    optimizer_step(post_opt_, model.backbone.post, po);
    for (std::size_t d = 0; d < model.heads.size(); ++d) {
        Gradients hg = sink.heads[d];
        hg.scale(scale);
        optimizer_step(head_opts_[d], model.heads[d], hg);
    }
}

AcPointClassifier make_point_classifier(const ExperimentConfig& cfg, std::size_t num_classes,
                                        RngStream rng, bool frozen) {
    BackboneKind kind = BackboneKind::DeepSet;
    if (cfg.model.find("pointnet") != std::string::npos) kind = BackboneKind::PointNet;
    if (cfg.model.find("dgcnn") != std::string::npos) kind = BackboneKind::Dgcnn;
    AcPointClassifier cls;
    cls.model = make_ac_point_model(kind, cfg.hidden, cfg.feature_dim, cfg.knn_k, num_classes, rng);
    cls.frozen = frozen;
    cls.z_augment = cfg.z_augment;
    cls.priors.assign(num_classes, Prior{});
    return cls;
}

// ---------------------------------------------------------------------------
// Folds, experiments.

std::vector<std::vector<std::size_t>> stratified_folds(const std::vector<int>& labels,
                                                       std::size_t folds, RngStream rng) {
    if (folds < 2) throw std::invalid_argument("stratified_folds: BadFoldCount (folds >= 2)");
    if (folds > labels.size())
        throw std::invalid_argument("stratified_folds: BadFoldCount (folds > sample count)");
    std::map<int, std::vector<std::size_t>> by_label;
    for (std::size_t i = 0; i < labels.size(); ++i) by_label[labels[i]].push_back(i);
    std::vector<std::vector<std::size_t>> out(folds);
    std::size_t deal = 0;
    for (auto& [label, idx] : by_label) {
        RngStream shuffle = rng.derive(0xF01DULL, static_cast<std::uint64_t>(label));
        for (std::size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[shuffle.next_below(i)]);
        for (std::size_t i = 0; i < idx.size(); ++i) out[(deal++) % folds].push_back(idx[i]);
    }
    return out;
}

namespace {

template <class Sample>
void split_train_val(std::vector<Sample>& train, std::vector<Sample>& val, double val_frac,
                     RngStream rng) {
    // Deterministic shuffle, then carve the tail for validation.
    for (std::size_t i = train.size(); i > 1; --i)
        std::swap(train[i - 1], train[rng.next_below(i)]);
    const std::size_t nval = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                          val_frac * train.size()));
    val.assign(train.end() - nval, train.end());
    train.resize(train.size() - nval);
}

TrainConfig train_config_of(const ExperimentConfig& cfg) {
    TrainConfig t;
    t.epochs = cfg.epochs;
    t.batch_size = cfg.batch_size;
    t.learning_rate = cfg.learning_rate;
    t.weight_decay = cfg.weight_decay;
    t.patience = cfg.patience;
    t.budget = cfg.train_budget;
    t.threads = resolve_threads(cfg.threads);
    return t;
}

template <class Model, class MakeModel, class Sample>
MetricsReport kfold_run(MakeModel make_model, const std::vector<Sample>& all,
                        const std::vector<int>& labels, const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    MetricsReport report;
    report.task = cfg.task;
    report.model = cfg.model;
    report.seed = cfg.master_seed;

    RngStream master(cfg.master_seed, 0xE59ULL);
    const auto folds = stratified_folds(labels, cfg.folds, master.derive(1));
    const TrainConfig tcfg = train_config_of(cfg);

    std::size_t num_classes = 0;
    for (int l : labels) num_classes = std::max<std::size_t>(num_classes, l + 1);

    for (std::size_t f = 0; f < folds.size(); ++f) {
        std::vector<char> in_test(all.size(), 0);
        for (std::size_t i : folds[f]) in_test[i] = 1;
        std::vector<Sample> train, test;
        for (std::size_t i = 0; i < all.size(); ++i)
            (in_test[i] ? test : train).push_back(all[i]);
        std::vector<Sample> val;
        split_train_val(train, val, 0.1, master.derive(2, f));

        Model model = make_model(num_classes, master.derive(3, f));
        TrainStats ts = fit_one_vs_rest(model, train, val, tcfg, master.derive(4, f));
        report.candidate_evaluations += ts.candidate_evaluations;
        report.gradient_evaluations += ts.gradient_evaluations;

        EvalResult ev = evaluate_one_vs_rest(model, test, cfg.eval_budget, master.derive(5, f),
                                             tcfg.threads);
        report.per_fold_accuracy.push_back(ev.accuracy);
        report.candidate_evaluations += ev.candidate_evaluations;
        report.gradient_evaluations += ev.gradient_evaluations;
        if (report.per_class_logit_mean.empty()) {
            report.per_class_logit_mean = ev.per_class_logit_mean;
            report.per_class_refine_gain_mean = ev.per_class_refine_gain_mean;
        } else {
            for (std::size_t d = 0; d < ev.per_class_logit_mean.size(); ++d) {
                report.per_class_logit_mean[d] += ev.per_class_logit_mean[d];
                report.per_class_refine_gain_mean[d] += ev.per_class_refine_gain_mean[d];
            }
        }
    }
    for (auto& v : report.per_class_logit_mean) v /= static_cast<double>(folds.size());
    for (auto& v : report.per_class_refine_gain_mean) v /= static_cast<double>(folds.size());
    report.finalize();
    report.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

}  // namespace

MetricsReport run_graph_experiment(const GraphDataset& data, const ExperimentConfig& cfg,
                                   const std::string& cache_dir) {
    const bool raw = cfg.model == "mlp-raw";
    const bool frozen = raw || cfg.model == "anlsf-frozen";
    GraphPipeline pipe = raw ? build_raw_pipeline(data) : build_graph_pipeline(data, cfg, cache_dir);
    std::vector<PreparedGraph> samples = pipe.prepare(data);

    auto make_model = [&](std::size_t classes, RngStream rng) {
        return make_graph_classifier(pipe, cfg, classes, rng, frozen);
    };
    return kfold_run<AnlsfClassifier>(make_model, samples, data.labels, cfg);
}

MetricsReport run_pointcloud_experiment(const std::vector<PointCloud>& clouds,
                                        const ExperimentConfig& cfg) {
    const bool frozen = cfg.model.rfind("frozen-", 0) == 0;
    std::vector<int> labels;
    for (const auto& c : clouds) labels.push_back(c.label);
    auto make_model = [&](std::size_t classes, RngStream rng) {
        return make_point_classifier(cfg, classes, rng, frozen);
    };
    return kfold_run<AcPointClassifier>(make_model, clouds, labels, cfg);
}

std::vector<StrategyResult> compare_search_strategies(
    const GraphDataset& data, const ExperimentConfig& cfg,
    const std::vector<std::pair<std::string, SearchBudget>>& strategies) {
    if (strategies.size() < 2)
        throw std::invalid_argument("compare_search_strategies: need at least two strategies");

    GraphPipeline pipe = build_graph_pipeline(data, cfg, "");
    std::vector<PreparedGraph> samples = pipe.prepare(data);

    // Stratified 70/30 split shared by all strategies.
    RngStream master(cfg.master_seed, 0xC03ULL);
    std::vector<std::vector<std::size_t>> parts =
        stratified_folds(data.labels, 10, master.derive(0));
    std::vector<PreparedGraph> train, test;
    for (std::size_t p = 0; p < parts.size(); ++p)
        for (std::size_t i : parts[p]) (p < 7 ? train : test).push_back(samples[i]);
    std::vector<PreparedGraph> val;
    split_train_val(train, val, 0.1, master.derive(1));

    std::size_t num_classes = 0;
    for (int l : data.labels) num_classes = std::max<std::size_t>(num_classes, l + 1);

    std::vector<StrategyResult> out;
    for (const auto& [name, budget] : strategies) {
        const auto t0 = std::chrono::steady_clock::now();
        StrategyResult row;
        row.name = name;
        row.budget = budget;

        ExperimentConfig scfg = cfg;
        scfg.train_budget = budget;
        TrainConfig tcfg = train_config_of(scfg);

        AnlsfClassifier model = make_graph_classifier(pipe, scfg, num_classes,
                                                      master.derive(7), false);
        TrainStats ts = fit_one_vs_rest(model, train, val, tcfg, master.derive(8));
        EvalResult ev =
            evaluate_one_vs_rest(model, test, budget, master.derive(9), tcfg.threads);
        row.accuracy = ev.accuracy;
        row.candidate_evaluations = ts.candidate_evaluations + ev.candidate_evaluations;
        row.gradient_evaluations = ts.gradient_evaluations + ev.gradient_evaluations;
        row.wall_clock_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out.push_back(std::move(row));
    }
    return out;
}

std::string strategy_csv(const std::vector<StrategyResult>& rows) {
    std::string csv =
        "strategy,candidates,refine_steps,accuracy,candidate_evaluations,gradient_evaluations,"
        "wall_clock_seconds\n";
    char line[256];
    for (const auto& r : rows) {
        std::snprintf(line, sizeof(line), "%s,%d,%d,%.6f,%ld,%ld,%.3f\n", r.name.c_str(),
                      r.budget.candidates, r.budget.refine_steps, r.accuracy,
                      r.candidate_evaluations, r.gradient_evaluations, r.wall_clock_seconds);
        csv += line;
    }
    return csv;
}

std::string InvarianceAudit::to_json() const {
    nlohmann::ordered_json j;
    j["mode"] = mode;
    j["trials"] = trials;
    j["agreements"] = agreements;
    j["agreement_rate"] = agreement_rate;
    j["max_logit_delta"] = max_logit_delta;
    return j.dump(2);
}

InvarianceAudit audit_graph_invariance(const AnlsfClassifier& cls,
                                       const std::vector<PreparedGraph>& samples, int trials,
                                       InvarianceMode mode, const SearchBudget& budget,
                                       RngStream rng) {
    InvarianceAudit audit;
    audit.mode = mode == InvarianceMode::OrbitConsistent ? "orbit-consistent" : "resampled";
    audit.trials = trials;

    const auto fam = anlsf_family(cls.model);
    std::vector<PointScore> scores;
    for (std::size_t d = 0; d < cls.num_classes(); ++d)
        scores.push_back(anlsf_score(cls.model, d));

    for (int t = 0; t < trials; ++t) {
        const PreparedGraph& s = samples[t % samples.size()];
        RngStream trial_rng = rng.derive(0xA0DULL, t);
        OrthogonalBlock w;
        w.blocks.resize(cls.model.band_dims.size());
        RngStream wrng = trial_rng.derive(1);
        for (std::size_t k = 0; k < cls.model.band_dims.size(); ++k)
            if (cls.model.band_dims[k] > 0 && cls.model.jk[k] > 0) {
                RngStream sub = wrng.derive(k);
                w.blocks[k] = haar_orthogonal(cls.model.band_dims[k], sub);
            }
        auto rep = invariance_oracle(fam, cls.priors, scores, s.coeffs, w, mode, budget,
                                     trial_rng.derive(2));
        audit.agreements += rep.agree ? 1 : 0;
        audit.max_logit_delta = std::max(audit.max_logit_delta, rep.max_abs_logit_delta);
    }
    audit.agreement_rate = trials > 0 ? static_cast<double>(audit.agreements) / trials : 0.0;
    return audit;
}

InvarianceAudit audit_point_invariance(const AcPointClassifier& cls,
                                       const std::vector<PointCloud>& samples, int trials,
                                       InvarianceMode mode, const SearchBudget& budget,
                                       RngStream rng) {
    InvarianceAudit audit;
    audit.mode = mode == InvarianceMode::OrbitConsistent ? "orbit-consistent" : "resampled";
    audit.trials = trials;

    const auto fam = so3_family(cls.model);
    std::vector<PointScore> scores;
    for (std::size_t d = 0; d < cls.num_classes(); ++d)
        scores.push_back(ac_point_score(cls.model, d));

    for (int t = 0; t < trials; ++t) {
        const PointCloud& s = samples[t % samples.size()];
        RngStream trial_rng = rng.derive(0xB0DULL, t);
        RngStream vrng = trial_rng.derive(1);
        Rotation3 v = haar_rotation3(vrng);
        auto rep =
            invariance_oracle(fam, cls.priors, scores, s, v, mode, budget, trial_rng.derive(2));
        audit.agreements += rep.agree ? 1 : 0;
        audit.max_logit_delta = std::max(audit.max_logit_delta, rep.max_abs_logit_delta);
    }
    audit.agreement_rate = trials > 0 ? static_cast<double>(audit.agreements) / trials : 0.0;
    return audit;
}

void save_graph_classifier(const AnlsfClassifier& cls, const GraphPipeline& pipe,
                           const std::string& dir) {
    std::filesystem::create_directories(dir);
    save_mlp(cls.model.phi, dir + "/phi.bin");
    for (std::size_t d = 0; d < cls.model.heads.size(); ++d)
        save_mlp(cls.model.heads[d], dir + "/head" + std::to_string(d) + ".bin");

    nlohmann::ordered_json meta;
    meta["format"] = "adacanon-graph-classifier-v1";
    meta["frozen"] = cls.frozen;
    meta["lambda_reg"] = cls.lambda_reg;
    meta["num_classes"] = cls.model.heads.size();
    meta["channels"] = cls.model.channels;
    meta["band_dims"] = cls.model.band_dims;
    meta["jk"] = cls.model.jk;
    meta["boundaries"] = cls.model.plan.boundaries;
    meta["decay"] = cls.model.plan.decay;
    std::ofstream f(dir + "/model.json");
    f << meta.dump(2) << "\n";

    save_decomposition(pipe.decomposition, pipe.plan, 0, dir + "/decomposition.bin");
}

bool load_graph_classifier(AnlsfClassifier& cls, GraphPipeline& pipe, const std::string& dir) {
    std::ifstream f(dir + "/model.json");
    if (!f) return false;
    nlohmann::json meta;
    f >> meta;
    if (meta.value("format", "") != "adacanon-graph-classifier-v1") return false;

    cls.model.plan.boundaries = meta.at("boundaries").get<std::vector<double>>();
    cls.model.plan.decay = meta.at("decay");
    cls.model.band_dims = meta.at("band_dims").get<std::vector<std::size_t>>();
    cls.model.jk = meta.at("jk").get<std::vector<std::size_t>>();
    cls.model.channels = meta.at("channels");
    cls.frozen = meta.at("frozen");
    cls.lambda_reg = meta.at("lambda_reg");
    cls.model.phi = load_mlp(dir + "/phi.bin");
    cls.model.heads.clear();
    const std::size_t classes = meta.at("num_classes");
    for (std::size_t d = 0; d < classes; ++d)
        cls.model.heads.push_back(load_mlp(dir + "/head" + std::to_string(d) + ".bin"));
    cls.priors.assign(classes, Prior{});

    pipe.plan = cls.model.plan;
    pipe.jk = cls.model.jk;
    pipe.channels = cls.model.channels;
    if (!load_decomposition(pipe.decomposition, pipe.plan, 0, dir + "/decomposition.bin"))
        return false;
    return true;
}

}  // namespace adacanon
