#pragma once

#include <atomic>
#include <string>
#include <thread>

#include "adacanon/data.hpp"
#include "adacanon/pointcloud.hpp"
#include "adacanon/spectral.hpp"

namespace adacanon {

/// Index-sliced parallel map with results written to caller-owned slots,
/// so reductions stay in index order and results are independent of the
/// thread count. `threads` <= 1 runs inline.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

/// Thread-count override: config value unless ADACANON_THREADS is set.
int resolve_threads(int configured);

struct ExperimentConfig {
    std::string task = "grid-ci";   // grid | grid-ci | band-orient | shapes
    std::string model = "anlsf";    // anlsf | anlsf-frozen | mlp-raw |
                                    // ac-deepset | ac-pointnet | ac-dgcnn | frozen-*
    // band plan
    double band_decay = 0.5;
    std::size_t band_count = 6;
    std::size_t bands_keep = 3;     // 0 = keep all bands
    std::size_t jk_cap = 0;         // 0 = no cap
    // search budgets
    SearchBudget train_budget{8, 10, 0.1, true};
    SearchBudget eval_budget{8, 10, 0.1, true};
    // training
    std::size_t epochs = 40;
    std::size_t batch_size = 100;
    double learning_rate = 1e-3;
    double weight_decay = 0.0;
    std::size_t patience = 10;
    double lambda_reg = 0.0;
    std::size_t hidden = 128;
    // point clouds
    std::size_t knn_k = 8;
    std::size_t feature_dim = 32;
    bool z_augment = true;
    // evaluation
    std::size_t folds = 10;
    std::uint64_t master_seed = 1;
    int threads = 1;

    // dataset generation knobs (used by gen-data and the acceptance suite)
    GridTaskConfig grid;
    BandOrientationConfig band_orient;
    ShapeConfig shapes;
};

struct MetricsReport {
    std::string task, model;
    std::uint64_t seed = 0;
    std::vector<double> per_fold_accuracy;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;
    std::vector<double> per_class_logit_mean;
    std::vector<double> per_class_refine_gain_mean;
    long candidate_evaluations = 0;
    long gradient_evaluations = 0;
    double wall_clock_seconds = 0.0;  // serialized to the timing sidecar only

    void finalize();  // mean/std from per-fold values
    std::string to_json() const;          // deterministic payload
    std::string timing_json() const;      // wall clock + timestamp live here
};

// ---------------------------------------------------------------------------
// Graph classifiers. One machine covers the adaptive model, the frozen
// ablation and the raw-signal baseline: the baseline is the identity
// "decomposition" whose single band holds the signal itself.

struct PreparedGraph {
    SpectralCoeffs coeffs;
    int label = 0;
};

class AnlsfClassifier {
public:
    using Sample = PreparedGraph;
    using Transform = OrthogonalBlock;

    AnlsfModel model;
    bool frozen = false;
    double lambda_reg = 0.0;
    std::vector<Prior> priors;

    struct GradSink {
        Gradients phi;
        std::vector<Gradients> heads;
    };

    std::size_t num_classes() const { return model.num_classes(); }
    Sample augment(const Sample& s, RngStream) const { return s; }

    std::vector<CanonDecision<Transform>> canonicalize(const Sample& s,
                                                       const SearchBudget& budget,
                                                       RngStream rng) const;
    GradSink make_sink() const;
    void accumulate(const Sample& s, const std::vector<CanonDecision<Transform>>& decisions,
                    const std::vector<double>& dlogits, GradSink& sink) const;
    void reduce(GradSink& into, const GradSink& from) const;
    void init_optimizers(double lr, double weight_decay);
    void apply(const GradSink& sink, double scale);

private:
    OptimizerState phi_opt_;
    std::vector<OptimizerState> head_opts_;
};

/// Decomposition (with on-disk caching), coefficient preparation and the
/// J_k rule: percentile dims with optional cap, bands beyond `bands_keep`
/// dropped (J_k = 0).
struct GraphPipeline {
    BandPlan plan;
    BandDecomposition decomposition;
    std::vector<std::size_t> jk;
    std::size_t channels = 0;

    std::vector<PreparedGraph> prepare(const GraphDataset& data) const;
};

GraphPipeline build_graph_pipeline(const GraphDataset& data, const ExperimentConfig& cfg,
                                   const std::string& cache_dir = "");

/// Raw-signal pipeline: one band whose "coefficients" are the signal.
GraphPipeline build_raw_pipeline(const GraphDataset& data);

AnlsfClassifier make_graph_classifier(const GraphPipeline& pipe, const ExperimentConfig& cfg,
                                      std::size_t num_classes, RngStream rng, bool frozen);

// ---------------------------------------------------------------------------
// Point-cloud classifiers.

class AcPointClassifier {
public:
    using Sample = PointCloud;
    using Transform = Rotation3;

    AcPointModel model;
    bool frozen = false;
    bool z_augment = true;
    std::vector<Prior> priors;

    struct GradSink {
        BackboneGradients backbone;
        std::vector<Gradients> heads;
    };

    std::size_t num_classes() const { return model.num_classes(); }
    Sample augment(const Sample& s, RngStream rng) const;

    std::vector<CanonDecision<Transform>> canonicalize(const Sample& s,
                                                       const SearchBudget& budget,
                                                       RngStream rng) const;
    GradSink make_sink() const;
    void accumulate(const Sample& s, const std::vector<CanonDecision<Transform>>& decisions,
                    const std::vector<double>& dlogits, GradSink& sink) const;
    void reduce(GradSink& into, const GradSink& from) const;
    void init_optimizers(double lr, double weight_decay);
    void apply(const GradSink& sink, double scale);

private:
    OptimizerState per_point_opt_, post_opt_;
    std::vector<OptimizerState> head_opts_;
};

AcPointClassifier make_point_classifier(const ExperimentConfig& cfg, std::size_t num_classes,
                                        RngStream rng, bool frozen);

// ---------------------------------------------------------------------------
// Generic one-vs-rest training over canonicalized inputs.

struct TrainConfig {
    std::size_t epochs = 40;
    std::size_t batch_size = 100;
    double learning_rate = 1e-3;
    double weight_decay = 0.0;
    std::size_t patience = 10;
    SearchBudget budget;
    int threads = 1;
};

struct TrainStats {
    std::size_t epochs_run = 0;
    double best_val_loss = 0.0;
    long candidate_evaluations = 0;
    long gradient_evaluations = 0;
};

struct EvalResult {
    double accuracy = 0.0;
    std::vector<double> per_class_logit_mean;
    std::vector<double> per_class_refine_gain_mean;
    long candidate_evaluations = 0;
    long gradient_evaluations = 0;
    std::vector<int> predictions;
    std::string audit_jsonl;  // one record per (sample, class)
};

template <class Model>
TrainStats fit_one_vs_rest(Model& model, const std::vector<typename Model::Sample>& train,
                           const std::vector<typename Model::Sample>& val,
                           const TrainConfig& cfg, RngStream rng);

template <class Model>
EvalResult evaluate_one_vs_rest(const Model& model,
                                const std::vector<typename Model::Sample>& test,
                                const SearchBudget& budget, RngStream rng, int threads,
                                bool collect_audit = false);

/// Stratified fold assignment: per-label shuffle, round-robin deal.
std::vector<std::vector<std::size_t>> stratified_folds(const std::vector<int>& labels,
                                                       std::size_t folds, RngStream rng);

// ---------------------------------------------------------------------------
// End-to-end entry points used by the CLI and the acceptance suite.

MetricsReport run_graph_experiment(const GraphDataset& data, const ExperimentConfig& cfg,
                                   const std::string& cache_dir = "");
MetricsReport run_pointcloud_experiment(const std::vector<PointCloud>& clouds,
                                        const ExperimentConfig& cfg);

struct StrategyResult {
    std::string name;
    SearchBudget budget;
    double accuracy = 0.0;
    long candidate_evaluations = 0;
    long gradient_evaluations = 0;
    double wall_clock_seconds = 0.0;
};

/// Trains and tests the graph model once per budget on the synthetic
/// band-orientation family and tabulates accuracy against search cost.
std::vector<StrategyResult> compare_search_strategies(
    const GraphDataset& data, const ExperimentConfig& cfg,
    const std::vector<std::pair<std::string, SearchBudget>>& strategies);

std::string strategy_csv(const std::vector<StrategyResult>& rows);

struct InvarianceAudit {
    std::string mode;
    int trials = 0;
    int agreements = 0;
    double max_logit_delta = 0.0;
    double agreement_rate = 0.0;
    std::string to_json() const;
};

InvarianceAudit audit_graph_invariance(const AnlsfClassifier& cls,
                                       const std::vector<PreparedGraph>& samples, int trials,
                                       InvarianceMode mode, const SearchBudget& budget,
                                       RngStream rng);
InvarianceAudit audit_point_invariance(const AcPointClassifier& cls,
                                       const std::vector<PointCloud>& samples, int trials,
                                       InvarianceMode mode, const SearchBudget& budget,
                                       RngStream rng);

/// Trained-model containers for the CLI.
void save_graph_classifier(const AnlsfClassifier& cls, const GraphPipeline& pipe,
                           const std::string& dir);
bool load_graph_classifier(AnlsfClassifier& cls, GraphPipeline& pipe, const std::string& dir);

// ---------------------------------------------------------------------------
// Template implementations.

namespace detail {

struct SampleOutcome {
    double loss = 0.0;
    long evals = 0;
    long grad_evals = 0;
};

inline std::vector<double> one_hot(int label, std::size_t classes) {
    std::vector<double> y(classes, 0.0);
    if (label >= 0 && static_cast<std::size_t>(label) < classes) y[label] = 1.0;
    return y;
}

}  // namespace detail

template <class Model>
TrainStats fit_one_vs_rest(Model& model, const std::vector<typename Model::Sample>& train,
                           const std::vector<typename Model::Sample>& val,
                           const TrainConfig& cfg, RngStream rng) {
    TrainStats stats;
    if (train.empty()) throw std::invalid_argument("fit_one_vs_rest: empty training set");
    model.init_optimizers(cfg.learning_rate, cfg.weight_decay);

    Model best = model;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    const std::size_t D = model.num_classes();

    auto validation_loss = [&](std::size_t epoch) {
        if (val.empty()) return 0.0;
        std::vector<detail::SampleOutcome> slots(val.size());
        parallel_for(val.size(), cfg.threads, [&](std::size_t i) {
            auto decisions =
                model.canonicalize(val[i], cfg.budget, rng.derive(0x7A1ULL, epoch, i));
            std::vector<double> logits(D);
            for (std::size_t d = 0; d < D; ++d) logits[d] = decisions[d].raw_logit;
            std::vector<double> dl;
            slots[i].loss = bce_with_logits(logits, detail::one_hot(val[i].label, D), {}, dl);
            for (const auto& dec : decisions) {
                slots[i].evals += dec.evaluations;
                slots[i].grad_evals += dec.gradient_evaluations;
            }
        });
        double total = 0.0;
        for (const auto& s : slots) {
            total += s.loss;
            stats.candidate_evaluations += s.evals;
            stats.gradient_evaluations += s.grad_evals;
        }
        return total / static_cast<double>(val.size());
    };

    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        stats.epochs_run = epoch + 1;
        RngStream shuffle = rng.derive(0x5F1ULL, epoch);
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle.next_below(i)]);

        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t count = std::min(cfg.batch_size, order.size() - start);
            std::vector<typename Model::GradSink> sinks(count);
            std::vector<detail::SampleOutcome> slots(count);
            parallel_for(count, cfg.threads, [&](std::size_t k) {
                const std::size_t idx = order[start + k];
                typename Model::Sample s =
                    model.augment(train[idx], rng.derive(0xA06ULL, epoch, idx));
                auto decisions =
                    model.canonicalize(s, cfg.budget, rng.derive(0xCA2ULL, epoch, idx));
                std::vector<double> logits(D);
                for (std::size_t d = 0; d < D; ++d) logits[d] = decisions[d].raw_logit;
                std::vector<double> dlogits;
                slots[k].loss =
                    bce_with_logits(logits, detail::one_hot(s.label, D), {}, dlogits);
                sinks[k] = model.make_sink();
                model.accumulate(s, decisions, dlogits, sinks[k]);
                for (const auto& dec : decisions) {
                    slots[k].evals += dec.evaluations;
                    slots[k].grad_evals += dec.gradient_evaluations;
                }
            });
            typename Model::GradSink total = model.make_sink();
            double batch_loss = 0.0;
            for (std::size_t k = 0; k < count; ++k) {
                model.reduce(total, sinks[k]);
                batch_loss += slots[k].loss;
                stats.candidate_evaluations += slots[k].evals;
                stats.gradient_evaluations += slots[k].grad_evals;
            }
            if (!std::isfinite(batch_loss))
                throw std::runtime_error("fit_one_vs_rest: DivergedLoss");
            model.apply(total, 1.0 / static_cast<double>(count));
        }

        const double vloss = validation_loss(epoch);
        if (val.empty()) continue;
        if (vloss < best_val) {
            best_val = vloss;
            best = model;
            since_best = 0;
        } else if (++since_best > cfg.patience) {
            break;
        }
    }
    if (!val.empty()) {
        model = best;
        stats.best_val_loss = best_val;
    }
    return stats;
}

template <class Model>
EvalResult evaluate_one_vs_rest(const Model& model,
                                const std::vector<typename Model::Sample>& test,
                                const SearchBudget& budget, RngStream rng, int threads,
                                bool collect_audit) {
    EvalResult out;
    const std::size_t D = model.num_classes();
    out.per_class_logit_mean.assign(D, 0.0);
    out.per_class_refine_gain_mean.assign(D, 0.0);
    out.predictions.assign(test.size(), -1);

    struct Slot {
        std::vector<double> logits, gains;
        std::vector<int> cand_index;
        long evals = 0, grad_evals = 0;
        int pred = -1;
    };
    std::vector<Slot> slots(test.size());
    parallel_for(test.size(), threads, [&](std::size_t i) {
        auto decisions = model.canonicalize(test[i], budget, rng.derive(0xE7A1ULL, i));
        slots[i].pred = one_vs_rest_decide(decisions);
        for (const auto& d : decisions) {
            slots[i].logits.push_back(d.raw_logit);
            slots[i].gains.push_back(d.refine_gain);
            slots[i].cand_index.push_back(d.candidate_index);
            slots[i].evals += d.evaluations;
            slots[i].grad_evals += d.gradient_evaluations;
        }
    });

    std::size_t correct = 0;
    std::string audit;
    for (std::size_t i = 0; i < test.size(); ++i) {
        out.predictions[i] = slots[i].pred;
        if (slots[i].pred == test[i].label) ++correct;
        out.candidate_evaluations += slots[i].evals;
        out.gradient_evaluations += slots[i].grad_evals;
        for (std::size_t d = 0; d < D; ++d) {
            out.per_class_logit_mean[d] += slots[i].logits[d];
            out.per_class_refine_gain_mean[d] += slots[i].gains[d];
            if (collect_audit) {
                audit += "{\"sample\":" + std::to_string(i) + ",\"class\":" + std::to_string(d) +
                         ",\"candidate_index\":" + std::to_string(slots[i].cand_index[d]) +
                         ",\"refine_gain\":" + std::to_string(slots[i].gains[d]) +
                         ",\"logit\":" + std::to_string(slots[i].logits[d]) + "}\n";
            }
        }
    }
    if (!test.empty()) {
        out.accuracy = static_cast<double>(correct) / static_cast<double>(test.size());
        for (std::size_t d = 0; d < D; ++d) {
            out.per_class_logit_mean[d] /= static_cast<double>(test.size());
            out.per_class_refine_gain_mean[d] /= static_cast<double>(test.size());
        }
    }
    out.audit_jsonl = std::move(audit);
    return out;
}

}  // namespace adacanon
