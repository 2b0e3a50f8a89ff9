#pragma once

#include <string>

#include "adacanon/matrix.hpp"
#include "adacanon/rng.hpp"

namespace adacanon {

enum class Activation { Relu, Tanh, Identity };

struct MlpLayer {
    Matrix weight;             // out x in
    std::vector<double> bias;  // out
    Activation activation = Activation::Identity;
};

/// Plain multilayer perceptron. The last layer is always Identity so the
/// output is a raw logit vector.
struct MlpParams {
    std::vector<MlpLayer> layers;

    std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().weight.cols(); }
    std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().weight.rows(); }
    std::size_t parameter_count() const;
};

/// Gradients shaped like an MlpParams.
struct Gradients {
    std::vector<Matrix> dweight;
    std::vector<std::vector<double>> dbias;

    static Gradients zeros_like(const MlpParams& p);
    void accumulate(const Gradients& o, double scale = 1.0);
    void scale(double s);
    bool all_finite() const;
};

/// Cached per-layer pre- and post-activations from a forward pass.
struct ForwardTape {
    std::vector<std::vector<double>> pre;   // z_l
    std::vector<std::vector<double>> post;  // a_l, post[0] is the input
};

/// He-uniform init for relu layers, Xavier-uniform for tanh/identity.
MlpParams make_mlp(const std::vector<std::size_t>& dims, Activation hidden_activation,
                   RngStream rng);

std::vector<double> mlp_forward(const MlpParams& p, const std::vector<double>& x,
                                ForwardTape* tape = nullptr);

/// Gradient of <upstream, logit> with respect to every parameter.
/// If `input_grad` is non-null it also receives d<upstream,logit>/dx.
Gradients mlp_backward(const MlpParams& p, const ForwardTape& tape,
                       const std::vector<double>& upstream,
                       std::vector<double>* input_grad = nullptr);

/// Summed weighted binary cross-entropy in the stable log-sum-exp form.
/// Returns the loss and writes sigma(s) - y (times the weight) into dloss.
double bce_with_logits(const std::vector<double>& logits, const std::vector<double>& targets,
                       const std::vector<double>& weights, std::vector<double>& dloss);

enum class PoolMode { Max, Sum, Mean };

struct PoolResult {
    std::vector<double> values;
    std::vector<std::size_t> argmax;  // winner row per column, max mode only
};

/// Columnwise reduction over the rows of `rows`. Max ties break to the
/// lowest row index. Throws std::invalid_argument (EmptyInput).
PoolResult pool(const Matrix& rows, PoolMode mode);

/// Adam with bias-corrected moments.
struct OptimizerState {
    std::vector<Matrix> m_w, v_w;
    std::vector<std::vector<double>> m_b, v_b;
    long step = 0;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0;  // decoupled

    static OptimizerState init(const MlpParams& p, double lr, double weight_decay = 0.0);
};

/// One Adam step (minimization). Throws std::runtime_error (NonFiniteGradient).
void optimizer_step(OptimizerState& state, MlpParams& params, const Gradients& grads);

/// Checkpoint container: little-endian, a u32 JSON-header length, the JSON
/// header (layer shapes, activations, seed tag), then all weights and
/// biases as raw 64-bit floats in layer order.
void save_mlp(const MlpParams& p, const std::string& path, std::uint64_t seed_tag = 0);
MlpParams load_mlp(const std::string& path, std::uint64_t* seed_tag = nullptr);

}  // namespace adacanon
