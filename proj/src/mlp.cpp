#include "adacanon/mlp.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace adacanon {

namespace {

double apply_activation(Activation a, double z) {
    switch (a) {
        case Activation::Relu: return z > 0.0 ? z : 0.0;
        case Activation::Tanh: return std::tanh(z);
        case Activation::Identity: return z;
    }
    return z;
}

double activation_derivative(Activation a, double z, double post) {
    switch (a) {
        case Activation::Relu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::Tanh: return 1.0 - post * post;
        case Activation::Identity: return 1.0;
    }
    return 1.0;
}

const char* activation_name(Activation a) {
    switch (a) {
        case Activation::Relu: return "relu";
        case Activation::Tanh: return "tanh";
        case Activation::Identity: return "identity";
    }
    return "identity";
}

Activation activation_from_name(const std::string& s) {
    if (s == "relu") return Activation::Relu;
    if (s == "tanh") return Activation::Tanh;
    if (s == "identity") return Activation::Identity;
    throw std::invalid_argument("unknown activation: " + s);
}

}  // namespace

std::size_t MlpParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.data().size() + l.bias.size();
    return n;
}

Gradients Gradients::zeros_like(const MlpParams& p) {
    Gradients g;
    for (const auto& l : p.layers) {
        g.dweight.emplace_back(l.weight.rows(), l.weight.cols());
        g.dbias.emplace_back(l.bias.size(), 0.0);
    }
    return g;
}

void Gradients::accumulate(const Gradients& o, double scale) {
    for (std::size_t l = 0; l < dweight.size(); ++l) {
        auto& w = dweight[l].data();
        const auto& ow = o.dweight[l].data();
        for (std::size_t i = 0; i < w.size(); ++i) w[i] += scale * ow[i];
        for (std::size_t i = 0; i < dbias[l].size(); ++i) dbias[l][i] += scale * o.dbias[l][i];
    }
}

void Gradients::scale(double s) {
    for (auto& w : dweight)
        for (auto& v : w.data()) v *= s;
    for (auto& b : dbias)
        for (auto& v : b) v *= s;
}

bool Gradients::all_finite() const {
    for (const auto& w : dweight)
        if (!w.all_finite()) return false;
    for (const auto& b : dbias)
        for (double v : b)
            if (!std::isfinite(v)) return false;
    return true;
}

MlpParams make_mlp(const std::vector<std::size_t>& dims, Activation hidden_activation,
                   RngStream rng) {
    if (dims.size() < 2) throw std::invalid_argument("make_mlp: need at least one layer");
    MlpParams p;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        MlpLayer layer;
        const std::size_t fan_in = dims[l], fan_out = dims[l + 1];
        const bool last = (l + 2 == dims.size());
        layer.activation = last ? Activation::Identity : hidden_activation;
        layer.weight = Matrix(fan_out, fan_in);
        layer.bias.assign(fan_out, 0.0);
        const double bound = (hidden_activation == Activation::Relu && !last)
                                 ? std::sqrt(6.0 / fan_in)
                                 : std::sqrt(6.0 / (fan_in + fan_out));
        for (auto& v : layer.weight.data()) v = (2.0 * rng.next_double() - 1.0) * bound;
        p.layers.push_back(std::move(layer));
    }
    return p;
}

std::vector<double> mlp_forward(const MlpParams& p, const std::vector<double>& x,
                                ForwardTape* tape) {
    if (p.layers.empty()) throw std::invalid_argument("mlp_forward: empty network");
    if (x.size() != p.input_dim())
        throw std::invalid_argument("mlp_forward: ShapeMismatch (input width " +
                                    std::to_string(x.size()) + " vs " +
                                    std::to_string(p.input_dim()) + ")");
    std::vector<double> a = x;
    if (tape) {
        tape->pre.clear();
        tape->post.clear();
        tape->post.push_back(a);
    }
    for (const auto& layer : p.layers) {
        std::vector<double> z = matvec(layer.weight, a);
        for (std::size_t i = 0; i < z.size(); ++i) z[i] += layer.bias[i];
        a.resize(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) a[i] = apply_activation(layer.activation, z[i]);
        if (tape) {
            tape->pre.push_back(std::move(z));
            tape->post.push_back(a);
        }
    }
    return a;
}

Gradients mlp_backward(const MlpParams& p, const ForwardTape& tape,
                       const std::vector<double>& upstream, std::vector<double>* input_grad) {
    if (tape.pre.size() != p.layers.size())
        throw std::invalid_argument("mlp_backward: ShapeMismatch (tape does not match network)");
    if (upstream.size() != p.output_dim())
        throw std::invalid_argument("mlp_backward: ShapeMismatch (upstream width)");

    Gradients g = Gradients::zeros_like(p);
    std::vector<double> delta = upstream;
    for (std::size_t l = p.layers.size(); l-- > 0;) {
        const MlpLayer& layer = p.layers[l];
        // delta currently holds d/d(post activation of layer l); fold in act'.
        for (std::size_t i = 0; i < delta.size(); ++i)
            delta[i] *= activation_derivative(layer.activation, tape.pre[l][i], tape.post[l + 1][i]);

        const std::vector<double>& a_prev = tape.post[l];
        Matrix& dw = g.dweight[l];
        for (std::size_t i = 0; i < dw.rows(); ++i) {
            const double d = delta[i];
            g.dbias[l][i] = d;
            if (d == 0.0) continue;
            double* row = dw.row(i);
            for (std::size_t j = 0; j < dw.cols(); ++j) row[j] = d * a_prev[j];
        }

        if (l > 0 || input_grad) {
            std::vector<double> prev(layer.weight.cols(), 0.0);
            for (std::size_t i = 0; i < layer.weight.rows(); ++i) {
                const double d = delta[i];
                if (d == 0.0) continue;
                const double* row = layer.weight.row(i);
                for (std::size_t j = 0; j < prev.size(); ++j) prev[j] += d * row[j];
            }
            if (l == 0 && input_grad) *input_grad = prev;
            delta = std::move(prev);
        }
    }
    return g;
}

double bce_with_logits(const std::vector<double>& logits, const std::vector<double>& targets,
                       const std::vector<double>& weights, std::vector<double>& dloss) {
    if (logits.size() != targets.size())
        throw std::invalid_argument("bce_with_logits: length mismatch");
    dloss.assign(logits.size(), 0.0);
    double loss = 0.0;
    for (std::size_t d = 0; d < logits.size(); ++d) {
        const double w = weights.empty() ? 1.0 : weights[d];
        const double s = logits[d], y = targets[d];
        // max(s,0) - s y + log(1 + exp(-|s|)) never evaluates log 0.
        loss += w * (std::max(s, 0.0) - s * y + std::log1p(std::exp(-std::abs(s))));
        const double sigma = (s >= 0.0) ? 1.0 / (1.0 + std::exp(-s))
                                        : std::exp(s) / (1.0 + std::exp(s));
        dloss[d] = w * (sigma - y);
    }
    return loss;
}

PoolResult pool(const Matrix& rows, PoolMode mode) {
    if (rows.rows() == 0 || rows.cols() == 0) throw std::invalid_argument("pool: EmptyInput");
    PoolResult out;
    out.values.assign(rows.cols(), 0.0);
    if (mode == PoolMode::Max) {
        out.argmax.assign(rows.cols(), 0);
        for (std::size_t j = 0; j < rows.cols(); ++j) {
            double best = rows(0, j);
            std::size_t arg = 0;
            for (std::size_t i = 1; i < rows.rows(); ++i)
                if (rows(i, j) > best) {
                    best = rows(i, j);
                    arg = i;
                }
            out.values[j] = best;
            out.argmax[j] = arg;
        }
    } else {
        for (std::size_t i = 0; i < rows.rows(); ++i) {
            const double* r = rows.row(i);
            for (std::size_t j = 0; j < rows.cols(); ++j) out.values[j] += r[j];
        }
        if (mode == PoolMode::Mean)
            for (auto& v : out.values) v /= static_cast<double>(rows.rows());
    }
    return out;
}

OptimizerState OptimizerState::init(const MlpParams& p, double lr, double weight_decay) {
    OptimizerState s;
    s.learning_rate = lr;
    s.weight_decay = weight_decay;
    for (const auto& l : p.layers) {
        s.m_w.emplace_back(l.weight.rows(), l.weight.cols());
        s.v_w.emplace_back(l.weight.rows(), l.weight.cols());
        s.m_b.emplace_back(l.bias.size(), 0.0);
        s.v_b.emplace_back(l.bias.size(), 0.0);
    }
    return s;
}

void optimizer_step(OptimizerState& state, MlpParams& params, const Gradients& grads) {
    if (!grads.all_finite()) throw std::runtime_error("optimizer_step: NonFiniteGradient");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        auto& w = params.layers[l].weight.data();
        auto& mw = state.m_w[l].data();
        auto& vw = state.v_w[l].data();
        const auto& gw = grads.dweight[l].data();
        for (std::size_t i = 0; i < w.size(); ++i) {
            mw[i] = state.beta1 * mw[i] + (1.0 - state.beta1) * gw[i];
            vw[i] = state.beta2 * vw[i] + (1.0 - state.beta2) * gw[i] * gw[i];
            const double mhat = mw[i] / bc1, vhat = vw[i] / bc2;
            w[i] -= state.learning_rate * (mhat / (std::sqrt(vhat) + state.epsilon) +
                                           state.weight_decay * w[i]);
        }
        auto& b = params.layers[l].bias;
        auto& mb = state.m_b[l];
        auto& vb = state.v_b[l];
        const auto& gb = grads.dbias[l];
        for (std::size_t i = 0; i < b.size(); ++i) {
            mb[i] = state.beta1 * mb[i] + (1.0 - state.beta1) * gb[i];
            vb[i] = state.beta2 * vb[i] + (1.0 - state.beta2) * gb[i] * gb[i];
            b[i] -= state.learning_rate * (mb[i] / bc1) / (std::sqrt(vb[i] / bc2) + state.epsilon);
        }
    }
}

void save_mlp(const MlpParams& p, const std::string& path, std::uint64_t seed_tag) {
    nlohmann::ordered_json header;
    header["format"] = "adacanon-mlp-v1";
    header["byte_order"] = "little-endian";
    header["seed_tag"] = seed_tag;
    auto& layers = header["layers"] = nlohmann::ordered_json::array();
    for (const auto& l : p.layers) {
        layers.push_back({{"out", l.weight.rows()},
                          {"in", l.weight.cols()},
                          {"activation", activation_name(l.activation)}});
    }
    const std::string hs = header.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_mlp: cannot open " + path);
    const std::uint32_t hlen = static_cast<std::uint32_t>(hs.size());
    f.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    f.write(hs.data(), hs.size());
    for (const auto& l : p.layers) {
        f.write(reinterpret_cast<const char*>(l.weight.data().data()),
                static_cast<std::streamsize>(l.weight.data().size() * sizeof(double)));
        f.write(reinterpret_cast<const char*>(l.bias.data()),
                static_cast<std::streamsize>(l.bias.size() * sizeof(double)));
    }
}

MlpParams load_mlp(const std::string& path, std::uint64_t* seed_tag) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_mlp: cannot open " + path);
    std::uint32_t hlen = 0;
    f.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string hs(hlen, '\0');
    f.read(hs.data(), hlen);
    const auto header = nlohmann::json::parse(hs);
    if (header.at("format") != "adacanon-mlp-v1")
        throw std::runtime_error("load_mlp: unknown format");
    if (seed_tag) *seed_tag = header.value("seed_tag", std::uint64_t{0});

    MlpParams p;
    for (const auto& lj : header.at("layers")) {
        MlpLayer l;
        const std::size_t out = lj.at("out"), in = lj.at("in");
        l.activation = activation_from_name(lj.at("activation"));
        l.weight = Matrix(out, in);
        l.bias.assign(out, 0.0);
        f.read(reinterpret_cast<char*>(l.weight.data().data()),
               static_cast<std::streamsize>(out * in * sizeof(double)));
        f.read(reinterpret_cast<char*>(l.bias.data()),
               static_cast<std::streamsize>(out * sizeof(double)));
        p.layers.push_back(std::move(l));
    }
    if (!f) throw std::runtime_error("load_mlp: truncated file");
    return p;
}

}  // namespace adacanon
