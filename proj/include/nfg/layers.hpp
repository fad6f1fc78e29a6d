#pragma once

#include <cstdint>
#include <cstdlib>
#include <span>
#include <string>
#include <vector>

#include "nfg/autodiff.hpp"
#include "nfg/errors.hpp"
#include "nfg/rng.hpp"

namespace nfg {

enum class FinalAct : std::uint8_t { None, Softplus, Softmax };

// Architecture of one multi-layer perceptron. widths = [in, h1, ..., out].
// Hidden layers are dense -> tanh -> dropout; the last layer is dense followed
// by final_act, unless activate_final is set, in which case the last layer is
// treated as hidden too (used by the embedding network, whose output is an
// activated representation rather than a prediction head).
struct MlpSpec {
    std::vector<int> widths;
    double dropout = 0.0;  // applied after hidden activations when training
    FinalAct final_act = FinalAct::None;
    bool positive = false;       // squared-weight (monotonic) layers
    bool activate_final = false;

    int input_dim() const { return widths.empty() ? 0 : widths.front(); }
    int output_dim() const { return widths.empty() ? 0 : widths.back(); }
    int layer_count() const { return widths.empty() ? 0 : static_cast<int>(widths.size()) - 1; }
};

// One dense layer; for positive layers `w` holds the raw weights and the
// forward pass squares them on the fly.
struct DenseParams {
    int in = 0;
    int out = 0;
    std::vector<double> w;  // row-major [out][in]
    std::vector<double> b;  // [out]
};

struct MlpParams {
    MlpSpec spec;
    std::vector<DenseParams> layers;

    std::size_t param_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.w.size() + l.b.size();
        return n;
    }
};

// Glorot-uniform dense weights; positive layers draw raw weights in
// (-0.5, 0.5) so the effective squared weights start in [0, 0.25).
// Biases start at zero.
inline MlpParams init_params(const MlpSpec& spec, Rng& rng) {
    if (spec.widths.empty()) throw UsageError("mlp spec needs at least an input width");
    for (int w : spec.widths)
        if (w <= 0) throw UsageError("mlp widths must be positive");
    if (spec.dropout < 0.0 || spec.dropout >= 1.0)
        throw UsageError("dropout rate must be in [0, 1)");
    if (spec.activate_final && spec.final_act != FinalAct::None)
        throw UsageError("activate_final excludes a final activation head");

    MlpParams params;
    params.spec = spec;
    params.layers.reserve(static_cast<std::size_t>(spec.layer_count()));
    for (int l = 0; l < spec.layer_count(); ++l) {
        DenseParams d;
        d.in = spec.widths[static_cast<std::size_t>(l)];
        d.out = spec.widths[static_cast<std::size_t>(l) + 1];
        d.w.resize(static_cast<std::size_t>(d.in) * static_cast<std::size_t>(d.out));
        d.b.assign(static_cast<std::size_t>(d.out), 0.0);
        if (spec.positive) {
            double bound = 0.5;
            if (const char* b_env = std::getenv("NFG_POS_INIT")) bound = std::atof(b_env);
            for (auto& w : d.w) w = rng.uniform(-bound, bound);
        } else {
            const double bound = std::sqrt(6.0 / (d.in + d.out));
            for (auto& w : d.w) w = rng.uniform(-bound, bound);
        }
        params.layers.push_back(std::move(d));
    }
    return params;
}

// ---------------------------------------------------------------------------
// Staged parameters: one scalar object per parameter, in a fixed order.
// For S = Var the scalars are tape leaves (trainable); for S = Dual they are
// plain constants (fast inference path). Both paths run the same forward code.
// ---------------------------------------------------------------------------

template <class S>
struct StagedDense {
    int in = 0;
    int out = 0;
    std::vector<S> w;
    std::vector<S> b;
};

template <class S>
struct StagedMlp {
    MlpSpec spec;
    std::vector<StagedDense<S>> layers;
};

inline StagedMlp<Var> stage(Tape& tape, const MlpParams& params) {
    StagedMlp<Var> staged;
    staged.spec = params.spec;
    staged.layers.reserve(params.layers.size());
    for (const auto& l : params.layers) {
        StagedDense<Var> s;
        s.in = l.in;
        s.out = l.out;
        s.w.reserve(l.w.size());
        s.b.reserve(l.b.size());
        for (double w : l.w) s.w.push_back(tape.scalar(w, 0.0));
        for (double b : l.b) s.b.push_back(tape.scalar(b, 0.0));
        staged.layers.push_back(std::move(s));
    }
    return staged;
}

inline StagedMlp<Dual> stage(const MlpParams& params) {
    StagedMlp<Dual> staged;
    staged.spec = params.spec;
    staged.layers.reserve(params.layers.size());
    for (const auto& l : params.layers) {
        StagedDense<Dual> s;
        s.in = l.in;
        s.out = l.out;
        s.w.reserve(l.w.size());
        s.b.reserve(l.b.size());
        for (double w : l.w) s.w.push_back(Dual{w, 0.0});
        for (double b : l.b) s.b.push_back(Dual{b, 0.0});
        staged.layers.push_back(std::move(s));
    }
    return staged;
}

namespace detail {

// Shared affine kernel; the tape path records one fused dot node per output
// unit, the dual path is straight arithmetic.
template <class S>
std::vector<S> affine_forward(const StagedDense<S>& layer, std::span<const S> input,
                              bool squared_weights, const char* what) {
    if (static_cast<int>(input.size()) != layer.in)
        throw UsageError(std::string(what) + " input length " + std::to_string(input.size()) +
                         " does not match layer input dimension " + std::to_string(layer.in));
    std::vector<S> out;
    out.reserve(static_cast<std::size_t>(layer.out));
    for (int i = 0; i < layer.out; ++i) {
        const std::size_t row = static_cast<std::size_t>(i) * static_cast<std::size_t>(layer.in);
        if constexpr (std::is_same_v<S, Var>) {
            const std::span<const Var> w{layer.w.data() + row, static_cast<std::size_t>(layer.in)};
            out.push_back(layer.b[static_cast<std::size_t>(i)].tape->emit_dot(
                layer.b[static_cast<std::size_t>(i)], w, input, squared_weights));
        } else {
            S acc = layer.b[static_cast<std::size_t>(i)];
            for (int j = 0; j < layer.in; ++j) {
                const S w = layer.w[row + static_cast<std::size_t>(j)];
                acc = acc + (squared_weights ? square(w) : w) * input[static_cast<std::size_t>(j)];
            }
            out.push_back(acc);
        }
    }
    return out;
}

}  // namespace detail

// y = W x + b
template <class S>
std::vector<S> dense_forward(const StagedDense<S>& layer, std::span<const S> input) {
    return detail::affine_forward<S>(layer, input, false, "dense");
}

// y = (W .* W) x + b, the squaring recorded on the scalar path so gradients
// reach the raw weights while every effective weight stays nonnegative.
template <class S>
std::vector<S> positive_dense_forward(const StagedDense<S>& layer, std::span<const S> input) {
    return detail::affine_forward<S>(layer, input, true, "positive dense");
}

template <class S>
std::vector<S> softmax(std::span<const S> logits) {
    // Shifting by the detached max leaves softmax unchanged as a function,
    // so gradients stay exact while exp never overflows.
    double m = value(logits[0]);
    for (const S& z : logits) m = std::max(m, value(z));
    std::vector<S> e;
    e.reserve(logits.size());
    for (const S& z : logits) e.push_back(exp(z - m));
    S total = e[0];
    for (std::size_t i = 1; i < e.size(); ++i) total = total + e[i];
    std::vector<S> out;
    out.reserve(e.size());
    for (const S& x : e) out.push_back(x / total);
    return out;
}

// Full perceptron pass: dense -> tanh -> dropout per hidden layer, then the
// configured head. Dropout is inverted (scale 1/(1-p) at train time), so
// inference needs no rescaling. A zero-depth spec applies the head directly.
template <class S>
std::vector<S> mlp_forward(const StagedMlp<S>& net, std::vector<S> x,
                           bool training = false, Rng* rng = nullptr) {
    const MlpSpec& spec = net.spec;
    const int n_layers = static_cast<int>(net.layers.size());
    const bool drop = training && spec.dropout > 0.0;
    if (drop && rng == nullptr) throw UsageError("training-mode dropout needs an rng");

    for (int l = 0; l < n_layers; ++l) {
        const bool hidden = l + 1 < n_layers || spec.activate_final;
        x = spec.positive ? positive_dense_forward<S>(net.layers[static_cast<std::size_t>(l)], x)
                          : dense_forward<S>(net.layers[static_cast<std::size_t>(l)], x);
        if (!hidden) break;
        for (auto& u : x) u = tanh(u);
        if (drop) {
            const double keep_scale = 1.0 / (1.0 - spec.dropout);
            for (auto& u : x) {
                const bool keep = rng->uniform() >= spec.dropout;
                u = u * (keep ? keep_scale : 0.0);
            }
        }
    }

    switch (spec.final_act) {
        case FinalAct::None:
            break;
        case FinalAct::Softplus:
            for (auto& u : x) u = softplus(u);
            break;
        case FinalAct::Softmax:
            x = softmax<S>(x);
            break;
    }
    return x;
}

}  // namespace nfg
