#pragma once

#include <algorithm>
#include <cstdlib>
#include <span>
#include <string>
#include <vector>

#include "nfg/data.hpp"
#include "nfg/layers.hpp"

namespace nfg {

enum class Variant : std::uint8_t { Nfg, MonoFg, CauseSpecific };

inline const char* variant_name(Variant v) {
    switch (v) {
        case Variant::Nfg: return "nfg";
        case Variant::MonoFg: return "monofg";
        case Variant::CauseSpecific: return "cause-specific";
    }
    return "?";
}

struct NfgConfig {
    int n_features = 0;
    int n_risks = 1;
    Variant variant = Variant::Nfg;
    int layers = 2;       // hidden layers per sub-network
    int nodes = 25;       // hidden width
    double dropout = 0.0; // embedding network only
};

// Competing-risks model: an embedding E, per-risk positive monotonic networks
// M_r over (t/t_scale, E(x)), and for the nfg/monofg variants a balancing
// network B with a softmax head:
//   F_r(t|x) = B(E(x))_r * (1 - exp(-(t/t_scale) * M_r(t/t_scale, E(x))))
// The monofg variant uses one monotonic network with R outputs; the
// cause-specific variant drops B and reads M_r as cumulative hazards
// Lambda_r = (t/t_scale) * M_r.
struct NfgModel {
    Variant variant = Variant::Nfg;
    int n_features = 0;
    int n_risks = 1;
    double t_scale = 1.0;  // max training event time
    std::vector<double> feat_mean;
    std::vector<double> feat_std;
    std::vector<std::string> feature_names;
    MlpParams embedding;
    std::vector<MlpParams> monotonic;
    MlpParams balancing;  // unused for cause-specific

    int embed_dim() const { return embedding.spec.output_dim(); }
    bool has_balancing() const { return variant != Variant::CauseSpecific; }

    std::size_t param_count() const {
        std::size_t c = embedding.param_count();
        for (const auto& m : monotonic) c += m.param_count();
        if (has_balancing()) c += balancing.param_count();
        return c;
    }
};

inline NfgModel init_model(const NfgConfig& cfg, Rng& rng) {
    if (cfg.n_features < 1) throw UsageError("model needs at least one covariate");
    if (cfg.n_risks < 1) throw UsageError("model needs at least one risk");
    if (cfg.layers < 1) throw UsageError("model needs at least one hidden layer");

    NfgModel model;
    model.variant = cfg.variant;
    model.n_features = cfg.n_features;
    model.n_risks = cfg.n_risks;
    model.feat_mean.assign(static_cast<std::size_t>(cfg.n_features), 0.0);
    model.feat_std.assign(static_cast<std::size_t>(cfg.n_features), 1.0);

    MlpSpec embed;
    embed.widths.push_back(cfg.n_features);
    for (int l = 0; l < cfg.layers; ++l) embed.widths.push_back(cfg.nodes);
    embed.dropout = cfg.dropout;
    embed.activate_final = std::getenv("NFG_EMBED_TANH") != nullptr;
    model.embedding = init_params(embed, rng);

    const int e_dim = embed.widths.back();
    const int mono_nets = cfg.variant == Variant::MonoFg ? 1 : cfg.n_risks;
    const int mono_out = cfg.variant == Variant::MonoFg ? cfg.n_risks : 1;
    for (int r = 0; r < mono_nets; ++r) {
        MlpSpec mono;
        mono.widths.push_back(1 + e_dim);
        for (int l = 0; l < cfg.layers; ++l) mono.widths.push_back(cfg.nodes);
        mono.widths.push_back(mono_out);
        mono.positive = true;
        mono.final_act = FinalAct::Softplus;
        model.monotonic.push_back(init_params(mono, rng));
    }

    if (cfg.variant != Variant::CauseSpecific) {
        MlpSpec bal;
        bal.widths.push_back(e_dim);
        for (int l = 0; l < cfg.layers; ++l) bal.widths.push_back(cfg.nodes);
        bal.widths.push_back(cfg.n_risks);
        bal.final_act = FinalAct::Softmax;
        model.balancing = init_params(bal, rng);
    }
    return model;
}

// Records training-cohort statistics on the model: z-score standardization and
// the time normalization t_scale = max observed event time.
inline void fit_normalization(NfgModel& model, const SurvivalDataset& data, std::span<const int> rows) {
    if (data.p != model.n_features)
        throw UsageError("dataset has " + std::to_string(data.p) + " features, model expects " +
                         std::to_string(model.n_features));
    const auto st = standardize(data, rows);
    model.feat_mean = st.mean;
    model.feat_std = st.stddev;
    model.feature_names = data.feature_names;
    double max_event_time = 0.0;
    for (int r : rows)
        if (data.events[static_cast<std::size_t>(r)] != 0)
            max_event_time = std::max(max_event_time, data.times[static_cast<std::size_t>(r)]);
    if (max_event_time <= 0.0) {
        // all-censored training data: fall back to the max follow-up time
        for (int r : rows) max_event_time = std::max(max_event_time, data.times[static_cast<std::size_t>(r)]);
    }
    if (const char* q_env = std::getenv("NFG_TSCALE_Q")) {
        std::vector<double> ev;
        for (int r : rows)
            if (data.events[static_cast<std::size_t>(r)] != 0) ev.push_back(data.times[static_cast<std::size_t>(r)]);
        if (!ev.empty()) {
            std::sort(ev.begin(), ev.end());
            const double q = std::atof(q_env);
            max_event_time = ev[static_cast<std::size_t>(q * (ev.size() - 1))];
        }
    }
    model.t_scale = max_event_time > 0.0 ? max_event_time : 1.0;
}

// Lists every parameter in the canonical (staging) order. The pointers stay
// valid while the model object is alive and its layer vectors are not resized.
inline std::vector<double*> parameter_pointers(NfgModel& model) {
    std::vector<double*> out;
    out.reserve(model.param_count());
    auto add = [&](MlpParams& mlp) {
        for (auto& layer : mlp.layers) {
            for (auto& w : layer.w) out.push_back(&w);
            for (auto& b : layer.b) out.push_back(&b);
        }
    };
    add(model.embedding);
    for (auto& m : model.monotonic) add(m);
    if (model.has_balancing()) add(model.balancing);
    return out;
}

inline std::vector<double> flatten_parameters(const NfgModel& model) {
    std::vector<double> out;
    out.reserve(model.param_count());
    auto add = [&](const MlpParams& mlp) {
        for (const auto& layer : mlp.layers) {
            out.insert(out.end(), layer.w.begin(), layer.w.end());
            out.insert(out.end(), layer.b.begin(), layer.b.end());
        }
    };
    add(model.embedding);
    for (const auto& m : model.monotonic) add(m);
    if (model.has_balancing()) add(model.balancing);
    return out;
}

inline void load_parameters(NfgModel& model, std::span<const double> flat) {
    auto ptrs = parameter_pointers(model);
    if (flat.size() != ptrs.size()) throw UsageError("flat parameter vector has the wrong length");
    for (std::size_t i = 0; i < ptrs.size(); ++i) *ptrs[i] = flat[i];
}

// ---------------------------------------------------------------------------
// Staged evaluation (shared by the tape training path and the dual-number
// inference path)
// ---------------------------------------------------------------------------

template <class S>
struct StagedModel {
    const NfgModel* model = nullptr;
    StagedMlp<S> embedding;
    std::vector<StagedMlp<S>> monotonic;
    StagedMlp<S> balancing;
};

inline StagedModel<Var> stage(Tape& tape, const NfgModel& model) {
    StagedModel<Var> staged;
    staged.model = &model;
    staged.embedding = stage(tape, model.embedding);
    for (const auto& m : model.monotonic) staged.monotonic.push_back(stage(tape, m));
    if (model.has_balancing()) staged.balancing = stage(tape, model.balancing);
    return staged;
}

inline StagedModel<Dual> stage(const NfgModel& model) {
    StagedModel<Dual> staged;
    staged.model = &model;
    staged.embedding = stage(model.embedding);
    for (const auto& m : model.monotonic) staged.monotonic.push_back(stage(m));
    if (model.has_balancing()) staged.balancing = stage(model.balancing);
    return staged;
}

// After backward(), reads the gradient for every parameter in staging order.
inline std::vector<double> collect_gradient(const StagedModel<Var>& staged, const Gradient& grad) {
    std::vector<double> out;
    auto add = [&](const StagedMlp<Var>& mlp) {
        for (const auto& layer : mlp.layers) {
            for (Var w : layer.w) out.push_back(grad[w]);
            for (Var b : layer.b) out.push_back(grad[b]);
        }
    };
    add(staged.embedding);
    for (const auto& m : staged.monotonic) add(m);
    if (staged.model->has_balancing()) add(staged.balancing);
    return out;
}

namespace detail {

inline Var make_input(Tape& tape, double v) { return tape.constant(v); }
inline Var make_time(Tape& tape, double t) { return tape.time_input(t); }

template <class S>
std::vector<S> standardized_covariates(const NfgModel& model, Tape* tape, std::span<const double> x) {
    if (static_cast<int>(x.size()) != model.n_features)
        throw UsageError("covariate vector has " + std::to_string(x.size()) +
                         " entries, model expects " + std::to_string(model.n_features));
    std::vector<S> out;
    out.reserve(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double z = (x[j] - model.feat_mean[j]) / model.feat_std[j];
        if constexpr (std::is_same_v<S, Var>)
            out.push_back(tape->constant(z));
        else
            out.push_back(Dual{z, 0.0});
    }
    return out;
}

}  // namespace detail

// M_r(t_hat, x_embedded) for every risk; handles the single-network (monofg)
// layout transparently.
template <class S>
std::vector<S> monotonic_outputs(const StagedModel<S>& staged, const S& t_hat,
                                 std::span<const S> embedded) {
    std::vector<S> joint;
    joint.reserve(1 + embedded.size());
    joint.push_back(t_hat);
    joint.insert(joint.end(), embedded.begin(), embedded.end());

    std::vector<S> out;
    if (staged.model->variant == Variant::MonoFg) {
        out = mlp_forward<S>(staged.monotonic[0], joint);
    } else {
        out.reserve(staged.monotonic.size());
        for (const auto& net : staged.monotonic)
            out.push_back(mlp_forward<S>(net, joint)[0]);
    }
    return out;
}

template <class S>
struct CifTerms {
    std::vector<S> cif;   // F_r(t|x), tangent channel carries dF_r/dt
    S survival;           // 1 - sum_r F_r
};

// Full forward pass of the nfg/monofg variants.
template <class S>
CifTerms<S> cif_terms(const StagedModel<S>& staged, std::span<const S> x_std, const S& t_input,
                      bool training = false, Rng* rng = nullptr) {
    const NfgModel& model = *staged.model;
    if (model.variant == Variant::CauseSpecific)
        throw UsageError("cif is undefined for the cause-specific variant; use cause_specific_eval");

    std::vector<S> x_vec(x_std.begin(), x_std.end());
    const auto embedded = mlp_forward<S>(staged.embedding, std::move(x_vec), training, rng);
    const S t_hat = t_input * (1.0 / model.t_scale);
    const auto mono = monotonic_outputs<S>(staged, t_hat, embedded);
    const auto weights = mlp_forward<S>(staged.balancing, embedded, training, rng);

    CifTerms<S> terms;
    terms.cif.reserve(mono.size());
    for (std::size_t r = 0; r < mono.size(); ++r)
        terms.cif.push_back(weights[r] * (1.0 - exp(-(t_hat * mono[r]))));
    S total = terms.cif[0];
    for (std::size_t r = 1; r < terms.cif.size(); ++r) total = total + terms.cif[r];
    terms.survival = 1.0 - total;
    return terms;
}

// Cause-specific forward pass: cumulative hazards Lambda_r = t_hat * M_r.
template <class S>
std::vector<S> cumulative_hazard_terms(const StagedModel<S>& staged, std::span<const S> x_std,
                                       const S& t_input, bool training = false, Rng* rng = nullptr) {
    const NfgModel& model = *staged.model;
    if (model.variant != Variant::CauseSpecific)
        throw UsageError("cumulative hazards are defined for the cause-specific variant only");
    std::vector<S> x_vec(x_std.begin(), x_std.end());
    const auto embedded = mlp_forward<S>(staged.embedding, std::move(x_vec), training, rng);
    const S t_hat = t_input * (1.0 / model.t_scale);
    const auto mono = monotonic_outputs<S>(staged, t_hat, embedded);
    std::vector<S> out;
    out.reserve(mono.size());
    for (const auto& m : mono) out.push_back(t_hat * m);
    return out;
}

// ---------------------------------------------------------------------------
// Public evaluation API (dual-number path, no tape)
// ---------------------------------------------------------------------------

struct CifEvaluation {
    std::vector<double> cif;      // F_r(t|x)
    std::vector<double> density;  // dF_r/dt (exact, from the tangent channel)
    double survival = 1.0;
};

struct CauseSpecificEval {
    std::vector<double> cumulative_hazard;  // Lambda_r(t|x)
    std::vector<double> hazard;             // lambda_r(t|x)
    std::vector<double> survival;           // exp(-Lambda_r)
};

// Stages the parameters once; cheap to evaluate many (x, t) pairs.
class Predictor {
public:
    explicit Predictor(const NfgModel& model) : model_(&model), staged_(stage(model)) {}

    const NfgModel& model() const { return *model_; }

    CifEvaluation cif(std::span<const double> x, double t) const {
        if (t < 0.0) throw DomainError("cif", t);
        const auto x_std = detail::standardized_covariates<Dual>(*model_, nullptr, x);
        const auto terms = cif_terms<Dual>(staged_, x_std, Dual{t, 1.0});
        CifEvaluation eval;
        eval.cif.reserve(terms.cif.size());
        eval.density.reserve(terms.cif.size());
        for (const auto& f : terms.cif) {
            eval.cif.push_back(f.v);
            eval.density.push_back(f.d);
        }
        eval.survival = terms.survival.v;
        return eval;
    }

    std::vector<double> sub_hazard(std::span<const double> x, double t) const {
        const auto eval = cif(x, t);
        std::vector<double> out(eval.cif.size());
        for (std::size_t r = 0; r < eval.cif.size(); ++r) {
            if (eval.cif[r] >= 1.0 - 1e-12)
                throw SaturationError("cif for risk " + std::to_string(r + 1) +
                                      " reached 1; sub-distribution hazard is undefined");
            out[r] = eval.density[r] / (1.0 - eval.cif[r]);
        }
        return out;
    }

    CauseSpecificEval cause_specific(std::span<const double> x, double t) const {
        if (t < 0.0) throw DomainError("cause_specific_eval", t);
        const auto x_std = detail::standardized_covariates<Dual>(*model_, nullptr, x);
        const auto lam = cumulative_hazard_terms<Dual>(staged_, x_std, Dual{t, 1.0});
        CauseSpecificEval eval;
        for (const auto& L : lam) {
            eval.cumulative_hazard.push_back(L.v);
            eval.hazard.push_back(L.d);
            eval.survival.push_back(std::exp(-L.v));
        }
        return eval;
    }

    // Horizon risk used by metrics and reclassification: F_r for nfg/monofg,
    // 1 - exp(-Lambda_r) for the non-competing (cause-specific) variant.
    double risk_score(std::span<const double> x, double t, int risk) const {
        if (risk < 1 || risk > model_->n_risks) throw UsageError("risk index out of range");
        if (model_->variant == Variant::CauseSpecific) {
            const auto eval = cause_specific(x, t);
            return 1.0 - eval.survival[static_cast<std::size_t>(risk - 1)];
        }
        return cif(x, t).cif[static_cast<std::size_t>(risk - 1)];
    }

private:
    const NfgModel* model_;
    StagedModel<Dual> staged_;
};

inline CifEvaluation cif(const NfgModel& model, std::span<const double> x, double t) {
    return Predictor(model).cif(x, t);
}

inline CifEvaluation cif_derivative(const NfgModel& model, std::span<const double> x, double t) {
    return Predictor(model).cif(x, t);
}

inline std::vector<double> sub_hazard(const NfgModel& model, std::span<const double> x, double t) {
    return Predictor(model).sub_hazard(x, t);
}

inline CauseSpecificEval cause_specific_eval(const NfgModel& model, std::span<const double> x, double t) {
    return Predictor(model).cause_specific(x, t);
}

}  // namespace nfg
