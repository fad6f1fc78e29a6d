#pragma once

// Shared helpers for the test suites.

#include <vector>

#include "nfg/model.hpp"
#include "nfg/rng.hpp"

namespace nfg::testing {

inline NfgModel random_model(Rng& rng, int p, int risks, Variant variant = Variant::Nfg,
                             int layers = 2, int nodes = 8, double t_scale = 2.0) {
    NfgConfig cfg;
    cfg.n_features = p;
    cfg.n_risks = risks;
    cfg.variant = variant;
    cfg.layers = layers;
    cfg.nodes = nodes;
    NfgModel model = init_model(cfg, rng);
    model.t_scale = t_scale;
    // widen the raw weights beyond the init range so tests cover saturated nets
    auto widen = [&rng](MlpParams& mlp, double lo, double hi) {
        for (auto& layer : mlp.layers)
            for (auto& w : layer.w) w = rng.uniform(lo, hi);
    };
    widen(model.embedding, -1.0, 1.0);
    for (auto& m : model.monotonic) widen(m, -1.0, 1.0);
    if (model.has_balancing()) widen(model.balancing, -1.0, 1.0);
    return model;
}

inline std::vector<double> random_x(Rng& rng, int p) {
    std::vector<double> x(static_cast<std::size_t>(p));
    for (auto& v : x) v = rng.normal();
    return x;
}

// Same embedding and monotonic parameters, no balancing network: for R = 1
// this realizes the identity F_1 = 1 - exp(-Lambda_1).
inline NfgModel as_cause_specific(const NfgModel& model) {
    NfgModel out = model;
    out.variant = Variant::CauseSpecific;
    out.balancing = MlpParams{};
    return out;
}

}  // namespace nfg::testing
