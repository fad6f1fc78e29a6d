#pragma once

#include <numeric>
#include <span>
#include <vector>

#include "nfg/data.hpp"
#include "nfg/model.hpp"

namespace nfg {

// Floor applied to log arguments inside the losses only; the generic log op
// stays unguarded. Floored terms are counted, not hidden.
inline constexpr double kLogFloor = 1e-10;

struct LossBreakdown {
    double total_nll = 0.0;
    double event_term = 0.0;   // -sum log density (or log hazard) at events
    double censor_term = 0.0;  // -sum log survival (or cumulative hazard mass)
    int count_events = 0;
    int count_censored = 0;
    int floored_terms = 0;
    Var loss{};  // set on the tape path; backward() gives exact gradients
};

namespace detail {

inline Var floored_log(Var v, int& floored) {
    if (value(v) < kLogFloor) {
        ++floored;
        return log(v.tape->constant(kLogFloor));
    }
    return log(v);
}

inline Dual floored_log(Dual v, int& floored) {
    if (v.v < kLogFloor) {
        ++floored;
        return Dual{std::log(kLogFloor), 0.0};
    }
    return log(v);
}

template <class S>
S make_time(Tape* tape, double t) {
    if constexpr (std::is_same_v<S, Var>)
        return tape->time_input(t);
    else
        return Dual{t, 1.0};
}

struct BatchView {
    const SurvivalDataset* data;
    std::span<const int> rows;

    int size() const { return static_cast<int>(rows.size()); }
    int row(int i) const { return rows[static_cast<std::size_t>(i)]; }
};

inline void check_batch(const NfgModel& model, const BatchView& batch) {
    if (batch.rows.empty()) throw UsageError("empty batch");
    for (int i = 0; i < batch.size(); ++i) {
        const int r = batch.row(i);
        const int d = batch.data->events[static_cast<std::size_t>(r)];
        if (d < 0 || d > model.n_risks)
            throw UsageError("event label " + std::to_string(d) + " outside [0, " +
                             std::to_string(model.n_risks) + "]");
        if (batch.data->times[static_cast<std::size_t>(r)] < 0.0)
            throw UsageError("negative time in batch");
    }
}

// NLL of Eq.-4 form: -sum_{d_i=r} log dF_r/dt (t_i) - sum_{d_i=0} log S(t_i).
template <class S>
S competing_nll_core(const StagedModel<S>& staged, const BatchView& batch, bool training,
                     Rng* rng, Tape* tape, LossBreakdown& breakdown) {
    const NfgModel& model = *staged.model;
    bool first = true;
    S total{};
    for (int i = 0; i < batch.size(); ++i) {
        const int row = batch.row(i);
        const double t = batch.data->times[static_cast<std::size_t>(row)];
        const int d = batch.data->events[static_cast<std::size_t>(row)];
        const auto x_std = detail::standardized_covariates<S>(model, tape, batch.data->row(row));
        const auto terms = cif_terms<S>(staged, x_std, make_time<S>(tape, t), training, rng);

        S contribution{};
        if (d == 0) {
            contribution = -floored_log(terms.survival, breakdown.floored_terms);
            breakdown.censor_term += value(contribution);
            ++breakdown.count_censored;
        } else {
            const S density = tangent_of(terms.cif[static_cast<std::size_t>(d - 1)]);
            contribution = -floored_log(density, breakdown.floored_terms);
            breakdown.event_term += value(contribution);
            ++breakdown.count_events;
        }
        total = first ? contribution : total + contribution;
        first = false;
    }
    breakdown.total_nll = value(total);
    return total;
}

// Cause-specific sum: each risk is fit as a single-risk model on the shared
// embedding, all other outcomes acting as censoring:
//   nll = -sum_r [ sum_{d_i=r} log lambda_r(t_i) - sum_i Lambda_r(t_i) ]
template <class S>
S cause_specific_nll_core(const StagedModel<S>& staged, const BatchView& batch, bool training,
                          Rng* rng, Tape* tape, LossBreakdown& breakdown) {
    const NfgModel& model = *staged.model;
    bool first = true;
    S total{};
    for (int i = 0; i < batch.size(); ++i) {
        const int row = batch.row(i);
        const double t = batch.data->times[static_cast<std::size_t>(row)];
        const int d = batch.data->events[static_cast<std::size_t>(row)];
        const auto x_std = detail::standardized_covariates<S>(model, tape, batch.data->row(row));
        const auto lambdas = cumulative_hazard_terms<S>(staged, x_std, make_time<S>(tape, t), training, rng);

        S contribution{};
        bool inner_first = true;
        for (std::size_t r = 0; r < lambdas.size(); ++r) {
            contribution = inner_first ? lambdas[r] : contribution + lambdas[r];
            inner_first = false;
            breakdown.censor_term += value(lambdas[r]);
        }
        if (d != 0) {
            const S hazard = tangent_of(lambdas[static_cast<std::size_t>(d - 1)]);
            const S log_hazard = floored_log(hazard, breakdown.floored_terms);
            contribution = contribution - log_hazard;
            breakdown.event_term -= value(log_hazard);
            ++breakdown.count_events;
        } else {
            ++breakdown.count_censored;
        }
        total = first ? contribution : total + contribution;
        first = false;
    }
    breakdown.total_nll = value(total);
    return total;
}

}  // namespace detail

// --- tape path (training; breakdown.loss supports backward) -----------------

inline LossBreakdown competing_nll(Tape& tape, const StagedModel<Var>& staged,
                                   const SurvivalDataset& data, std::span<const int> rows,
                                   bool training = false, Rng* rng = nullptr) {
    detail::BatchView batch{&data, rows};
    detail::check_batch(*staged.model, batch);
    LossBreakdown breakdown;
    breakdown.loss = detail::competing_nll_core<Var>(staged, batch, training, rng, &tape, breakdown);
    return breakdown;
}

inline LossBreakdown cause_specific_nll(Tape& tape, const StagedModel<Var>& staged,
                                        const SurvivalDataset& data, std::span<const int> rows,
                                        bool training = false, Rng* rng = nullptr) {
    detail::BatchView batch{&data, rows};
    detail::check_batch(*staged.model, batch);
    LossBreakdown breakdown;
    breakdown.loss =
        detail::cause_specific_nll_core<Var>(staged, batch, training, rng, &tape, breakdown);
    return breakdown;
}

// Single-risk form of Eq. 1 (log lambda terms minus cumulative hazard mass);
// identical to the cause-specific sum when R = 1.
inline LossBreakdown single_risk_nll(Tape& tape, const StagedModel<Var>& staged,
                                     const SurvivalDataset& data, std::span<const int> rows,
                                     bool training = false, Rng* rng = nullptr) {
    if (staged.model->n_risks != 1)
        throw UsageError("single_risk_nll expects a one-risk model");
    return cause_specific_nll(tape, staged, data, rows, training, rng);
}

// --- value path (no tape; used for validation and reporting) ----------------

inline LossBreakdown competing_nll_value(const NfgModel& model, const SurvivalDataset& data,
                                         std::span<const int> rows) {
    detail::BatchView batch{&data, rows};
    detail::check_batch(model, batch);
    LossBreakdown breakdown;
    const auto staged = stage(model);
    detail::competing_nll_core<Dual>(staged, batch, false, nullptr, nullptr, breakdown);
    return breakdown;
}

inline LossBreakdown cause_specific_nll_value(const NfgModel& model, const SurvivalDataset& data,
                                              std::span<const int> rows) {
    detail::BatchView batch{&data, rows};
    detail::check_batch(model, batch);
    LossBreakdown breakdown;
    const auto staged = stage(model);
    detail::cause_specific_nll_core<Dual>(staged, batch, false, nullptr, nullptr, breakdown);
    return breakdown;
}

inline LossBreakdown single_risk_nll_value(const NfgModel& model, const SurvivalDataset& data,
                                           std::span<const int> rows) {
    if (model.n_risks != 1) throw UsageError("single_risk_nll expects a one-risk model");
    return cause_specific_nll_value(model, data, rows);
}

// Dispatch on the model variant: the loss each variant trains with.
inline LossBreakdown training_nll(Tape& tape, const StagedModel<Var>& staged,
                                  const SurvivalDataset& data, std::span<const int> rows,
                                  bool training, Rng* rng) {
    return staged.model->variant == Variant::CauseSpecific
               ? cause_specific_nll(tape, staged, data, rows, training, rng)
               : competing_nll(tape, staged, data, rows, training, rng);
}

inline LossBreakdown training_nll_value(const NfgModel& model, const SurvivalDataset& data,
                                        std::span<const int> rows) {
    return model.variant == Variant::CauseSpecific
               ? cause_specific_nll_value(model, data, rows)
               : competing_nll_value(model, data, rows);
}

}  // namespace nfg
