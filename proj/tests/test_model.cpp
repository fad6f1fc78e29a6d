#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "nfg/checkpoint.hpp"
#include "nfg/model.hpp"
#include "test_support.hpp"

using namespace nfg;
using nfg::testing::as_cause_specific;
using nfg::testing::random_model;
using nfg::testing::random_x;

TEST_CASE("cif at t = 0 is exactly zero, survival exactly one") {
    Rng rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        const auto model = random_model(rng, 4, 2);
        const Predictor pred(model);
        const auto x = random_x(rng, 4);
        const auto eval = pred.cif(x, 0.0);
        for (double f : eval.cif) CHECK(f == 0.0);
        CHECK(eval.survival == 1.0);
    }
}

TEST_CASE("cif saturates to the balancing weights at large t") {
    Rng rng(33);
    const auto model = random_model(rng, 3, 2);
    const Predictor pred(model);
    const auto x = random_x(rng, 3);
    const auto eval = pred.cif(x, 1e7 * model.t_scale);
    // softplus keeps M strictly positive, so exp(-t_hat M) has vanished
    CHECK(eval.survival == doctest::Approx(0.0).epsilon(1e-9));
    const double total = eval.cif[0] + eval.cif[1];
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("negative time is a domain error") {
    Rng rng(34);
    const auto model = random_model(rng, 3, 2);
    const Predictor pred(model);
    const auto x = random_x(rng, 3);
    CHECK_THROWS_AS(pred.cif(x, -0.5), DomainError);
    CHECK_THROWS_AS(pred.cause_specific(x, -0.5), UsageError);  // wrong variant wins
}

TEST_CASE("R = 1 degenerates to the single-risk form 1 - exp(-Lambda)") {
    Rng rng(35);
    for (int trial = 0; trial < 20; ++trial) {
        const auto model = random_model(rng, 3, 1);
        const auto cs = as_cause_specific(model);
        const Predictor pred(model);
        const Predictor pred_cs(cs);
        const auto x = random_x(rng, 3);
        const double t = rng.uniform(0.0, 3.0 * model.t_scale);
        const auto eval = pred.cif(x, t);
        const auto ref = pred_cs.cause_specific(x, t);
        CHECK(eval.cif[0] ==
              doctest::Approx(1.0 - std::exp(-ref.cumulative_hazard[0])).epsilon(1e-12));
    }
}

TEST_CASE("density matches central finite differences in t") {
    Rng rng(36);
    const double h = 1e-5;
    for (int trial = 0; trial < 40; ++trial) {
        const auto model = random_model(rng, 5, 2, trial % 2 == 0 ? Variant::Nfg : Variant::MonoFg);
        const Predictor pred(model);
        const auto x = random_x(rng, 5);
        const double t = rng.uniform(0.05, 1.5) * model.t_scale;
        const auto eval = pred.cif(x, t);
        const auto up = pred.cif(x, t + h);
        const auto dn = pred.cif(x, t - h);
        for (int r = 0; r < 2; ++r) {
            const double fd = (up.cif[static_cast<std::size_t>(r)] - dn.cif[static_cast<std::size_t>(r)]) / (2.0 * h);
            const double got = eval.density[static_cast<std::size_t>(r)];
            const double denom = std::max({std::abs(fd), std::abs(got), 1e-7});
            CHECK(std::abs(fd - got) / denom < 1e-5);
        }
    }
}

TEST_CASE("density at t = 0 equals B_r * M_r(0, x) / t_scale") {
    Rng rng(37);
    const auto model = random_model(rng, 4, 2);
    const Predictor pred(model);
    const auto x = random_x(rng, 4);
    const auto eval = pred.cif(x, 0.0);

    // reconstruct the factors through the staged internals
    const auto staged = stage(model);
    const auto x_std = detail::standardized_covariates<Dual>(model, nullptr, x);
    auto x_vec = x_std;
    const auto embedded = mlp_forward<Dual>(staged.embedding, x_vec);
    const auto mono = monotonic_outputs<Dual>(staged, Dual{0.0, 0.0}, embedded);
    auto emb_copy = embedded;
    const auto weights = mlp_forward<Dual>(staged.balancing, emb_copy);
    for (int r = 0; r < 2; ++r) {
        const double want = weights[static_cast<std::size_t>(r)].v * mono[static_cast<std::size_t>(r)].v / model.t_scale;
        CHECK(eval.density[static_cast<std::size_t>(r)] == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("structural invariants over random models") {
    Rng rng(38);
    for (int trial = 0; trial < 2000; ++trial) {
        const auto variant = trial % 2 == 0 ? Variant::Nfg : Variant::MonoFg;
        const auto model = random_model(rng, 3, 2, variant, 1 + static_cast<int>(rng.below(2)), 6);
        const Predictor pred(model);
        const auto x = random_x(rng, 3);
        const double t = rng.uniform(0.0, 4.0) * model.t_scale;
        const auto eval = pred.cif(x, t);

        double total = 0.0;
        for (double f : eval.cif) {
            CHECK(f >= 0.0);
            CHECK(f <= 1.0 + 1e-12);
            total += f;
        }
        CHECK(total <= 1.0 + 1e-12);
        CHECK(eval.survival == doctest::Approx(1.0 - total).epsilon(1e-12));
        for (double d : eval.density) CHECK(d >= 0.0);
    }
}

TEST_CASE("cif is nondecreasing in t") {
    Rng rng(39);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto model = random_model(rng, 3, 2, trial % 2 == 0 ? Variant::Nfg : Variant::MonoFg, 1, 5);
        const Predictor pred(model);
        const auto x = random_x(rng, 3);
        double t1 = rng.uniform(0.0, 3.0) * model.t_scale;
        double t2 = rng.uniform(0.0, 3.0) * model.t_scale;
        if (t1 > t2) std::swap(t1, t2);
        const auto lo = pred.cif(x, t1);
        const auto hi = pred.cif(x, t2);
        for (int r = 0; r < 2; ++r)
            CHECK(lo.cif[static_cast<std::size_t>(r)] <= hi.cif[static_cast<std::size_t>(r)] + 1e-12);
    }
}

TEST_CASE("sub-distribution hazard identity and saturation") {
    Rng rng(40);
    const auto model = random_model(rng, 3, 2);
    const Predictor pred(model);
    const auto x = random_x(rng, 3);
    const double t = 0.8 * model.t_scale;
    const auto eval = pred.cif(x, t);
    const auto h = pred.sub_hazard(x, t);
    for (int r = 0; r < 2; ++r)
        CHECK(h[static_cast<std::size_t>(r)] * (1.0 - eval.cif[static_cast<std::size_t>(r)]) ==
              doctest::Approx(eval.density[static_cast<std::size_t>(r)]).epsilon(1e-12));

    // at t = 0, F_r = 0, so h_r equals the density
    const auto h0 = pred.sub_hazard(x, 0.0);
    const auto e0 = pred.cif(x, 0.0);
    for (int r = 0; r < 2; ++r)
        CHECK(h0[static_cast<std::size_t>(r)] == doctest::Approx(e0.density[static_cast<std::size_t>(r)]));

    // R = 1 saturates F -> 1 at large t, where the sub-hazard is undefined
    const auto single = random_model(rng, 3, 1);
    const Predictor pred1(single);
    CHECK_THROWS_AS(pred1.sub_hazard(x, 1e9 * single.t_scale), SaturationError);
}

TEST_CASE("cause-specific evaluation") {
    Rng rng(41);
    const auto model = random_model(rng, 4, 2, Variant::CauseSpecific);
    const Predictor pred(model);
    const auto x = random_x(rng, 4);

    const auto at_zero = pred.cause_specific(x, 0.0);
    for (int r = 0; r < 2; ++r) {
        CHECK(at_zero.cumulative_hazard[static_cast<std::size_t>(r)] == 0.0);
        CHECK(at_zero.survival[static_cast<std::size_t>(r)] == 1.0);
    }

    const double h = 1e-5;
    for (int trial = 0; trial < 30; ++trial) {
        const double t = rng.uniform(0.05, 2.0) * model.t_scale;
        const auto eval = pred.cause_specific(x, t);
        const auto up = pred.cause_specific(x, t + h);
        const auto dn = pred.cause_specific(x, t - h);
        for (int r = 0; r < 2; ++r) {
            const double fd = (up.cumulative_hazard[static_cast<std::size_t>(r)] -
                               dn.cumulative_hazard[static_cast<std::size_t>(r)]) /
                              (2.0 * h);
            const double got = eval.hazard[static_cast<std::size_t>(r)];
            const double denom = std::max({std::abs(fd), std::abs(got), 1e-7});
            CHECK(std::abs(fd - got) / denom < 1e-5);
        }
    }

    // nondecreasing cumulative hazard
    for (int trial = 0; trial < 200; ++trial) {
        double t1 = rng.uniform(0.0, 3.0);
        double t2 = rng.uniform(0.0, 3.0);
        if (t1 > t2) std::swap(t1, t2);
        const auto lo = pred.cause_specific(x, t1);
        const auto hi = pred.cause_specific(x, t2);
        for (int r = 0; r < 2; ++r)
            CHECK(lo.cumulative_hazard[static_cast<std::size_t>(r)] <=
                  hi.cumulative_hazard[static_cast<std::size_t>(r)] + 1e-12);
    }

    // wrong variant
    const auto nfg_model = random_model(rng, 4, 2, Variant::Nfg);
    CHECK_THROWS_AS(Predictor(nfg_model).cause_specific(x, 1.0), UsageError);
}

TEST_CASE("monofg exposes the same interface surface") {
    Rng rng(42);
    const auto model = random_model(rng, 4, 3, Variant::MonoFg);
    CHECK(model.monotonic.size() == 1);
    CHECK(model.monotonic[0].spec.output_dim() == 3);
    const Predictor pred(model);
    const auto x = random_x(rng, 4);
    const auto eval = pred.cif(x, 0.7 * model.t_scale);
    CHECK(eval.cif.size() == 3);
    CHECK(eval.density.size() == 3);
    double total = 0.0;
    for (double f : eval.cif) total += f;
    CHECK(eval.survival == doctest::Approx(1.0 - total).epsilon(1e-12));
}

TEST_CASE("init_model is deterministic given the seed") {
    NfgConfig cfg;
    cfg.n_features = 5;
    cfg.n_risks = 2;
    Rng r1(7);
    Rng r2(7);
    const auto a = flatten_parameters(init_model(cfg, r1));
    const auto b = flatten_parameters(init_model(cfg, r2));
    CHECK(a == b);
}

TEST_CASE("checkpoint round trip is bit-exact") {
    Rng rng(43);
    auto model = random_model(rng, 6, 2);
    model.feat_mean = {0.1, -0.2, 0.3, 0.0, 1.5, -2.0};
    model.feat_std = {1.0, 2.0, 0.5, 1.1, 0.9, 3.0};
    model.feature_names = {"a", "b", "c", "d", "e", "f"};
    model.t_scale = 7.25;

    const std::string path_a = "checkpoint_roundtrip_a.nfg";
    const std::string path_b = "checkpoint_roundtrip_b.nfg";
    checkpoint_save(model, path_a);
    const auto loaded = checkpoint_load(path_a);
    checkpoint_save(loaded, path_b);

    std::ifstream fa(path_a, std::ios::binary);
    std::ifstream fb(path_b, std::ios::binary);
    const std::string bytes_a((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    const std::string bytes_b((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(bytes_a == bytes_b);
    CHECK(flatten_parameters(model) == flatten_parameters(loaded));
    CHECK(loaded.t_scale == model.t_scale);
    CHECK(loaded.feat_mean == model.feat_mean);
    CHECK(loaded.feature_names == model.feature_names);
    std::remove(path_a.c_str());
    std::remove(path_b.c_str());
}

TEST_CASE("checkpoint rejects mismatched risk count and unknown version") {
    Rng rng(44);
    const auto model = random_model(rng, 3, 2);
    const std::string path = "checkpoint_tamper.nfg";
    checkpoint_save(model, path);

    // corrupt the declared risk count (offset: magic 4 + version 4 + variant 1 + n_features 4)
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(4 + 4 + 1 + 4);
        const std::uint32_t bad_risks = 5;
        f.write(reinterpret_cast<const char*>(&bad_risks), 4);
    }
    CHECK_THROWS_AS(checkpoint_load(path), ParseError);

    checkpoint_save(model, path);
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(4);
        const std::uint32_t bad_version = 99;
        f.write(reinterpret_cast<const char*>(&bad_version), 4);
    }
    try {
        checkpoint_load(path);
        CHECK(false);
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("version") != std::string::npos);
    }
    std::remove(path.c_str());
}

TEST_CASE("mismatched covariate length is a usage error") {
    Rng rng(45);
    const auto model = random_model(rng, 4, 2);
    const Predictor pred(model);
    const std::vector<double> short_x{1.0, 2.0};
    CHECK_THROWS_AS(pred.cif(short_x, 1.0), UsageError);
}
