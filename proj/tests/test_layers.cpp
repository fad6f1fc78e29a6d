#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "nfg/layers.hpp"

using namespace nfg;

namespace {

MlpParams manual_dense(int in, int out, std::vector<double> w, std::vector<double> b) {
    MlpParams p;
    p.spec.widths = {in, out};
    p.layers.push_back(DenseParams{in, out, std::move(w), std::move(b)});
    return p;
}

}  // namespace

TEST_CASE("dense forward: identity, affine, bias-only") {
    Tape tape;

    auto ident = manual_dense(2, 2, {1, 0, 0, 1}, {0, 0});
    auto staged = stage(tape, ident);
    std::vector<Var> in = {tape.constant(1.0), tape.constant(2.0)};
    auto out = dense_forward<Var>(staged.layers[0], in);
    CHECK(out[0].value() == 1.0);
    CHECK(out[1].value() == 2.0);

    auto affine = manual_dense(2, 1, {1, 1}, {0.5});
    auto staged2 = stage(tape, affine);
    std::vector<Var> in2 = {tape.constant(2.0), tape.constant(3.0)};
    auto out2 = dense_forward<Var>(staged2.layers[0], in2);
    CHECK(out2[0].value() == doctest::Approx(5.5));

    auto biasonly = manual_dense(2, 1, {0, 0}, {7.25});
    auto staged3 = stage(tape, biasonly);
    auto out3 = dense_forward<Var>(staged3.layers[0], in2);
    CHECK(out3[0].value() == 7.25);
}

TEST_CASE("dense forward rejects shape mismatch") {
    Tape tape;
    auto p = manual_dense(2, 1, {1, 1}, {0});
    auto staged = stage(tape, p);
    std::vector<Var> bad = {tape.constant(1.0)};
    CHECK_THROWS_AS(dense_forward<Var>(staged.layers[0], bad), UsageError);
}

TEST_CASE("positive dense squares raw weights") {
    Tape tape;
    auto p = manual_dense(1, 1, {-2.0}, {0.0});
    p.spec.positive = true;
    auto staged = stage(tape, p);

    std::vector<Var> in = {tape.constant(3.0)};
    auto out = positive_dense_forward<Var>(staged.layers[0], in);
    CHECK(out[0].value() == doctest::Approx(12.0));

    auto zeros = manual_dense(1, 1, {0.0}, {1.0});
    auto staged0 = stage(tape, zeros);
    auto out0 = positive_dense_forward<Var>(staged0.layers[0], in);
    CHECK(out0[0].value() == doctest::Approx(1.0));

    // dual product: effective weight 4 applied to input (5, 1)
    std::vector<Var> timed = {tape.scalar(5.0, 1.0)};
    auto p2 = manual_dense(1, 1, {2.0}, {0.0});
    auto staged2 = stage(tape, p2);
    auto out2 = positive_dense_forward<Var>(staged2.layers[0], timed);
    CHECK(out2[0].value() == doctest::Approx(20.0));
    CHECK(out2[0].tangent() == doctest::Approx(4.0));
}

TEST_CASE("gradient flows through squared raw weights") {
    Tape tape;
    auto p = manual_dense(1, 1, {-2.0}, {0.0});
    p.spec.positive = true;
    auto staged = stage(tape, p);
    std::vector<Var> in = {tape.constant(3.0)};
    auto out = positive_dense_forward<Var>(staged.layers[0], in);
    Gradient g = backward(out[0]);
    // d/dw (w^2 * 3) = 6w = -12
    CHECK(g[staged.layers[0].w[0]] == doctest::Approx(-12.0));
}

TEST_CASE("mlp forward: zero depth applies the head directly") {
    MlpParams p;
    p.spec.widths = {3};
    p.spec.final_act = FinalAct::Softmax;
    auto staged = stage(p);
    std::vector<Dual> logits = {Dual{0, 0}, Dual{0, 0}, Dual{0, 0}};
    auto out = mlp_forward<Dual>(staged, logits);
    for (const auto& o : out) CHECK(o.v == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("softmax sums to one with entries in (0,1)") {
    Rng rng(21);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 2 + static_cast<int>(rng.below(4));
        std::vector<Dual> logits;
        for (int i = 0; i < n; ++i) logits.push_back(Dual{rng.uniform(-15.0, 15.0), 0.0});
        auto out = softmax<Dual>(logits);
        double total = 0.0;
        for (const auto& o : out) {
            total += o.v;
            CHECK(o.v > 0.0);
            CHECK(o.v < 1.0);
        }
        CHECK(std::abs(total - 1.0) <= 1e-12);
    }
}

TEST_CASE("dropout: rate zero means training equals inference") {
    Rng init_rng(3);
    MlpSpec spec;
    spec.widths = {4, 8, 3};
    spec.dropout = 0.0;
    auto params = init_params(spec, init_rng);
    auto staged = stage(params);
    std::vector<Dual> x = {{0.3, 0}, {-1.0, 0}, {0.2, 0}, {2.0, 0}};
    Rng drop_rng(77);
    auto train_out = mlp_forward<Dual>(staged, x, true, &drop_rng);
    auto infer_out = mlp_forward<Dual>(staged, x, false, nullptr);
    REQUIRE(train_out.size() == infer_out.size());
    for (std::size_t i = 0; i < train_out.size(); ++i)
        CHECK(train_out[i].v == infer_out[i].v);
}

TEST_CASE("dropout expectation matches inference output") {
    Rng init_rng(11);
    MlpSpec spec;
    spec.widths = {3, 10, 2};
    spec.dropout = 0.5;
    spec.activate_final = false;
    spec.final_act = FinalAct::None;
    auto params = init_params(spec, init_rng);
    auto staged = stage(params);
    std::vector<Dual> x = {{0.5, 0}, {-0.3, 0}, {1.2, 0}};

    auto infer = mlp_forward<Dual>(staged, x, false, nullptr);

    const int n_pass = 10000;
    Rng drop_rng(123);
    std::vector<double> mean(infer.size(), 0.0);
    std::vector<double> m2(infer.size(), 0.0);
    for (int pass = 0; pass < n_pass; ++pass) {
        auto out = mlp_forward<Dual>(staged, x, true, &drop_rng);
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double delta = out[i].v - mean[i];
            mean[i] += delta / (pass + 1);
            m2[i] += delta * (out[i].v - mean[i]);
        }
    }
    for (std::size_t i = 0; i < infer.size(); ++i) {
        const double se = std::sqrt(m2[i] / (n_pass - 1) / n_pass);
        CHECK(std::abs(mean[i] - infer[i].v) <= 3.0 * se + 1e-12);
    }
}

TEST_CASE("init determinism and parameter count") {
    MlpSpec spec;
    spec.widths = {12, 50, 50};
    Rng r1(42);
    Rng r2(42);
    auto a = init_params(spec, r1);
    auto b = init_params(spec, r2);
    REQUIRE(a.layers.size() == b.layers.size());
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        CHECK(a.layers[l].w == b.layers[l].w);
        CHECK(a.layers[l].b == b.layers[l].b);
    }
    // 12*50+50 + 50*50+50
    CHECK(a.param_count() == 12 * 50 + 50 + 50 * 50 + 50);
}

TEST_CASE("positive layer init keeps effective weights in [0, 0.25]") {
    MlpSpec spec;
    spec.widths = {6, 9};
    spec.positive = true;
    Rng rng(5);
    auto params = init_params(spec, rng);
    for (double w : params.layers[0].w) {
        CHECK(w * w >= 0.0);
        CHECK(w * w <= 0.25);
    }
}

TEST_CASE("monotonicity of positive stacks in the time coordinate") {
    Rng rng(2024);
    int checked = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        MlpSpec spec;
        const int hidden = 2 + static_cast<int>(rng.below(20));
        spec.widths = {3, hidden, 1};
        spec.positive = true;
        spec.final_act = FinalAct::Softplus;
        auto params = init_params(spec, rng);
        // random raw weights wider than the init range
        for (auto& layer : params.layers)
            for (auto& w : layer.w) w = rng.uniform(-2.0, 2.0);
        auto staged = stage(params);

        const double x1 = rng.uniform(-2.0, 2.0);
        const double x2 = rng.uniform(-2.0, 2.0);
        double t1 = rng.uniform(0.0, 3.0);
        double t2 = rng.uniform(0.0, 3.0);
        if (t1 > t2) std::swap(t1, t2);

        std::vector<Dual> lo = {{t1, 1}, {x1, 0}, {x2, 0}};
        std::vector<Dual> hi = {{t2, 1}, {x1, 0}, {x2, 0}};
        auto o1 = mlp_forward<Dual>(staged, lo);
        auto o2 = mlp_forward<Dual>(staged, hi);
        CHECK(o1[0].v <= o2[0].v + 1e-12);
        ++checked;
    }
    CHECK(checked == 1000);
}

TEST_CASE("init rejects invalid specs") {
    Rng rng(0);
    MlpSpec bad;
    bad.widths = {4, 0, 2};
    CHECK_THROWS_AS(init_params(bad, rng), UsageError);
    MlpSpec baddrop;
    baddrop.widths = {4, 2};
    baddrop.dropout = 1.0;
    CHECK_THROWS_AS(init_params(baddrop, rng), UsageError);
}
