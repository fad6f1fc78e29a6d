#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <functional>
#include <vector>

#include "nfg/autodiff.hpp"
#include "nfg/rng.hpp"

using namespace nfg;

namespace {

// A fixed random scalar program over leaf slots, replayable for any leaf
// values: this is what lets us finite-difference the composed function.
struct Program {
    struct Instr {
        int op;  // 0 add, 1 sub, 2 mul, 3 guarded div, 4 neg, 5 exp(tanh), 6 log(softplus+c), 7 tanh, 8 softplus, 9 square
        int a;
        int b;
    };
    int n_leaves = 0;
    std::vector<Instr> instrs;

    static Program random(Rng& rng, int n_leaves, int depth, int width) {
        Program p;
        p.n_leaves = n_leaves;
        int n_slots = n_leaves;
        for (int d = 0; d < depth; ++d) {
            const int ops = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(width)));
            for (int k = 0; k < ops; ++k) {
                Instr ins;
                ins.op = static_cast<int>(rng.below(10));
                ins.a = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_slots)));
                ins.b = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_slots)));
                p.instrs.push_back(ins);
                ++n_slots;
            }
        }
        return p;
    }

    template <class S>
    S run(std::vector<S> slots) const {
        for (const auto& ins : instrs) {
            S a = slots[static_cast<std::size_t>(ins.a)];
            S b = slots[static_cast<std::size_t>(ins.b)];
            S r = a;
            switch (ins.op) {
                case 0: r = a + b; break;
                case 1: r = a - b; break;
                case 2: r = a * b; break;
                case 3: r = a / (softplus(b) + 0.5); break;
                case 4: r = -a; break;
                case 5: r = exp(tanh(a)); break;
                case 6: r = log(softplus(a) + 0.5); break;
                case 7: r = tanh(a); break;
                case 8: r = softplus(a); break;
                case 9: r = square(tanh(a)); break;
            }
            slots.push_back(r);
        }
        // fold everything into one output so all slots participate
        S out = slots.back();
        out = tanh(out);
        return out;
    }

    double eval(const std::vector<double>& leaves, int time_leaf = -1) const {
        Tape tape;
        std::vector<Var> slots;
        for (int i = 0; i < n_leaves; ++i)
            slots.push_back(tape.scalar(leaves[static_cast<std::size_t>(i)], i == time_leaf ? 1.0 : 0.0));
        return value(run(slots));
    }
};

double rel_err(double got, double want) {
    const double denom = std::max(std::abs(got), std::abs(want));
    if (denom == 0.0) return 0.0;
    return std::abs(got - want) / denom;
}

bool grad_close(double got, double want, double rel_tol, double abs_floor) {
    return std::abs(got - want) <= abs_floor || rel_err(got, want) < rel_tol;
}

}  // namespace

TEST_CASE("leaf construction") {
    Tape tape;
    Var a = tape.scalar(3.0, 0.0);
    CHECK(a.value() == 3.0);
    CHECK(a.tangent() == 0.0);

    Var t = tape.time_input(2.5);
    CHECK(t.value() == 2.5);
    CHECK(t.tangent() == 1.0);

    Var zero = tape.constant(0.0);
    CHECK(zero.value() == 0.0);
    CHECK(zero.tangent() == 0.0);
}

TEST_CASE("elementwise dual arithmetic") {
    Tape tape;
    Var t = tape.time_input(0.0);

    Var e = exp(t);
    CHECK(e.value() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(e.tangent() == doctest::Approx(1.0).epsilon(1e-15));

    Var x = tape.scalar(-2.0, 3.0);
    Var sq = square(x);
    CHECK(sq.value() == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(sq.tangent() == doctest::Approx(-12.0).epsilon(1e-15));

    Var sp = softplus(t);
    CHECK(sp.value() == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(sp.tangent() == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("elementwise domain errors carry opcode and value") {
    Tape tape;
    Var z = tape.constant(0.0);
    Var neg = tape.constant(-1.5);
    CHECK_THROWS_AS(z / z, DomainError);
    CHECK_THROWS_AS(log(neg), DomainError);
    try {
        log(neg);
    } catch (const DomainError& e) {
        CHECK(e.opcode() == "log");
        CHECK(e.offending_value() == -1.5);
    }
}

TEST_CASE("backward: quadratic") {
    Tape tape;
    Var x = tape.scalar(3.0);
    Var loss = square(x);
    Gradient g = backward(loss);
    CHECK(g[x] == doctest::Approx(6.0).epsilon(1e-15));
}

TEST_CASE("backward through the tangent channel (reverse-over-forward)") {
    // L = d/dt (t*w) = w, so dL/dw = 1
    Tape tape;
    Var t = tape.time_input(2.0);
    Var w = tape.scalar(5.0);
    Var loss = tangent_of(t * w);
    CHECK(loss.value() == doctest::Approx(5.0));
    Gradient g = backward(loss);
    CHECK(g[w] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(g[t] == doctest::Approx(0.0));
}

TEST_CASE("backward through the value channel with a time-tangent present") {
    // L = exp(t*w), t=2, w=0.5 -> dL/dw = t*exp(t*w) = 2e
    Tape tape;
    Var t = tape.time_input(2.0);
    Var w = tape.scalar(0.5);
    Var loss = exp(t * w);
    Gradient g = backward(loss);
    CHECK(g[w] == doctest::Approx(2.0 * std::exp(1.0)).epsilon(1e-13));
}

TEST_CASE("backward rejects a var from another tape") {
    Tape a;
    Tape b;
    Var x = a.scalar(1.0);
    Var y = b.scalar(2.0);
    CHECK_THROWS_AS(x + y, UsageError);
    Var loss = square(y);
    Gradient g = backward(loss);
    CHECK_THROWS_AS(g[x], UsageError);
}

TEST_CASE("unary tangents match central finite differences") {
    Rng rng(1234);
    const double h = 1e-5;
    using Fn = std::function<Dual(Dual)>;
    const std::vector<std::pair<const char*, Fn>> ops = {
        {"exp", [](Dual x) { return exp(x); }},
        {"log", [](Dual x) { return log(softplus(x) + 0.5); }},
        {"tanh", [](Dual x) { return tanh(x); }},
        {"softplus", [](Dual x) { return softplus(x); }},
        {"square", [](Dual x) { return square(x); }},
        {"neg", [](Dual x) { return -x; }},
    };
    for (const auto& [name, fn] : ops) {
        CAPTURE(name);
        for (int trial = 0; trial < 200; ++trial) {
            const double x = rng.uniform(-2.0, 2.0);
            const double got = fn(Dual{x, 1.0}).d;
            const double fd = (fn(Dual{x + h, 0.0}).v - fn(Dual{x - h, 0.0}).v) / (2.0 * h);
            CHECK(grad_close(got, fd, 1e-5, 1e-9));
        }
    }
}

TEST_CASE("random small graphs: gradients match finite differences") {
    Rng rng(99);
    const double h = 1e-5;
    for (int trial = 0; trial < 60; ++trial) {
        const int n_leaves = 2 + static_cast<int>(rng.below(3));
        Program prog = Program::random(rng, n_leaves, /*depth=*/6, /*width=*/4);
        std::vector<double> leaves;
        for (int i = 0; i < n_leaves; ++i) leaves.push_back(rng.uniform(-1.5, 1.5));

        Tape tape;
        std::vector<Var> slots;
        for (double v : leaves) slots.push_back(tape.scalar(v));
        Var loss = prog.run(slots);
        Gradient g = backward(loss);

        for (int i = 0; i < n_leaves; ++i) {
            auto lo = leaves;
            auto hi = leaves;
            lo[static_cast<std::size_t>(i)] -= h;
            hi[static_cast<std::size_t>(i)] += h;
            const double fd = (prog.eval(hi) - prog.eval(lo)) / (2.0 * h);
            CAPTURE(trial);
            CAPTURE(i);
            CHECK(grad_close(g[slots[static_cast<std::size_t>(i)]], fd, 1e-4, 1e-7));
        }
    }
}

TEST_CASE("random small graphs: tangent channel matches d/dt by finite differences") {
    Rng rng(7);
    const double h = 1e-5;
    for (int trial = 0; trial < 60; ++trial) {
        const int n_leaves = 2 + static_cast<int>(rng.below(3));
        Program prog = Program::random(rng, n_leaves, 5, 3);
        std::vector<double> leaves;
        for (int i = 0; i < n_leaves; ++i) leaves.push_back(rng.uniform(-1.5, 1.5));
        const int time_leaf = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_leaves)));

        Tape tape;
        std::vector<Var> slots;
        for (int i = 0; i < n_leaves; ++i)
            slots.push_back(tape.scalar(leaves[static_cast<std::size_t>(i)], i == time_leaf ? 1.0 : 0.0));
        Var out = prog.run(slots);

        auto lo = leaves;
        auto hi = leaves;
        lo[static_cast<std::size_t>(time_leaf)] -= h;
        hi[static_cast<std::size_t>(time_leaf)] += h;
        const double fd = (prog.eval(hi) - prog.eval(lo)) / (2.0 * h);
        CHECK(grad_close(out.tangent(), fd, 1e-5, 1e-8));
    }
}

TEST_CASE("backward is linear in the loss") {
    Rng rng(555);
    for (int trial = 0; trial < 20; ++trial) {
        Tape tape;
        std::vector<Var> leaves;
        for (int i = 0; i < 4; ++i) leaves.push_back(tape.scalar(rng.uniform(-1.0, 1.0)));
        Var l1 = tanh(leaves[0] * leaves[1]) + square(leaves[2]);
        Var l2 = softplus(leaves[3] - leaves[0]) * leaves[2];
        const double a = rng.uniform(-2.0, 2.0);
        const double b = rng.uniform(-2.0, 2.0);
        Var combo = l1 * a + l2 * b;

        Gradient g1 = backward(l1);
        Gradient g2 = backward(l2);
        Gradient gc = backward(combo);
        for (Var leaf : leaves) {
            const double want = a * g1[leaf] + b * g2[leaf];
            CHECK(gc[leaf] == doctest::Approx(want).epsilon(1e-12));
        }
    }
}

TEST_CASE("replay determinism: identical passes give bitwise-identical gradients") {
    auto run = [](std::vector<double>& out) {
        Tape tape;
        Var t = tape.time_input(0.7);
        Var w1 = tape.scalar(0.3);
        Var w2 = tape.scalar(-1.1);
        Var f = softplus(tanh(t * w1) + square(w2) * t);
        Var loss = log(tangent_of(f) + 2.0) * f;
        Gradient g = backward(loss);
        out = {g[w1], g[w2], g[t]};
    };
    std::vector<double> first;
    std::vector<double> second;
    run(first);
    run(second);
    REQUIRE(first.size() == second.size());
    for (std::size_t i = 0; i < first.size(); ++i) {
        // bitwise equality, not approximate
        CHECK(std::memcmp(&first[i], &second[i], sizeof(double)) == 0);
    }
}

TEST_CASE("tape reset keeps capacity and clears nodes") {
    Tape tape;
    for (int i = 0; i < 100; ++i) tape.constant(static_cast<double>(i));
    CHECK(tape.size() == 100);
    tape.reset();
    CHECK(tape.size() == 0);
    Var x = tape.scalar(2.0);
    Var y = square(x);
    CHECK(y.value() == 4.0);
}
