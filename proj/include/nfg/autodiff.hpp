#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "nfg/errors.hpp"

namespace nfg {

// ---------------------------------------------------------------------------
// Dual numbers
//
// Every scalar flowing through the engine carries (value, tangent) where the
// tangent is the directional derivative with respect to the time input t.
// Constants and covariate-derived values have tangent 0, the time input has
// tangent 1.
// ---------------------------------------------------------------------------

struct Dual {
    double v = 0.0;  // value
    double d = 0.0;  // tangent (d/dt)
};

inline double value(Dual a) { return a.v; }
inline double tangent(Dual a) { return a.d; }

inline Dual operator+(Dual a, Dual b) { return {a.v + b.v, a.d + b.d}; }
inline Dual operator-(Dual a, Dual b) { return {a.v - b.v, a.d - b.d}; }
inline Dual operator-(Dual a) { return {-a.v, -a.d}; }
inline Dual operator*(Dual a, Dual b) { return {a.v * b.v, a.v * b.d + a.d * b.v}; }

inline Dual operator/(Dual a, Dual b) {
    if (b.v == 0.0) throw DomainError("div", 0.0);
    const double inv = 1.0 / b.v;
    return {a.v * inv, (a.d - a.v * inv * b.d) * inv};
}

inline Dual operator+(Dual a, double c) { return {a.v + c, a.d}; }
inline Dual operator+(double c, Dual a) { return {c + a.v, a.d}; }
inline Dual operator-(Dual a, double c) { return {a.v - c, a.d}; }
inline Dual operator-(double c, Dual a) { return {c - a.v, -a.d}; }
inline Dual operator*(Dual a, double c) { return {a.v * c, a.d * c}; }
inline Dual operator*(double c, Dual a) { return {c * a.v, c * a.d}; }
inline Dual operator/(Dual a, double c) {
    if (c == 0.0) throw DomainError("div", 0.0);
    return {a.v / c, a.d / c};
}

namespace detail {

inline double softplus_value(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline double sigmoid_value(double x) {
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace detail

inline Dual exp(Dual a) {
    const double e = std::exp(a.v);
    return {e, e * a.d};
}

inline Dual log(Dual a) {
    if (a.v <= 0.0) throw DomainError("log", a.v);
    return {std::log(a.v), a.d / a.v};
}

inline Dual tanh(Dual a) {
    const double t = std::tanh(a.v);
    return {t, (1.0 - t * t) * a.d};
}

inline Dual softplus(Dual a) {
    return {detail::softplus_value(a.v), detail::sigmoid_value(a.v) * a.d};
}

inline Dual square(Dual a) { return {a.v * a.v, 2.0 * a.v * a.d}; }

// Projects the tangent channel into the value channel: the result's value is
// d(input)/dt. The result's own tangent is not tracked (it would be a second
// time derivative, which nothing downstream needs).
inline Dual tangent_of(Dual a) { return {a.d, 0.0}; }

// ---------------------------------------------------------------------------
// Tape (reverse mode over the dual forward pass)
//
// Nodes store the local partial derivatives with respect to each parent,
// themselves evaluated in dual arithmetic. During backward both adjoint
// channels are swept:
//   value-adjoint(parent)   += va * partial.v + ta * partial.d
//   tangent-adjoint(parent) += ta * partial.v
// which is exactly the adjoint of (v_i, tau_i) = (f(v_p), sum f'_j(v_p) tau_pj).
//
// Dense layers record one fused dot-product node whose per-parent partials
// live in side arrays; its backward rule is the same per-parent update.
// ---------------------------------------------------------------------------

enum class Op : std::uint8_t {
    Leaf,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Exp,
    Log,
    Tanh,
    Softplus,
    Square,
    Tangent,
    Dot,  // bias + sum_j terms, parents/partials in side arrays
};

class Tape;

// Result values are cached in the handle so chained ops never chase the node
// array during the forward pass.
struct Var {
    Tape* tape = nullptr;
    std::int32_t idx = -1;
    Dual val{};

    double value() const { return val.v; }
    double tangent() const { return val.d; }
};

struct Node {
    Dual partial[2];
    std::int32_t parent[2] = {-1, -1};
    std::int32_t ext_begin = 0;  // Dot: first side-array entry
    std::int32_t ext_count = 0;  // Dot: number of side-array entries
    Op op = Op::Leaf;
    std::uint8_t arity = 0;
};

class Gradient;

class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Leaf with explicit payload. Parameters and covariates use tangent 0,
    // the time input uses tangent 1.
    Var scalar(double value, double tangent = 0.0) {
        nodes_.push_back(Node{});
        return Var{this, static_cast<std::int32_t>(nodes_.size() - 1), Dual{value, tangent}};
    }

    Var constant(double value) { return scalar(value, 0.0); }
    Var time_input(double t) { return scalar(t, 1.0); }

    std::size_t size() const { return nodes_.size(); }

    // Drops all nodes but keeps capacity; minibatch loops reuse the storage.
    void reset() {
        nodes_.clear();
        ext_parents_.clear();
        ext_partials_.clear();
    }

    const Node& node(std::int32_t idx) const { return nodes_[static_cast<std::size_t>(idx)]; }

    Var emit1(Op op, Var a, Dual payload, Dual pa) {
        if (a.tape != this) throw UsageError("operand recorded on a different tape");
        Node n;
        n.partial[0] = pa;
        n.parent[0] = a.idx;
        n.op = op;
        n.arity = 1;
        nodes_.push_back(n);
        return Var{this, static_cast<std::int32_t>(nodes_.size() - 1), payload};
    }

    Var emit2(Op op, Var a, Var b, Dual payload, Dual pa, Dual pb) {
        if (a.tape != this || b.tape != this)
            throw UsageError("operands recorded on different tapes");
        Node n;
        n.partial[0] = pa;
        n.partial[1] = pb;
        n.parent[0] = a.idx;
        n.parent[1] = b.idx;
        n.op = op;
        n.arity = 2;
        nodes_.push_back(n);
        return Var{this, static_cast<std::int32_t>(nodes_.size() - 1), payload};
    }

    // Fused affine form bias + sum_j w_j x_j. With `squared_weights` the
    // effective weight is w_j^2 (raw weights stay the recorded parents, so
    // gradients flow through the squaring).
    Var emit_dot(Var bias, std::span<const Var> weights, std::span<const Var> inputs,
                 bool squared_weights) {
        if (weights.size() != inputs.size()) throw UsageError("dot operand lengths disagree");
        if (bias.tape != this) throw UsageError("operand recorded on a different tape");
        Node n;
        n.op = Op::Dot;
        n.parent[0] = bias.idx;
        n.arity = 1;  // the bias; side entries carry the rest
        n.partial[0] = Dual{1.0, 0.0};
        n.ext_begin = static_cast<std::int32_t>(ext_parents_.size());

        Dual acc = bias.val;
        for (std::size_t j = 0; j < weights.size(); ++j) {
            const Var& w = weights[j];
            const Var& x = inputs[j];
            if (w.tape != this || x.tape != this)
                throw UsageError("operands recorded on different tapes");
            if (squared_weights) {
                const Dual w_eff = square(w.val);
                acc = acc + w_eff * x.val;
                // d/dw (w^2 x) = 2 w x, in dual arithmetic
                ext_parents_.push_back(w.idx);
                ext_partials_.push_back(Dual{2.0 * w.val.v * x.val.v,
                                             2.0 * (w.val.v * x.val.d + w.val.d * x.val.v)});
                ext_parents_.push_back(x.idx);
                ext_partials_.push_back(w_eff);
            } else {
                acc = acc + w.val * x.val;
                ext_parents_.push_back(w.idx);
                ext_partials_.push_back(x.val);
                ext_parents_.push_back(x.idx);
                ext_partials_.push_back(w.val);
            }
        }
        n.ext_count = static_cast<std::int32_t>(ext_parents_.size()) - n.ext_begin;
        nodes_.push_back(n);
        return Var{this, static_cast<std::int32_t>(nodes_.size() - 1), acc};
    }

private:
    friend void backward(Var, Gradient&);
    std::vector<Node> nodes_;
    std::vector<std::int32_t> ext_parents_;
    std::vector<Dual> ext_partials_;
};

inline double value(Var a) { return a.val.v; }
inline double tangent(Var a) { return a.val.d; }

// --- elementwise operations ------------------------------------------------

inline Var operator+(Var a, Var b) {
    return a.tape->emit2(Op::Add, a, b, a.val + b.val, Dual{1.0, 0.0}, Dual{1.0, 0.0});
}

inline Var operator-(Var a, Var b) {
    return a.tape->emit2(Op::Sub, a, b, a.val - b.val, Dual{1.0, 0.0}, Dual{-1.0, 0.0});
}

inline Var operator-(Var a) { return a.tape->emit1(Op::Neg, a, -a.val, Dual{-1.0, 0.0}); }

inline Var operator*(Var a, Var b) {
    return a.tape->emit2(Op::Mul, a, b, a.val * b.val, b.val, a.val);
}

inline Var operator/(Var a, Var b) {
    if (b.val.v == 0.0) throw DomainError("div", 0.0);
    const double inv = 1.0 / b.val.v;
    // d/da (a/b) = 1/b, d/db (a/b) = -a/b^2, both in dual arithmetic.
    const Dual da{inv, -b.val.d * inv * inv};
    const Dual db{-a.val.v * inv * inv, (-a.val.d + 2.0 * a.val.v * inv * b.val.d) * inv * inv};
    return a.tape->emit2(Op::Div, a, b, a.val / b.val, da, db);
}

inline Var exp(Var a) {
    const Dual r = exp(a.val);
    return a.tape->emit1(Op::Exp, a, r, r);
}

inline Var log(Var a) {
    if (a.val.v <= 0.0) throw DomainError("log", a.val.v);
    const double inv = 1.0 / a.val.v;
    return a.tape->emit1(Op::Log, a, log(a.val), Dual{inv, -a.val.d * inv * inv});
}

inline Var tanh(Var a) {
    const double t = std::tanh(a.val.v);
    const double sech2 = 1.0 - t * t;
    return a.tape->emit1(Op::Tanh, a, Dual{t, sech2 * a.val.d},
                         Dual{sech2, -2.0 * t * sech2 * a.val.d});
}

inline Var softplus(Var a) {
    const double sig = detail::sigmoid_value(a.val.v);
    return a.tape->emit1(Op::Softplus, a, Dual{detail::softplus_value(a.val.v), sig * a.val.d},
                         Dual{sig, sig * (1.0 - sig) * a.val.d});
}

inline Var square(Var a) {
    return a.tape->emit1(Op::Square, a, square(a.val), Dual{2.0 * a.val.v, 2.0 * a.val.d});
}

inline Var tangent_of(Var a) {
    return a.tape->emit1(Op::Tangent, a, Dual{a.val.d, 0.0}, Dual{});
}

// Mixed scalar/double forms wrap the double as a constant leaf.
inline Var operator+(Var a, double c) { return a + a.tape->constant(c); }
inline Var operator+(double c, Var a) { return a.tape->constant(c) + a; }
inline Var operator-(Var a, double c) { return a - a.tape->constant(c); }
inline Var operator-(double c, Var a) { return a.tape->constant(c) - a; }
inline Var operator*(Var a, double c) { return a * a.tape->constant(c); }
inline Var operator*(double c, Var a) { return a.tape->constant(c) * a; }
inline Var operator/(Var a, double c) { return a / a.tape->constant(c); }
inline Var operator/(double c, Var a) { return a.tape->constant(c) / a; }

// ---------------------------------------------------------------------------
// Backward pass
// ---------------------------------------------------------------------------

class Gradient {
public:
    // dL/d(value channel of v); for a leaf parameter this is the gradient.
    double value_adjoint(Var v) const { return at(value_adj_, v); }
    double tangent_adjoint(Var v) const { return at(tangent_adj_, v); }
    double operator[](Var v) const { return value_adjoint(v); }

private:
    double at(const std::vector<double>& buf, Var v) const {
        if (v.tape != tape_) throw UsageError("gradient queried with a var from another tape");
        const auto i = static_cast<std::size_t>(v.idx);
        return i < buf.size() ? buf[i] : 0.0;
    }

    friend void backward(Var, Gradient&);
    std::vector<double> value_adj_;
    std::vector<double> tangent_adj_;
    const Tape* tape_ = nullptr;
};

// Sweeps the tape once, in reverse insertion order from the loss node.
// The loss is the value channel of `loss`; losses over the tangent channel
// are expressed by taking tangent_of(...) first.
inline void backward(Var loss, Gradient& grad) {
    if (loss.tape == nullptr) throw UsageError("backward called with a null var");
    const Tape& tape = *loss.tape;
    if (loss.idx < 0 || static_cast<std::size_t>(loss.idx) >= tape.size())
        throw UsageError("loss is not a node of this tape");

    const auto n = static_cast<std::size_t>(loss.idx) + 1;
    grad.tape_ = loss.tape;
    grad.value_adj_.assign(n, 0.0);
    grad.tangent_adj_.assign(n, 0.0);
    grad.value_adj_[static_cast<std::size_t>(loss.idx)] = 1.0;

    auto& va = grad.value_adj_;
    auto& ta = grad.tangent_adj_;
    const auto& nodes = tape.nodes_;
    const auto& ext_parents = tape.ext_parents_;
    const auto& ext_partials = tape.ext_partials_;

    for (std::int32_t i = loss.idx; i >= 0; --i) {
        const Node& nd = nodes[static_cast<std::size_t>(i)];
        const double av = va[static_cast<std::size_t>(i)];
        const double at = ta[static_cast<std::size_t>(i)];
        if (av == 0.0 && at == 0.0) continue;
        switch (nd.op) {
            case Op::Leaf:
                break;
            case Op::Tangent:
                // value of this node is the parent's tangent
                ta[static_cast<std::size_t>(nd.parent[0])] += av;
                break;
            case Op::Dot: {
                va[static_cast<std::size_t>(nd.parent[0])] += av;  // bias, partial (1, 0)
                ta[static_cast<std::size_t>(nd.parent[0])] += at;
                const auto begin = static_cast<std::size_t>(nd.ext_begin);
                const auto end = begin + static_cast<std::size_t>(nd.ext_count);
                if (at == 0.0) {
                    for (std::size_t k = begin; k < end; ++k) {
                        const Dual p = ext_partials[k];
                        va[static_cast<std::size_t>(ext_parents[k])] += av * p.v;
                    }
                } else {
                    for (std::size_t k = begin; k < end; ++k) {
                        const Dual p = ext_partials[k];
                        const auto pi = static_cast<std::size_t>(ext_parents[k]);
                        va[pi] += av * p.v + at * p.d;
                        ta[pi] += at * p.v;
                    }
                }
                break;
            }
            default:
                for (int k = 0; k < nd.arity; ++k) {
                    const Dual p = nd.partial[k];
                    const auto pi = static_cast<std::size_t>(nd.parent[k]);
                    va[pi] += av * p.v + at * p.d;
                    ta[pi] += at * p.v;
                }
        }
    }
}

inline Gradient backward(Var loss) {
    Gradient g;
    backward(loss, g);
    return g;
}

}  // namespace nfg
