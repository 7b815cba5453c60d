#pragma once

// Full-rank reference optimizers: gradient descent, momentum and Adam.
//
// Each is a per-variable update: given the current gradient and the
// accumulator state, produce the additive step δ and the next state. The same
// kernels drive the weights directly (no projection) and the low-rank factors.

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

#include "lowrank/matrix.hpp"

namespace lowrank {

enum class OptimizerKind { GradientDescent, Momentum, Adam };

// Standard: textbook bias-corrected Adam.
// PaperLiteral: δ = −λ·√(1−β₁ᵗ)/(1−β₂ᵗ)·m ⊘ (√s − ε), divisor clamped to
// magnitude ≥ 1e-12.
enum class AdamBiasMode { Standard, PaperLiteral };

inline constexpr std::string_view to_string(OptimizerKind kind) noexcept {
    switch (kind) {
        case OptimizerKind::GradientDescent: return "gd";
        case OptimizerKind::Momentum: return "momentum";
        case OptimizerKind::Adam: return "adam";
    }
    return "?";
}

inline OptimizerKind parse_optimizer_kind(std::string_view name) {
    if (name == "gd" || name == "sgd" || name == "gradient-descent") return OptimizerKind::GradientDescent;
    if (name == "momentum") return OptimizerKind::Momentum;
    if (name == "adam") return OptimizerKind::Adam;
    throw std::invalid_argument("unknown optimizer '" + std::string(name) + "'");
}

inline constexpr std::string_view to_string(AdamBiasMode mode) noexcept {
    return mode == AdamBiasMode::Standard ? "standard" : "paper";
}

inline AdamBiasMode parse_adam_bias_mode(std::string_view name) {
    if (name == "standard") return AdamBiasMode::Standard;
    if (name == "paper" || name == "paper-literal") return AdamBiasMode::PaperLiteral;
    throw std::invalid_argument("unknown adam bias mode '" + std::string(name) + "'");
}

// Learning rates tuned for the exp-matching toy objective, whose gradient
// carries a 1/D² factor; generic problems will want their own.
inline constexpr double default_learning_rate(OptimizerKind kind) noexcept {
    return kind == OptimizerKind::Adam ? 0.02 : 10.0;
}

struct OptimizerSpec {
    OptimizerKind kind = OptimizerKind::GradientDescent;
    double learning_rate = default_learning_rate(OptimizerKind::GradientDescent);
    double momentum = 0.9;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    AdamBiasMode adam_bias_mode = AdamBiasMode::Standard;

    static OptimizerSpec defaults(OptimizerKind kind) {
        OptimizerSpec spec;
        spec.kind = kind;
        spec.learning_rate = default_learning_rate(kind);
        return spec;
    }

    void validate() const {
        if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
            throw std::invalid_argument("optimizer: learning rate must be positive");
        if (!(momentum >= 0.0 && momentum <= 1.0))
            throw std::invalid_argument("optimizer: momentum must lie in [0, 1]");
        if (!(beta1 >= 0.0 && beta1 < 1.0)) throw std::invalid_argument("optimizer: beta1 must lie in [0, 1)");
        if (!(beta2 >= 0.0 && beta2 < 1.0)) throw std::invalid_argument("optimizer: beta2 must lie in [0, 1)");
        if (!(epsilon > 0.0)) throw std::invalid_argument("optimizer: epsilon must be positive");
    }

    friend bool operator==(const OptimizerSpec&, const OptimizerSpec&) = default;
};

// Accumulators for one tracked variable. Which ones are populated depends on
// the optimizer kind: none for GD, velocity for momentum, m and s for Adam.
struct OptimizerState {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::optional<Matrix> velocity;
    std::optional<Matrix> first_moment;
    std::optional<Matrix> second_moment;
    std::size_t step = 0;

    friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

struct UpdateDirection {
    Matrix delta;
};

// Extra scalars held per variable entry: 0 (GD), 1 (momentum), 2 (Adam).
inline constexpr std::size_t state_multiplier(OptimizerKind kind) noexcept {
    switch (kind) {
        case OptimizerKind::GradientDescent: return 0;
        case OptimizerKind::Momentum: return 1;
        case OptimizerKind::Adam: return 2;
    }
    return 0;
}

inline std::size_t state_slot_count(const OptimizerSpec& spec, std::size_t rows, std::size_t cols) {
    return state_multiplier(spec.kind) * rows * cols;
}

inline OptimizerState init_state(const OptimizerSpec& spec, std::size_t rows, std::size_t cols) {
    if (rows == 0 || cols == 0) throw DimensionError("init_state: dimensions must be positive");
    OptimizerState state;
    state.rows = rows;
    state.cols = cols;
    switch (spec.kind) {
        case OptimizerKind::GradientDescent: break;
        case OptimizerKind::Momentum: state.velocity.emplace(rows, cols); break;
        case OptimizerKind::Adam:
            state.first_moment.emplace(rows, cols);
            state.second_moment.emplace(rows, cols);
            break;
    }
    return state;
}

inline std::size_t allocated_slots(const OptimizerState& state) noexcept {
    std::size_t n = 0;
    if (state.velocity) n += state.velocity->size();
    if (state.first_moment) n += state.first_moment->size();
    if (state.second_moment) n += state.second_moment->size();
    return n;
}

namespace detail {

inline Matrix adam_delta(const OptimizerSpec& spec, const Matrix& m, const Matrix& s, std::size_t t) {
    const double tt = static_cast<double>(t);
    const double bias1 = 1.0 - std::pow(spec.beta1, tt);
    const double bias2 = 1.0 - std::pow(spec.beta2, tt);
    Matrix delta(m.rows(), m.cols());
    auto mv = m.values();
    auto sv = s.values();
    auto dv = delta.values();
    if (spec.adam_bias_mode == AdamBiasMode::Standard) {
        for (std::size_t k = 0; k < dv.size(); ++k)
            dv[k] = -spec.learning_rate * (mv[k] / bias1) / (std::sqrt(sv[k] / bias2) + spec.epsilon);
    } else {
        constexpr double min_divisor = 1e-12;
        const double factor = -spec.learning_rate * std::sqrt(bias1) / bias2;
        for (std::size_t k = 0; k < dv.size(); ++k) {
            double divisor = std::sqrt(sv[k]) - spec.epsilon;
            if (std::abs(divisor) < min_divisor) divisor = std::copysign(min_divisor, divisor);
            dv[k] = factor * mv[k] / divisor;
        }
    }
    return delta;
}

}  // namespace detail

// One optimizer step on `grad`. The state is consumed and the advanced state
// returned alongside the update δ; callers typically move their state in.
inline std::pair<UpdateDirection, OptimizerState> compute_delta(const OptimizerSpec& spec,
                                                                OptimizerState state,
                                                                const Matrix& grad) {
    if (grad.rows() != state.rows || grad.cols() != state.cols)
        throw DimensionError("compute_delta: gradient " + shape_string(grad) + " vs state " +
                             std::to_string(state.rows) + "x" + std::to_string(state.cols));
    if (!all_finite(grad)) throw std::domain_error("compute_delta: non-finite gradient");

    state.step += 1;
    UpdateDirection out;
    switch (spec.kind) {
        case OptimizerKind::GradientDescent:
            out.delta = scale(grad, -spec.learning_rate);
            break;
        case OptimizerKind::Momentum: {
            if (!state.velocity) throw std::logic_error("compute_delta: momentum state lacks velocity");
            Matrix delta(grad.rows(), grad.cols());
            auto v = state.velocity->values();
            auto g = grad.values();
            auto d = delta.values();
            for (std::size_t k = 0; k < d.size(); ++k)
                d[k] = spec.momentum * v[k] - spec.learning_rate * g[k];
            *state.velocity = delta;
            out.delta = std::move(delta);
            break;
        }
        case OptimizerKind::Adam: {
            if (!state.first_moment || !state.second_moment)
                throw std::logic_error("compute_delta: adam state lacks moments");
            auto m = state.first_moment->values();
            auto s = state.second_moment->values();
            auto g = grad.values();
            for (std::size_t k = 0; k < g.size(); ++k) {
                m[k] = spec.beta1 * m[k] + (1.0 - spec.beta1) * g[k];
                s[k] = spec.beta2 * s[k] + (1.0 - spec.beta2) * g[k] * g[k];
            }
            out.delta = detail::adam_delta(spec, *state.first_moment, *state.second_moment, state.step);
            break;
        }
    }
    return {std::move(out), std::move(state)};
}

}  // namespace lowrank
