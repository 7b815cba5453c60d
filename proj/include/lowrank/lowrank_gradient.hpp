#pragma once

// Low-rank gradient approximation.
//
// The weight W (M×N) is treated as W̃ + U·Vᵀ with U (M×R) and V (N×R) fresh
// every step. Only U and V are stepped by the optimizer; W receives the change
// in U·Vᵀ. W̃ is never stored: applying the factor update directly to W keeps
// W̃ = W − U·Vᵀ implicitly.
//
// Gradients of the factors follow from the chain rule:
//   ∇U = G·V,   ∇V = Gᵀ·U
// and the update W would see under plain gradient descent is the effective
// gradient U·Uᵀ·G + G·V·Vᵀ, i.e. G projected onto the column span of U and the
// row span of V.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

#include "lowrank/matrix.hpp"
#include "lowrank/optimizer.hpp"
#include "lowrank/random.hpp"
#include "lowrank/svd.hpp"

namespace lowrank {

struct FactorPair {
    Matrix u;  // M×R
    Matrix v;  // N×R

    FactorPair() = default;
    FactorPair(Matrix u_, Matrix v_) : u{std::move(u_)}, v{std::move(v_)} {
        if (u.cols() != v.cols())
            throw DimensionError("FactorPair: rank mismatch " + shape_string(u) + " / " + shape_string(v));
        if (u.cols() == 0) throw std::invalid_argument("FactorPair: rank must be at least 1");
        if (u.cols() > std::min(u.rows(), v.rows()))
            throw std::invalid_argument("FactorPair: rank exceeds min(M, N)");
    }

    [[nodiscard]] std::size_t rank() const noexcept { return u.cols(); }
};

enum class ProjectionMethod { None, Random, Svd };

inline constexpr std::string_view to_string(ProjectionMethod method) noexcept {
    switch (method) {
        case ProjectionMethod::None: return "none";
        case ProjectionMethod::Random: return "random";
        case ProjectionMethod::Svd: return "svd";
    }
    return "?";
}

inline ProjectionMethod parse_projection_method(std::string_view name) {
    if (name == "none") return ProjectionMethod::None;
    if (name == "random") return ProjectionMethod::Random;
    if (name == "svd") return ProjectionMethod::Svd;
    throw std::invalid_argument("unknown projection '" + std::string(name) + "'");
}

namespace detail {

inline void require_rank(std::size_t m, std::size_t n, std::size_t r, const char* op) {
    if (r == 0 || r > std::min(m, n))
        throw std::invalid_argument(std::string(op) + ": rank " + std::to_string(r) +
                                    " outside [1, " + std::to_string(std::min(m, n)) + "]");
}

inline void require_conforming(const Matrix& g, const FactorPair& pair, const char* op) {
    if (pair.u.rows() != g.rows() || pair.v.rows() != g.cols() || pair.u.cols() != pair.v.cols())
        throw DimensionError(std::string(op) + ": gradient " + shape_string(g) + " vs factors " +
                             shape_string(pair.u) + ", " + shape_string(pair.v));
}

}  // namespace detail

// U ~ N(0, 1/(2M)) and V ~ N(0, 1/(2N)) entry-wise (standard deviations
// 1/√(2M), 1/√(2N)), so that E[UᵀU] = E[VᵀV] = ½·I.
inline FactorPair sample_random_factors(Rng& rng, std::size_t m, std::size_t n, std::size_t r) {
    detail::require_rank(m, n, r, "sample_random_factors");
    Matrix u = gaussian(rng, m, r, 1.0 / std::sqrt(2.0 * static_cast<double>(m)));
    Matrix v = gaussian(rng, n, r, 1.0 / std::sqrt(2.0 * static_cast<double>(n)));
    return {std::move(u), std::move(v)};
}

// Top-r singular vectors of g, each side scaled by 1/√2 so the two projector
// terms of the effective gradient contribute half of the rank-r approximation.
inline FactorPair svd_factors(const Matrix& g, std::size_t r) {
    detail::require_rank(g.rows(), g.cols(), r, "svd_factors");
    SvdResult svd = truncated_svd(g, r);
    const double half = 1.0 / std::sqrt(2.0);
    return {scale(svd.left, half), scale(svd.right, half)};
}

struct FactorGradients {
    Matrix gu;  // M×R
    Matrix gv;  // N×R
};

inline FactorGradients factor_gradients(const Matrix& g, const FactorPair& pair) {
    detail::require_conforming(g, pair, "factor_gradients");
    return {matmul(g, pair.v), matmul_at_b(g, pair.u)};
}

// U·Uᵀ·G + G·V·Vᵀ, evaluated as U·(UᵀG) + (GV)·Vᵀ.
inline Matrix effective_gradient(const Matrix& g, const FactorPair& pair) {
    detail::require_conforming(g, pair, "effective_gradient");
    Matrix out = matmul(pair.u, matmul_at_b(pair.u, g));
    add_in_place(out, matmul_a_bt(matmul(g, pair.v), pair.v));
    return out;
}

// The same quantity assembled from the factor gradients: U·∇Vᵀ + ∇U·Vᵀ.
inline Matrix effective_gradient_from_factor_gradients(const FactorPair& pair,
                                                       const FactorGradients& grads) {
    Matrix out = matmul_a_bt(pair.u, grads.gv);
    add_in_place(out, matmul_a_bt(grads.gu, pair.v));
    return out;
}

// First-order loss change of a gradient-descent step through the factors:
//   δL ≈ −λ·tr(UᵀGGᵀU + VᵀGᵀGV) = −λ·(‖GᵀU‖²_F + ‖GV‖²_F).
// Both terms are sums of squares, so the result is never positive.
inline double predicted_loss_delta(const Matrix& g, const FactorPair& pair, double learning_rate) {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("predicted_loss_delta: learning rate must be positive");
    const FactorGradients grads = factor_gradients(g, pair);
    return -learning_rate * (squared_frobenius_norm(grads.gv) + squared_frobenius_norm(grads.gu));
}

// Unprojected counterpart: −λ·½·tr(GGᵀ + GᵀG) = −λ·‖G‖²_F.
inline double full_rank_loss_delta(const Matrix& g, double learning_rate) {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("full_rank_loss_delta: learning rate must be positive");
    return -learning_rate * squared_frobenius_norm(g);
}

// W + U·δVᵀ + δU·Vᵀ + δU·δVᵀ.
inline Matrix apply_factor_update(const Matrix& w, const FactorPair& pair, const Matrix& delta_u,
                                  const Matrix& delta_v) {
    Matrix change = matmul_a_bt(pair.u, delta_v);
    add_in_place(change, matmul_a_bt(delta_u, pair.v));
    add_in_place(change, matmul_a_bt(delta_u, delta_v));
    return add(w, change);
}

// W + (U+δU)(V+δV)ᵀ − U·Vᵀ: the difference of the new and old low-rank products.
inline Matrix apply_factor_difference(const Matrix& w, const FactorPair& pair, const Matrix& delta_u,
                                      const Matrix& delta_v) {
    const Matrix u_next = add(pair.u, delta_u);
    const Matrix v_next = add(pair.v, delta_v);
    return add(w, sub(matmul_a_bt(u_next, v_next), matmul_a_bt(pair.u, pair.v)));
}

struct LowRankStepReport {
    Matrix delta_w;
    double predicted_loss_delta = 0.0;
    Matrix effective_gradient;
};

struct LowRankStepResult {
    Matrix w;
    OptimizerState state_u;
    OptimizerState state_v;
    LowRankStepReport report;
};

// One low-rank update of w given its gradient g:
//   1. draw factors (Random) or fit them to g (Svd)
//   2. factor gradients ∇U = G·V, ∇V = Gᵀ·U
//   3. optimizer steps δU, δV with the per-factor states
//   4. W ← W + U·δVᵀ + δU·Vᵀ + δU·δVᵀ
// The optimizer states carry over between calls even though the factors are
// redrawn; callers wanting fresh states pass freshly initialized ones.
inline LowRankStepResult low_rank_step(const Matrix& w, const Matrix& g, ProjectionMethod method,
                                       std::size_t rank, const OptimizerSpec& spec,
                                       OptimizerState state_u, OptimizerState state_v, Rng& rng) {
    if (method == ProjectionMethod::None)
        throw std::invalid_argument("low_rank_step: projection method 'none' has no factors");
    if (!w.same_shape(g))
        throw DimensionError("low_rank_step: weight " + shape_string(w) + " vs gradient " + shape_string(g));
    detail::require_rank(w.rows(), w.cols(), rank, "low_rank_step");

    FactorPair pair = method == ProjectionMethod::Random
                          ? sample_random_factors(rng, w.rows(), w.cols(), rank)
                          : svd_factors(g, rank);
    FactorGradients grads = factor_gradients(g, pair);

    auto [du, next_u] = compute_delta(spec, std::move(state_u), grads.gu);
    auto [dv, next_v] = compute_delta(spec, std::move(state_v), grads.gv);

    LowRankStepResult out;
    out.w = apply_factor_update(w, pair, du.delta, dv.delta);
    out.report.delta_w = sub(out.w, w);
    out.report.predicted_loss_delta =
        -spec.learning_rate * (squared_frobenius_norm(grads.gv) + squared_frobenius_norm(grads.gu));
    out.report.effective_gradient = effective_gradient_from_factor_gradients(pair, grads);
    out.state_u = std::move(next_u);
    out.state_v = std::move(next_v);
    return out;
}

}  // namespace lowrank
