#pragma once

// Exp-matching objective: L(W) = (1/D²)·Σ (exp(wᵢⱼ) − exp(ŵᵢⱼ))²
// with gradient ∂L/∂wᵢⱼ = (2/D²)·exp(wᵢⱼ)·(exp(wᵢⱼ) − exp(ŵᵢⱼ)).

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

#include "lowrank/matrix.hpp"
#include "lowrank/random.hpp"

namespace lowrank {

class ToyProblem {
public:
    // Target entries must lie in [-2, 2].
    explicit ToyProblem(Matrix target) : target_{std::move(target)} {
        if (target_.rows() == 0 || target_.rows() != target_.cols())
            throw DimensionError("ToyProblem: target must be square and non-empty, got " + shape_string(target_));
        for (double x : target_.values())
            if (!(x >= -2.0 && x <= 2.0)) throw std::invalid_argument("ToyProblem: target entry outside [-2, 2]");
        exp_target_ = target_;
        for (double& x : exp_target_.values()) x = std::exp(x);
    }

    [[nodiscard]] std::size_t dim() const noexcept { return target_.rows(); }
    [[nodiscard]] const Matrix& target() const noexcept { return target_; }
    [[nodiscard]] const Matrix& exp_target() const noexcept { return exp_target_; }

private:
    Matrix target_;
    Matrix exp_target_;
};

struct ToyInstance {
    ToyProblem problem;
    Matrix initial_w;
};

namespace detail {

inline void require_problem_shape(const ToyProblem& problem, const Matrix& w, const char* op) {
    if (w.rows() != problem.dim() || w.cols() != problem.dim())
        throw DimensionError(std::string(op) + ": weight " + shape_string(w) + " vs problem dim " +
                             std::to_string(problem.dim()));
}

inline double checked_exp(double x, const char* op) {
    const double e = std::exp(x);
    if (!std::isfinite(e)) throw std::overflow_error(std::string(op) + ": exp overflow");
    return e;
}

}  // namespace detail

inline double loss(const ToyProblem& problem, const Matrix& w) {
    detail::require_problem_shape(problem, w, "loss");
    auto wv = w.values();
    auto tv = problem.exp_target().values();
    double acc = 0.0;
    for (std::size_t k = 0; k < wv.size(); ++k) {
        const double diff = detail::checked_exp(wv[k], "loss") - tv[k];
        acc += diff * diff;
    }
    const double d = static_cast<double>(problem.dim());
    const double out = acc / (d * d);
    if (!std::isfinite(out)) throw std::overflow_error("loss: non-finite value");
    return out;
}

inline Matrix loss_gradient(const ToyProblem& problem, const Matrix& w) {
    detail::require_problem_shape(problem, w, "loss_gradient");
    const double d = static_cast<double>(problem.dim());
    const double coeff = 2.0 / (d * d);
    Matrix grad(w.rows(), w.cols());
    auto wv = w.values();
    auto tv = problem.exp_target().values();
    auto gv = grad.values();
    for (std::size_t k = 0; k < wv.size(); ++k) {
        const double e = detail::checked_exp(wv[k], "loss_gradient");
        gv[k] = coeff * e * (e - tv[k]);
    }
    if (!all_finite(grad)) throw std::overflow_error("loss_gradient: non-finite value");
    return grad;
}

// Target entries i.i.d. uniform on [-1, 1]; the starting weight is zero.
inline ToyInstance sample_problem(Rng& rng, std::size_t dim) {
    if (dim == 0) throw std::invalid_argument("sample_problem: dim must be at least 1");
    return {ToyProblem(uniform(rng, dim, dim, -1.0, 1.0)), Matrix(dim, dim)};
}

}  // namespace lowrank
