#pragma once

// Small-size invariant suites run by `lowrank selfcheck`. Every suite checks a
// universal property, so any seed must pass.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lowrank/experiment.hpp"
#include "lowrank/lowrank_gradient.hpp"
#include "lowrank/memory_model.hpp"
#include "lowrank/optimizer.hpp"
#include "lowrank/random.hpp"
#include "lowrank/svd.hpp"
#include "lowrank/toy_objective.hpp"

namespace lowrank {

struct SelfCheckOptions {
    std::uint64_t seed = 1;
    // Test hook: corrupts the analytic side of the gradient and identity checks.
    bool inject_fault = false;
};

struct SuiteResult {
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

namespace selfcheck_detail {

// Long-double evaluation keeps central-difference rounding far below 1e-6.
inline long double loss_extended(const ToyProblem& problem, const Matrix& w) {
    auto wv = w.values();
    auto tv = problem.target().values();
    long double acc = 0.0L;
    for (std::size_t k = 0; k < wv.size(); ++k) {
        const long double diff = std::exp(static_cast<long double>(wv[k])) - std::exp(static_cast<long double>(tv[k]));
        acc += diff * diff;
    }
    const long double d = static_cast<long double>(problem.dim());
    return acc / (d * d);
}

// Random point whose entries sit 0.1–1.0 away from the target, never at it.
inline Matrix point_off_target(Rng& rng, const ToyProblem& problem) {
    Matrix w = problem.target();
    for (double& x : w.values()) {
        const double offset = rng.uniform(0.1, 1.0);
        x += rng.uniform() < 0.5 ? -offset : offset;
    }
    return w;
}

inline double entry_relative_error(double a, double b) {
    const double denom = std::max({std::abs(a), std::abs(b), 1e-300});
    return std::abs(a - b) / denom;
}

inline std::string fmt(double x) {
    std::ostringstream s;
    s << x;
    return s.str();
}

inline SuiteResult toy_gradient(const SelfCheckOptions& opt) {
    Rng rng(opt.seed);
    double worst = 0.0;
    const double h = 1e-6;
    for (int trial = 0; trial < 5; ++trial) {
        ToyProblem problem = sample_problem(rng, 6).problem;
        Matrix w = point_off_target(rng, problem);
        Matrix analytic = loss_gradient(problem, w);
        if (opt.inject_fault) analytic = scale(analytic, 1.001);
        for (std::size_t k = 0; k < w.size(); ++k) {
            Matrix plus = w, minus = w;
            plus.values()[k] += h;
            minus.values()[k] -= h;
            const double fd = static_cast<double>((loss_extended(problem, plus) - loss_extended(problem, minus)) /
                                                  (2.0L * static_cast<long double>(h)));
            worst = std::max(worst, entry_relative_error(fd, analytic.values()[k]));
        }
    }
    return {"toy-gradient", worst <= 1e-6, "max relative error " + fmt(worst)};
}

inline SuiteResult factor_chain_rule(const SelfCheckOptions& opt) {
    Rng rng(opt.seed + 1);
    ToyProblem problem = sample_problem(rng, 6).problem;
    Matrix w = point_off_target(rng, problem);
    FactorPair pair = sample_random_factors(rng, 6, 6, 2);
    const Matrix base = sub(w, matmul_a_bt(pair.u, pair.v));  // W̃
    const FactorGradients grads = factor_gradients(loss_gradient(problem, w), pair);
    const double h = 1e-6;
    double worst = 0.0;
    for (std::size_t k = 0; k < pair.u.size(); ++k) {
        Matrix up = pair.u, um = pair.u;
        up.values()[k] += h;
        um.values()[k] -= h;
        const long double lp = loss_extended(problem, add(base, matmul_a_bt(up, pair.v)));
        const long double lm = loss_extended(problem, add(base, matmul_a_bt(um, pair.v)));
        const double fd = static_cast<double>((lp - lm) / (2.0L * static_cast<long double>(h)));
        worst = std::max(worst, entry_relative_error(fd, grads.gu.values()[k]));
    }
    return {"factor-chain-rule", worst <= 1e-6, "max relative error " + fmt(worst)};
}

inline SuiteResult effective_gradient_identity(const SelfCheckOptions& opt) {
    Rng rng(opt.seed + 2);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t m = 1 + rng.next_u64() % 12;
        const std::size_t n = 1 + rng.next_u64() % 12;
        const std::size_t r = 1 + rng.next_u64() % std::min<std::size_t>({m, n, 4});
        const Matrix g = gaussian(rng, m, n, 1.0);
        const FactorPair pair = sample_random_factors(rng, m, n, r);
        Matrix projected = effective_gradient(g, pair);
        if (opt.inject_fault) projected = scale(projected, 1.0 + 1e-9);
        const Matrix assembled = effective_gradient_from_factor_gradients(pair, factor_gradients(g, pair));
        worst = std::max(worst, relative_difference(projected, assembled));
    }
    return {"effective-gradient-identity", worst <= 1e-12, "max relative difference " + fmt(worst)};
}

inline SuiteResult descent_sign(const SelfCheckOptions& opt) {
    Rng rng(opt.seed + 3);
    int positive = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t m = 1 + rng.next_u64() % 10;
        const std::size_t n = 1 + rng.next_u64() % 10;
        const std::size_t r = 1 + rng.next_u64() % std::min(m, n);
        const Matrix g = gaussian(rng, m, n, 1.0);
        const FactorPair pair = sample_random_factors(rng, m, n, r);
        if (predicted_loss_delta(g, pair, rng.uniform(1e-6, 1.0)) > 0.0) ++positive;
    }
    const Matrix zero(4, 3);
    Rng zr(opt.seed);
    const bool zero_ok = predicted_loss_delta(zero, sample_random_factors(zr, 4, 3, 2), 0.1) == 0.0;
    return {"descent-sign", positive == 0 && zero_ok,
            std::to_string(positive) + " positive predictions of 200; zero gradient " + (zero_ok ? "ok" : "nonzero")};
}

inline SuiteResult random_factor_calibration(const SelfCheckOptions& opt) {
    Rng rng(opt.seed + 4);
    const std::size_t m = 500, r = 5;
    double diag = 0.0, off = 0.0;
    const int draws = 20;
    for (int d = 0; d < draws; ++d) {
        const FactorPair pair = sample_random_factors(rng, m, m, r);
        const Matrix gram = matmul_at_b(pair.u, pair.u);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < r; ++j) (i == j ? diag : off) += gram(i, j);
    }
    diag /= draws * r;
    off /= draws * r * (r - 1);
    const bool ok = diag >= 0.45 && diag <= 0.55 && std::abs(off) <= 0.05;
    return {"random-factor-calibration", ok, "mean diag(UᵀU) " + fmt(diag) + ", mean off-diagonal " + fmt(off)};
}

inline SuiteResult update_equivalence(const SelfCheckOptions& opt) {
    Rng rng(opt.seed + 5);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t m = 1 + rng.next_u64() % 10;
        const std::size_t n = 1 + rng.next_u64() % 10;
        const std::size_t r = 1 + rng.next_u64() % std::min(m, n);
        const Matrix w = gaussian(rng, m, n, 1.0);
        const FactorPair pair = sample_random_factors(rng, m, n, r);
        const Matrix du = gaussian(rng, m, r, 0.1);
        const Matrix dv = gaussian(rng, n, r, 0.1);
        worst = std::max(worst, relative_difference(apply_factor_update(w, pair, du, dv),
                                                    apply_factor_difference(w, pair, du, dv)));
    }
    return {"update-equivalence", worst <= 1e-14, "max relative difference " + fmt(worst)};
}

inline SuiteResult svd_projection(const SelfCheckOptions& opt) {
    Rng rng(opt.seed + 6);
    const Matrix g = gaussian(rng, 8, 6, 1.0);
    const SvdResult svd = truncated_svd(g, 3);
    const double ortho = std::max(relative_difference(identity(3), matmul_at_b(svd.left, svd.left)),
                                  relative_difference(identity(3), matmul_at_b(svd.right, svd.right)));
    bool sorted = true;
    for (std::size_t k = 1; k < svd.singular.size(); ++k) sorted = sorted && svd.singular[k] <= svd.singular[k - 1];
    Matrix approx(8, 6);
    for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t i = 0; i < 8; ++i)
            for (std::size_t j = 0; j < 6; ++j) approx(i, j) += svd.left(i, k) * svd.singular[k] * svd.right(j, k);
    const double proj = frobenius_norm(sub(effective_gradient(g, svd_factors(g, 3)), approx));
    const bool ok = ortho <= 1e-8 && sorted && proj <= 1e-8;
    return {"svd-projection", ok, "orthonormality " + fmt(ortho) + ", projection error " + fmt(proj)};
}

inline SuiteResult optimizer_recursions(const SelfCheckOptions&) {
    OptimizerSpec mom = OptimizerSpec::defaults(OptimizerKind::Momentum);
    mom.learning_rate = 0.1;
    const Matrix g{{1.0, -2.0}};
    OptimizerState st = init_state(mom, 1, 2);
    double worst = 0.0;
    double geometric = 0.0;
    for (int k = 1; k <= 10; ++k) {
        auto [d, next] = compute_delta(mom, std::move(st), g);
        st = std::move(next);
        geometric = geometric * mom.momentum + 1.0;
        worst = std::max(worst, relative_difference(scale(g, -mom.learning_rate * geometric), *st.velocity));
    }
    OptimizerSpec adam = OptimizerSpec::defaults(OptimizerKind::Adam);
    adam.learning_rate = 0.001;
    auto [ad, ast] = compute_delta(adam, init_state(adam, 1, 2), g);
    const double sign_err = std::max(std::abs(ad.delta(0, 0) + 0.001) / 0.001, std::abs(ad.delta(0, 1) - 0.001) / 0.001);
    const bool ok = worst <= 1e-12 && sign_err <= 1e-4;
    return {"optimizer-recursions", ok, "momentum closed form " + fmt(worst) + ", adam first step " + fmt(sign_err)};
}

inline SuiteResult memory_model_check(const SelfCheckOptions&) {
    const LayerDims square{{1000, 1000}};
    const auto mom = OptimizerSpec::defaults(OptimizerKind::Momentum);
    const auto adam = OptimizerSpec::defaults(OptimizerKind::Adam);
    const std::size_t rm = crossover_rank(square, mom);
    const std::size_t ra = crossover_rank(square, adam);
    bool ok = rm == 250 && ra == 333;
    for (const auto* spec : {&mom, &adam}) {
        const std::size_t full = full_rank_memory(square, *spec).total_slots;
        const std::size_t r = crossover_rank(square, *spec);
        ok = ok && low_rank_memory(square, *spec, r).total_slots <= full &&
             low_rank_memory(square, *spec, r + 1).total_slots > full;
    }
    return {"memory-model", ok, "crossover momentum " + std::to_string(rm) + ", adam " + std::to_string(ra)};
}

inline SuiteResult first_order_prediction(const SelfCheckOptions& opt) {
    Rng rng(opt.seed + 7);
    ToyInstance inst = sample_problem(rng, 10);
    OptimizerSpec gd = OptimizerSpec::defaults(OptimizerKind::GradientDescent);
    gd.learning_rate = 1e-5;
    Matrix w = inst.initial_w;
    OptimizerState su = init_state(gd, 10, 3), sv = init_state(gd, 10, 3);
    int inside = 0;
    const int steps = 50;
    for (int s = 0; s < steps; ++s) {
        const Matrix g = loss_gradient(inst.problem, w);
        LowRankStepResult res = low_rank_step(w, g, ProjectionMethod::Random, 3, gd, std::move(su), std::move(sv), rng);
        const double realized = loss(inst.problem, res.w) - loss(inst.problem, w);
        const double ratio = realized / res.report.predicted_loss_delta;
        if (ratio >= 0.9 && ratio <= 1.1) ++inside;
        w = std::move(res.w);
        su = std::move(res.state_u);
        sv = std::move(res.state_v);
    }
    return {"first-order-prediction", inside >= steps * 95 / 100,
            std::to_string(inside) + "/" + std::to_string(steps) + " steps within [0.9, 1.1]"};
}

}  // namespace selfcheck_detail

inline std::vector<SuiteResult> run_selfcheck(const SelfCheckOptions& options = {}) {
    using Suite = std::function<SuiteResult(const SelfCheckOptions&)>;
    namespace sd = selfcheck_detail;
    const std::vector<std::pair<const char*, Suite>> suites = {
        {"toy-gradient", sd::toy_gradient},
        {"factor-chain-rule", sd::factor_chain_rule},
        {"effective-gradient-identity", sd::effective_gradient_identity},
        {"descent-sign", sd::descent_sign},
        {"random-factor-calibration", sd::random_factor_calibration},
        {"update-equivalence", sd::update_equivalence},
        {"svd-projection", sd::svd_projection},
        {"optimizer-recursions", sd::optimizer_recursions},
        {"memory-model", sd::memory_model_check},
        {"first-order-prediction", sd::first_order_prediction},
    };
    std::vector<SuiteResult> results;
    for (const auto& [name, suite] : suites) {
        const auto start = std::chrono::steady_clock::now();
        SuiteResult r;
        try {
            r = suite(options);
        } catch (const std::exception& e) {
            r.passed = false;
            r.detail = std::string("exception: ") + e.what();
        }
        r.name = name;
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        results.push_back(std::move(r));
    }
    return results;
}

}  // namespace lowrank
