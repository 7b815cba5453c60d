// One PASS/FAIL line per acceptance criterion; exits non-zero if any fails.
// `--full` runs the training grid at D=100 for 50k steps instead of the quick
// D=30 profile.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "lowrank/lowrank.hpp"
#include "oracles.hpp"

using namespace lowrank;

namespace {

struct Verdict {
    bool passed;
    std::string detail;
};

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

double median(std::vector<double> xs) {
    std::ranges::sort(xs);
    const std::size_t n = xs.size();
    return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

Verdict with_budget(Verdict v, double seconds, double budget) {
    if (seconds >= budget) {
        v.passed = false;
        v.detail += "; runtime " + fmt(seconds) + " s over budget " + fmt(budget) + " s";
    }
    return v;
}

// Analytic gradient vs central differences (h = 1e-6) at 20 points, D = 10.
Verdict gradient_correctness() {
    Rng rng(101);
    double worst = 0.0;
    for (int point = 0; point < 20; ++point) {
        const ToyProblem problem = sample_problem(rng, 10).problem;
        Matrix w = problem.target();
        // keep every entry at least 0.1 away from its target so no partial is near zero
        for (double& x : w.values()) x += (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.1, 0.5);
        const Matrix analytic = loss_gradient(problem, w);
        const Matrix numeric = oracle::central_differences(
            [&](const Matrix& x) { return oracle::toy_loss_extended(problem, x); }, w, 1e-6);
        worst = std::max(worst, oracle::max_entry_relative_error(analytic, numeric));
    }
    return {worst <= 1e-6, "max entry relative error " + fmt(worst)};
}

// U(∇V)ᵀ + (∇U)Vᵀ with ∇U = GV, ∇V = GᵀU equals UUᵀG + GVVᵀ.
Verdict algebraic_identity() {
    Rng rng(202);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t m = 1 + rng.next_u64() % 20;
        const std::size_t n = 1 + rng.next_u64() % 20;
        const std::size_t r = 1 + rng.next_u64() % std::min<std::size_t>({m, n, 5});
        const Matrix g = gaussian(rng, m, n, 1.0);
        const FactorPair pair = sample_random_factors(rng, m, n, r);
        const Matrix via_factors = effective_gradient_from_factor_gradients(pair, factor_gradients(g, pair));
        const Matrix projected = add(matmul(matmul_a_bt(pair.u, pair.u), g), matmul(g, matmul_a_bt(pair.v, pair.v)));
        worst = std::max(worst, relative_difference(via_factors, projected));
    }
    return {worst <= 1e-12, "max relative Frobenius difference " + fmt(worst) + " over 1000 instances"};
}

Verdict descent_sign() {
    Rng rng(303);
    int positive = 0, zero_on_generic = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t m = 1 + rng.next_u64() % 20;
        const std::size_t n = 1 + rng.next_u64() % 20;
        const std::size_t r = 1 + rng.next_u64() % std::min(m, n);
        const Matrix g = gaussian(rng, m, n, 1.0);
        const FactorPair pair = rng.uniform() < 0.5 ? sample_random_factors(rng, m, n, r) : svd_factors(g, r);
        const double lr = std::pow(10.0, rng.uniform(-6.0, 1.0));
        const double d = predicted_loss_delta(g, pair, lr);
        if (d > 0.0) ++positive;
        if (d == 0.0) ++zero_on_generic;
    }
    // vanishing cases: G = 0, or U = 0 and V = 0 together
    const FactorPair pair = sample_random_factors(rng, 7, 5, 2);
    const FactorPair zero_pair(Matrix(7, 2), Matrix(5, 2));
    const Matrix g = gaussian(rng, 7, 5, 1.0);
    const bool zeros = predicted_loss_delta(Matrix(7, 5), pair, 0.1) == 0.0 &&
                       predicted_loss_delta(g, zero_pair, 0.1) == 0.0;
    const FactorPair only_u_zero(Matrix(7, 2), pair.v);
    const bool partial = predicted_loss_delta(g, only_u_zero, 0.1) < 0.0;
    return {positive == 0 && zero_on_generic == 0 && zeros && partial,
            std::to_string(positive) + " positive, " + std::to_string(zero_on_generic) +
                " zero of 1000 generic; vanishing cases " + (zeros && partial ? "exact" : "wrong")};
}

// Realized loss change over the first-order prediction, D=10, R=3, random, GD λ=1e-5.
Verdict first_order_prediction() {
    Rng rng(404);
    ToyInstance inst = sample_problem(rng, 10);
    OptimizerSpec gd = OptimizerSpec::defaults(OptimizerKind::GradientDescent);
    gd.learning_rate = 1e-5;
    Matrix w = inst.initial_w;
    OptimizerState su = init_state(gd, 10, 3), sv = init_state(gd, 10, 3);
    int inside = 0;
    double lo = 1e300, hi = -1e300;
    for (int step = 0; step < 200; ++step) {
        const Matrix g = loss_gradient(inst.problem, w);
        LowRankStepResult res = low_rank_step(w, g, ProjectionMethod::Random, 3, gd, std::move(su), std::move(sv), rng);
        const double realized =
            static_cast<double>(oracle::toy_loss_extended(inst.problem, res.w) - oracle::toy_loss_extended(inst.problem, w));
        const double ratio = realized / res.report.predicted_loss_delta;
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
        if (ratio >= 0.9 && ratio <= 1.1) ++inside;
        w = std::move(res.w);
        su = std::move(res.state_u);
        sv = std::move(res.state_v);
    }
    return {inside >= 190, std::to_string(inside) + "/200 ratios in [0.9, 1.1], range [" + fmt(lo) + ", " +
                               fmt(hi) + "]"};
}

// Mean diagonal and off-diagonal of UᵀU over 100 seeds, m = n = 500, R = 5.
Verdict calibration() {
    double diag = 0.0, off = 0.0;
    std::size_t nd = 0, no = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        Rng rng(seed);
        const FactorPair pair = sample_random_factors(rng, 500, 500, 5);
        const Matrix utu = oracle::triple_loop_product(transpose(pair.u), pair.u);
        for (std::size_t i = 0; i < 5; ++i)
            for (std::size_t j = 0; j < 5; ++j) {
                if (i == j) diag += utu(i, j), ++nd;
                else off += utu(i, j), ++no;
            }
    }
    diag /= static_cast<double>(nd);
    off /= static_cast<double>(no);
    return {diag >= 0.45 && diag <= 0.55 && off >= -0.05 && off <= 0.05,
            "mean diagonal " + fmt(diag) + ", mean off-diagonal " + fmt(off)};
}

Verdict grid_ordering(const ToyProfile& profile) {
    std::vector<ExperimentConfig> configs;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        auto grid = toy_grid(profile, seed);
        configs.insert(configs.end(), grid.begin(), grid.end());
    }
    const auto outcomes = run_grid(configs);

    // [optimizer][projection] → per-seed values
    std::vector<double> final_loss[3][3], step_time[3][3];
    for (const auto& o : outcomes) {
        if (!o.ok()) return {false, "run failed: " + o.error};
        const auto& c = o.result->config;
        const auto oi = static_cast<std::size_t>(c.optimizer.kind);
        const auto pi = static_cast<std::size_t>(c.projection);
        final_loss[oi][pi].push_back(o.result->final_loss);
        step_time[oi][pi].push_back(o.result->total_wall_time / static_cast<double>(c.steps));
    }
    double loss[3][3], time[3][3];
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) loss[i][j] = median(final_loss[i][j]), time[i][j] = median(step_time[i][j]);

    const auto none = static_cast<std::size_t>(ProjectionMethod::None);
    const auto rnd = static_cast<std::size_t>(ProjectionMethod::Random);
    const auto svd = static_cast<std::size_t>(ProjectionMethod::Svd);
    bool ok = true;
    std::ostringstream detail;
    for (auto kind : {OptimizerKind::GradientDescent, OptimizerKind::Momentum}) {
        const auto k = static_cast<std::size_t>(kind);
        const bool ordered = loss[k][none] < loss[k][svd] && loss[k][svd] < loss[k][rnd] &&
                             2.0 * loss[k][svd] <= loss[k][rnd];
        ok = ok && ordered;
        detail << to_string(kind) << " none/svd/random " << fmt(loss[k][none]) << "/" << fmt(loss[k][svd]) << "/"
               << fmt(loss[k][rnd]) << (ordered ? "" : " (order broken)") << "; ";
    }
    const auto adam = static_cast<std::size_t>(OptimizerKind::Adam);
    const double adam_worst = std::max({loss[adam][none], loss[adam][rnd], loss[adam][svd]});
    ok = ok && adam_worst < 1e-3;
    detail << "adam worst " << fmt(adam_worst) << "; ";
    double ratio = 1e300;
    for (std::size_t k = 0; k < 3; ++k) ratio = std::min(ratio, time[k][svd] / time[k][rnd]);
    ok = ok && ratio >= 2.0;
    detail << "svd/random step time >= " << fmt(ratio) << "x";
    return {ok, detail.str()};
}

// Closed forms against exhaustive search over rank.
Verdict memory_model() {
    const LayerDims square{{1000, 1000}};
    const LayerDims mixed{{784, 256}, {256, 128}, {128, 10}};
    const MemoryOptions no_grad{8, false};
    bool ok = true;
    std::ostringstream detail;
    for (const auto* dims : {&square, &mixed}) {
        const std::size_t size = full_rank_memory(*dims, OptimizerSpec::defaults(OptimizerKind::GradientDescent),
                                                  no_grad).total_slots;
        std::size_t mult = 1;
        for (auto kind : {OptimizerKind::GradientDescent, OptimizerKind::Momentum, OptimizerKind::Adam}) {
            const auto spec = OptimizerSpec::defaults(kind);
            ok = ok && full_rank_memory(*dims, spec, no_grad).total_slots == mult * size;
            ok = ok && full_rank_memory(*dims, spec).total_slots == (mult + 1) * size;
            ++mult;
            std::size_t smallest = 1000000;
            for (const auto& l : *dims) smallest = std::min({smallest, l.rows, l.cols});
            const std::size_t base = low_rank_memory(*dims, spec, 0).total_slots;
            const std::size_t slope = low_rank_slope(*dims, spec);
            for (std::size_t r = 0; r <= smallest; ++r)
                ok = ok && low_rank_memory(*dims, spec, r).total_slots == base + r * slope;
            if (kind == OptimizerKind::GradientDescent) continue;
            const std::size_t full = full_rank_memory(*dims, spec).total_slots;
            std::size_t searched = 0;
            for (std::size_t r = 0; r <= smallest; ++r)
                if (low_rank_memory(*dims, spec, r).total_slots <= full) searched = r;
            ok = ok && searched == crossover_rank(*dims, spec);
        }
    }
    const std::size_t rm = crossover_rank(square, OptimizerSpec::defaults(OptimizerKind::Momentum));
    const std::size_t ra = crossover_rank(square, OptimizerSpec::defaults(OptimizerKind::Adam));
    ok = ok && rm == 250 && ra == 333;
    detail << "full 1x/2x/3x, affine in rank, 1000x1000 crossover momentum " << rm << " adam " << ra
           << ", exhaustive search " << (ok ? "agrees" : "disagrees");
    return {ok, detail.str()};
}

Verdict update_equivalence() {
    Rng rng(808);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t m = 1 + rng.next_u64() % 12;
        const std::size_t n = 1 + rng.next_u64() % 12;
        const std::size_t r = 1 + rng.next_u64() % std::min(m, n);
        const Matrix w = gaussian(rng, m, n, 1.0);
        const FactorPair pair = sample_random_factors(rng, m, n, r);
        const Matrix du = gaussian(rng, m, r, 0.1);
        const Matrix dv = gaussian(rng, n, r, 0.1);
        worst = std::max(worst, relative_difference(apply_factor_update(w, pair, du, dv),
                                                    apply_factor_difference(w, pair, du, dv)));
    }
    return {worst <= 1e-14, "max relative difference " + fmt(worst) + " over 1000 instances"};
}

std::string csv_without_wall_time(const std::vector<RunResult>& runs) {
    std::ostringstream csv;
    write_results_csv(runs, csv);
    std::istringstream in(csv.str());
    std::string line, out;
    while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
    return out;
}

Verdict determinism() {
    const auto configs = toy_grid({30, 4, 300, 25}, 9);
    std::vector<RunResult> first, second;
    for (const auto& c : configs) {
        first.push_back(run_experiment(c));
        second.push_back(run_experiment(c));
    }
    std::size_t mismatched = 0;
    for (std::size_t i = 0; i < configs.size(); ++i) {
        const auto& a = first[i].records;
        const auto& b = second[i].records;
        bool same = a.size() == b.size();
        for (std::size_t k = 0; same && k < a.size(); ++k)
            same = std::memcmp(&a[k].loss, &b[k].loss, sizeof(double)) == 0 &&
                   std::memcmp(&a[k].predicted_delta, &b[k].predicted_delta, sizeof(double)) == 0;
        if (!same) ++mismatched;
    }
    const bool csv_same = csv_without_wall_time(first) == csv_without_wall_time(second);
    return {mismatched == 0 && csv_same, std::to_string(mismatched) + "/9 trajectories differ, CSV bodies " +
                                             (csv_same ? "identical" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
    bool full = false;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--full") == 0) full = true;
        else {
            std::cerr << "usage: " << argv[0] << " [--full]\n";
            return 2;
        }
    }

    struct Criterion {
        int id;
        const char* name;
        double budget_s;
        std::function<Verdict()> check;
    };
    const ToyProfile profile = full ? full_profile : fast_profile;
    const std::vector<Criterion> criteria = {
        {1, "gradient-correctness", 1.0, gradient_correctness},
        {2, "algebraic-identity", 5.0, algebraic_identity},
        {3, "descent-sign", 5.0, descent_sign},
        {4, "first-order-prediction", 5.0, first_order_prediction},
        {5, "calibration", 10.0, calibration},
        {6, full ? "grid-ordering-full" : "grid-ordering-fast", full ? 3600.0 : 60.0,
         [&] { return grid_ordering(profile); }},
        {7, "memory-model", 1.0, memory_model},
        {8, "update-equivalence", 5.0, update_equivalence},
        {9, "determinism", 30.0, determinism},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.check();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        v = with_budget(v, seconds, c.budget_s);
        if (!v.passed) ++failures;
        std::cout << (v.passed ? "PASS " : "FAIL ") << c.id << ' ' << c.name << ": " << v.detail << " ("
                  << fmt(seconds) << " s)" << std::endl;
    }
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << '\n';
    return failures == 0 ? 0 : 1;
}
