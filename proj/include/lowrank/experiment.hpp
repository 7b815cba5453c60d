#pragma once

// Deterministic training loops on the toy objective, the optimizer ×
// projection grid, and CSV output.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "lowrank/lowrank_gradient.hpp"
#include "lowrank/optimizer.hpp"
#include "lowrank/random.hpp"
#include "lowrank/toy_objective.hpp"

namespace lowrank {

struct ExperimentConfig {
    std::size_t dim = 100;
    std::size_t rank = 5;
    std::size_t steps = 50000;
    OptimizerSpec optimizer = OptimizerSpec::defaults(OptimizerKind::GradientDescent);
    ProjectionMethod projection = ProjectionMethod::None;
    std::uint64_t seed = 1;
    std::size_t report_every = 100;
    bool reset_factor_state_each_step = false;

    void validate() const {
        if (dim == 0) throw std::invalid_argument("config: dim must be at least 1");
        if (steps == 0) throw std::invalid_argument("config: steps must be at least 1");
        if (report_every == 0) throw std::invalid_argument("config: report_every must be at least 1");
        if (projection != ProjectionMethod::None && (rank == 0 || rank > dim))
            throw std::invalid_argument("config: rank must lie in [1, dim] for low-rank projection");
        optimizer.validate();
    }
};

struct TrainRecord {
    std::size_t step = 0;
    double loss = 0.0;
    double predicted_delta = 0.0;      // first-order prediction of the step; 0 without projection
    double cumulative_wall_time = 0.0; // seconds spent in gradient + update so far
};

struct RunResult {
    ExperimentConfig config;
    std::vector<TrainRecord> records;
    double final_loss = 0.0;
    double total_wall_time = 0.0;
};

class DivergenceError : public std::runtime_error {
public:
    DivergenceError(std::size_t step, const std::string& what)
        : std::runtime_error("diverged at step " + std::to_string(step) + ": " + what), step_{step} {}
    [[nodiscard]] std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

inline constexpr double divergence_loss_limit = 1e12;

inline RunResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    using clock = std::chrono::steady_clock;

    Rng rng(config.seed);
    ToyInstance instance = sample_problem(rng, config.dim);
    const ToyProblem& problem = instance.problem;
    Matrix w = std::move(instance.initial_w);

    const OptimizerSpec& spec = config.optimizer;
    const bool projected = config.projection != ProjectionMethod::None;
    OptimizerState state_w;
    OptimizerState state_u;
    OptimizerState state_v;
    if (projected) {
        state_u = init_state(spec, config.dim, config.rank);
        state_v = init_state(spec, config.dim, config.rank);
    } else {
        state_w = init_state(spec, config.dim, config.dim);
    }

    auto checked_loss = [&](std::size_t step) {
        double value;
        try {
            value = loss(problem, w);
        } catch (const std::overflow_error& e) {
            throw DivergenceError(step, e.what());
        }
        if (!std::isfinite(value) || value > divergence_loss_limit)
            throw DivergenceError(step, "loss " + std::to_string(value));
        return value;
    };

    RunResult result;
    result.config = config;
    result.records.reserve(config.steps / config.report_every + 2);
    result.records.push_back({0, checked_loss(0), 0.0, 0.0});

    double elapsed = 0.0;
    for (std::size_t step = 1; step <= config.steps; ++step) {
        const auto start = clock::now();
        Matrix g;
        try {
            g = loss_gradient(problem, w);
        } catch (const std::overflow_error& e) {
            throw DivergenceError(step, e.what());
        }

        double predicted = 0.0;
        if (!projected) {
            auto [delta, next] = compute_delta(spec, std::move(state_w), g);
            add_in_place(w, delta.delta);
            state_w = std::move(next);
        } else {
            if (config.reset_factor_state_each_step) {
                state_u = init_state(spec, config.dim, config.rank);
                state_v = init_state(spec, config.dim, config.rank);
            }
            LowRankStepResult stepped = low_rank_step(w, g, config.projection, config.rank, spec,
                                                      std::move(state_u), std::move(state_v), rng);
            w = std::move(stepped.w);
            state_u = std::move(stepped.state_u);
            state_v = std::move(stepped.state_v);
            predicted = stepped.report.predicted_loss_delta;
        }
        elapsed += std::chrono::duration<double>(clock::now() - start).count();

        if (step % config.report_every == 0 || step == config.steps)
            result.records.push_back({step, checked_loss(step), predicted, elapsed});
    }

    result.final_loss = result.records.back().loss;
    result.total_wall_time = elapsed;
    return result;
}

struct RunOutcome {
    std::optional<RunResult> result;
    std::string error;  // empty on success

    [[nodiscard]] bool ok() const noexcept { return result.has_value(); }
};

// Runs every config; failures are captured per run. Results keep input order.
inline std::vector<RunOutcome> run_grid(const std::vector<ExperimentConfig>& configs,
                                        unsigned threads = std::thread::hardware_concurrency()) {
    std::vector<RunOutcome> outcomes(configs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < configs.size(); i = next++) {
            try {
                outcomes[i].result = run_experiment(configs[i]);
            } catch (const std::exception& e) {
                outcomes[i].error = e.what();
            }
        }
    };
    const std::size_t pool = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(configs.size(), 1));
    if (pool == 1) {
        worker();
        return outcomes;
    }
    std::vector<std::jthread> workers;
    workers.reserve(pool);
    for (std::size_t t = 0; t < pool; ++t) workers.emplace_back(worker);
    workers.clear();  // joins
    return outcomes;
}

struct ToyProfile {
    std::size_t dim;
    std::size_t rank;
    std::size_t steps;
    std::size_t report_every;
};

inline constexpr ToyProfile full_profile{100, 5, 50000, 100};
inline constexpr ToyProfile fast_profile{30, 5, 5000, 100};

// The 3×3 optimizer × projection grid, optimizer-major.
inline std::vector<ExperimentConfig> toy_grid(const ToyProfile& profile, std::uint64_t seed) {
    std::vector<ExperimentConfig> configs;
    for (auto kind : {OptimizerKind::GradientDescent, OptimizerKind::Momentum, OptimizerKind::Adam}) {
        for (auto method : {ProjectionMethod::None, ProjectionMethod::Random, ProjectionMethod::Svd}) {
            ExperimentConfig c;
            c.dim = profile.dim;
            c.rank = profile.rank;
            c.steps = profile.steps;
            c.report_every = profile.report_every;
            c.optimizer = OptimizerSpec::defaults(kind);
            c.projection = method;
            c.seed = seed;
            configs.push_back(c);
        }
    }
    return configs;
}

inline constexpr const char* results_csv_header =
    "optimizer,projection,dim,rank,seed,step,loss,predicted_delta,wall_time_s";

// %.17g round-trips every double through strtod.
inline std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline void write_results_csv(const std::vector<RunResult>& results, std::ostream& out) {
    out << results_csv_header << '\n';
    for (const auto& run : results) {
        const auto& c = run.config;
        const std::size_t rank = c.projection == ProjectionMethod::None ? 0 : c.rank;
        for (const auto& rec : run.records) {
            out << to_string(c.optimizer.kind) << ',' << to_string(c.projection) << ',' << c.dim << ',' << rank
                << ',' << c.seed << ',' << rec.step << ',' << format_double(rec.loss) << ','
                << format_double(rec.predicted_delta) << ',' << format_double(rec.cumulative_wall_time) << '\n';
        }
    }
}

inline void write_results_csv(const std::vector<RunResult>& results, const std::string& path) {
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_results_csv(results, file);
    file.flush();
    if (!file) throw std::runtime_error("write to '" + path + "' failed");
}

inline std::string format_summary(const std::vector<RunResult>& results) {
    std::ostringstream out;
    out << std::left << std::setw(10) << "optimizer" << std::setw(12) << "projection" << std::setw(6) << "dim"
        << std::setw(6) << "rank" << std::setw(8) << "seed" << std::right << std::setw(16) << "final_loss"
        << std::setw(14) << "time_s" << '\n';
    for (const auto& run : results) {
        const auto& c = run.config;
        out << std::left << std::setw(10) << to_string(c.optimizer.kind) << std::setw(12) << to_string(c.projection)
            << std::setw(6) << c.dim << std::setw(6) << (c.projection == ProjectionMethod::None ? 0 : c.rank)
            << std::setw(8) << c.seed << std::right << std::setw(16) << std::scientific << std::setprecision(5)
            << run.final_loss << std::setw(14) << std::fixed << std::setprecision(3) << run.total_wall_time << '\n';
    }
    return out.str();
}

}  // namespace lowrank
