#pragma once

// Command-line front end: `run-toy`, `memory-table`, `selfcheck`.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime or numeric
// failure. Everything is routed through caller-supplied streams so the
// commands can be driven in-process by tests.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lowrank/lowrank.hpp"

namespace lowrank::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_usage = 1;
inline constexpr int exit_failure = 2;

struct CliHooks {
    bool inject_selfcheck_fault = false;
};

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Raw flag values; unset options fall back to the config file, then defaults.
struct RunToyArgs {
    std::string config_path;
    std::string out_path;
    std::optional<std::size_t> dim, rank, steps, report_every;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> optimizer, projection, adam_bias_mode;
    std::optional<double> learning_rate;
    bool fast = false;
    bool reset_factor_state = false;
};

struct MemoryTableArgs {
    std::string config_path;
    std::string out_path;
    std::optional<std::size_t> dim, max_rank, rank_step, bytes_per_slot;
    std::vector<std::string> layers;
    bool exclude_gradient = false;
};

struct SelfCheckArgs {
    std::uint64_t seed = 1;
};

namespace detail {

using nlohmann::json;

inline json load_config(const std::string& path, const std::set<std::string>& allowed) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read config file '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw UsageError("config file '" + path + "': " + e.what());
    }
    if (!doc.is_object()) throw UsageError("config file '" + path + "': top level must be an object");
    for (const auto& [key, _] : doc.items())
        if (!allowed.contains(key)) throw UsageError("config file '" + path + "': unknown key '" + key + "'");
    return doc;
}

template <typename T>
void take(const json& doc, const char* key, std::optional<T>& slot) {
    if (slot || !doc.contains(key)) return;
    try {
        slot = doc.at(key).get<T>();
    } catch (const json::exception& e) {
        throw UsageError(std::string("config key '") + key + "': " + e.what());
    }
}

inline std::vector<ExperimentConfig> build_toy_configs(const RunToyArgs& args) {
    RunToyArgs a = args;
    std::optional<double> momentum, beta1, beta2, epsilon;
    std::optional<bool> reset, fast;
    if (!a.config_path.empty()) {
        const json doc = load_config(a.config_path,
                                     {"dim", "rank", "steps", "seed", "optimizer", "projection", "learning_rate",
                                      "momentum", "beta1", "beta2", "epsilon", "adam_bias_mode", "report_every",
                                      "reset_factor_state_each_step", "fast"});
        take(doc, "dim", a.dim);
        take(doc, "rank", a.rank);
        take(doc, "steps", a.steps);
        take(doc, "seed", a.seed);
        take(doc, "optimizer", a.optimizer);
        take(doc, "projection", a.projection);
        take(doc, "learning_rate", a.learning_rate);
        take(doc, "adam_bias_mode", a.adam_bias_mode);
        take(doc, "report_every", a.report_every);
        take(doc, "momentum", momentum);
        take(doc, "beta1", beta1);
        take(doc, "beta2", beta2);
        take(doc, "epsilon", epsilon);
        take(doc, "reset_factor_state_each_step", reset);
        take(doc, "fast", fast);
    }

    const ToyProfile profile = (a.fast || fast.value_or(false)) ? fast_profile : full_profile;
    std::vector<OptimizerKind> kinds{OptimizerKind::GradientDescent, OptimizerKind::Momentum, OptimizerKind::Adam};
    std::vector<ProjectionMethod> methods{ProjectionMethod::None, ProjectionMethod::Random, ProjectionMethod::Svd};
    try {
        if (a.optimizer) kinds = {parse_optimizer_kind(*a.optimizer)};
        if (a.projection) methods = {parse_projection_method(*a.projection)};
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }

    std::vector<ExperimentConfig> configs;
    for (auto kind : kinds) {
        for (auto method : methods) {
            ExperimentConfig c;
            c.dim = a.dim.value_or(profile.dim);
            c.rank = a.rank.value_or(profile.rank);
            c.steps = a.steps.value_or(profile.steps);
            c.report_every = a.report_every.value_or(profile.report_every);
            c.seed = a.seed.value_or(1);
            c.projection = method;
            c.reset_factor_state_each_step = a.reset_factor_state || reset.value_or(false);
            c.optimizer = OptimizerSpec::defaults(kind);
            if (a.learning_rate) c.optimizer.learning_rate = *a.learning_rate;
            if (momentum) c.optimizer.momentum = *momentum;
            if (beta1) c.optimizer.beta1 = *beta1;
            if (beta2) c.optimizer.beta2 = *beta2;
            if (epsilon) c.optimizer.epsilon = *epsilon;
            try {
                if (a.adam_bias_mode) c.optimizer.adam_bias_mode = parse_adam_bias_mode(*a.adam_bias_mode);
                c.validate();
            } catch (const std::invalid_argument& e) {
                throw UsageError(e.what());
            }
            configs.push_back(c);
        }
    }
    return configs;
}

inline LayerShape parse_layer(const std::string& text) {
    const auto x = text.find_first_of("xX");
    try {
        if (x == std::string::npos) throw std::invalid_argument(text);
        std::size_t used_m = 0, used_n = 0;
        const std::string ms = text.substr(0, x), ns = text.substr(x + 1);
        const long long m = std::stoll(ms, &used_m);
        const long long n = std::stoll(ns, &used_n);
        if (used_m != ms.size() || used_n != ns.size() || m <= 0 || n <= 0) throw std::invalid_argument(text);
        return {static_cast<std::size_t>(m), static_cast<std::size_t>(n)};
    } catch (const std::exception&) {
        throw UsageError("invalid layer '" + text + "', expected MxN with positive integers");
    }
}

}  // namespace detail

inline int cmd_run_toy(const RunToyArgs& args, std::ostream& out, std::ostream& err) {
    const std::vector<ExperimentConfig> configs = detail::build_toy_configs(args);
    const std::vector<RunOutcome> outcomes = run_grid(configs);

    std::vector<RunResult> results;
    std::vector<std::string> failures;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (outcomes[i].ok()) {
            results.push_back(*outcomes[i].result);
        } else {
            const auto& c = configs[i];
            failures.push_back(std::string(to_string(c.optimizer.kind)) + "/" + std::string(to_string(c.projection)) +
                               ": " + outcomes[i].error);
        }
    }
    if (!args.out_path.empty()) write_results_csv(results, args.out_path);
    out << format_summary(results);
    for (const auto& f : failures) err << "run failed: " << f << '\n';
    return failures.empty() ? exit_ok : exit_failure;
}

inline int cmd_memory_table(const MemoryTableArgs& args, std::ostream& out, std::ostream&) {
    MemoryTableArgs a = args;
    LayerDims dims;
    std::optional<bool> include_gradient;
    if (!a.config_path.empty()) {
        const auto doc = detail::load_config(
            a.config_path, {"dim", "layers", "max_rank", "rank_step", "bytes_per_slot", "include_gradient"});
        detail::take(doc, "dim", a.dim);
        detail::take(doc, "max_rank", a.max_rank);
        detail::take(doc, "rank_step", a.rank_step);
        detail::take(doc, "bytes_per_slot", a.bytes_per_slot);
        detail::take(doc, "include_gradient", include_gradient);
        if (a.layers.empty() && !a.dim && doc.contains("layers")) {
            try {
                for (const auto& l : doc.at("layers")) {
                    const auto m = l.at(0).get<long long>();
                    const auto n = l.at(1).get<long long>();
                    if (l.size() != 2 || m <= 0 || n <= 0) throw UsageError("config: layers entries must be [m, n] > 0");
                    dims.push_back({static_cast<std::size_t>(m), static_cast<std::size_t>(n)});
                }
            } catch (const nlohmann::json::exception& e) {
                throw UsageError(std::string("config key 'layers': ") + e.what());
            }
        }
    }
    for (const auto& l : a.layers) dims.push_back(detail::parse_layer(l));
    if (a.dim) {
        if (*a.dim == 0) throw UsageError("--dim must be positive");
        dims.push_back({*a.dim, *a.dim});
    }
    if (dims.empty()) throw UsageError("memory-table needs layer dimensions (--dim, --layer or config 'layers')");

    MemoryOptions options;
    options.bytes_per_slot = a.bytes_per_slot.value_or(8);
    options.include_gradient = !a.exclude_gradient && include_gradient.value_or(true);
    if (options.bytes_per_slot != 4 && options.bytes_per_slot != 8) throw UsageError("--bytes-per-slot must be 4 or 8");

    std::size_t limit = dims.front().rows;
    for (const auto& l : dims) limit = std::min({limit, l.rows, l.cols});
    const std::size_t max_rank = a.max_rank.value_or(limit);
    if (max_rank == 0 || max_rank > limit)
        throw UsageError("--max-rank must lie in [1, " + std::to_string(limit) + "]");
    const std::size_t step = a.rank_step.value_or(std::max<std::size_t>(1, max_rank / 20));
    if (step == 0) throw UsageError("--rank-step must be positive");

    std::ostringstream csv;
    csv << "optimizer,mode,rank,slots,bytes\n";
    const OptimizerSpec specs[] = {OptimizerSpec::defaults(OptimizerKind::Momentum),
                                   OptimizerSpec::defaults(OptimizerKind::Adam)};
    for (const auto& spec : specs) {
        const MemoryReport full = full_rank_memory(dims, spec, options);
        for (std::size_t r = step; r <= max_rank; r += step) {
            const MemoryReport low = low_rank_memory(dims, spec, r, options);
            csv << to_string(spec.kind) << ",full," << r << ',' << full.total_slots << ',' << full.total_bytes << '\n';
            csv << to_string(spec.kind) << ",lowrank," << r << ',' << low.total_slots << ',' << low.total_bytes << '\n';
        }
    }
    if (!a.out_path.empty()) {
        std::ofstream file(a.out_path, std::ios::binary | std::ios::trunc);
        if (!file) throw std::runtime_error("cannot open '" + a.out_path + "' for writing");
        file << csv.str();
        if (!file.flush()) throw std::runtime_error("write to '" + a.out_path + "' failed");
    }
    out << csv.str();
    for (const auto& spec : specs)
        out << "# crossover_rank " << to_string(spec.kind) << ' ' << crossover_rank(dims, spec) << '\n';
    return exit_ok;
}

inline int cmd_selfcheck(const SelfCheckArgs& args, std::ostream& out, std::ostream& err, const CliHooks& hooks = {}) {
    SelfCheckOptions options;
    options.seed = args.seed;
    options.inject_fault = hooks.inject_selfcheck_fault;
    const auto results = run_selfcheck(options);
    std::vector<std::string> failed;
    for (const auto& r : results) {
        out << (r.passed ? "PASS " : "FAIL ") << std::left << std::setw(30) << r.name << ' ' << r.detail << " ("
            << std::fixed << std::setprecision(3) << r.seconds << " s)\n";
        if (!r.passed) failed.push_back(r.name);
    }
    if (failed.empty()) return exit_ok;
    err << "selfcheck failed:";
    for (const auto& f : failed) err << ' ' << f;
    err << '\n';
    return exit_failure;
}

// Entry point; `args` excludes the program name.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
                   const CliHooks& hooks = {}) {
    CLI::App app{"Low-rank gradient optimizer toolkit", "lowrank"};
    app.require_subcommand(1);

    RunToyArgs toy;
    auto* run_toy = app.add_subcommand("run-toy", "Run the optimizer x projection grid on the toy objective");
    run_toy->add_option("--config", toy.config_path, "JSON config file")->check(CLI::ExistingFile);
    run_toy->add_option("--out", toy.out_path, "CSV output path");
    run_toy->add_option("--dim", toy.dim, "Matrix dimension D");
    run_toy->add_option("--rank", toy.rank, "Projection rank R");
    run_toy->add_option("--steps", toy.steps, "Training steps per run");
    run_toy->add_option("--seed", toy.seed, "Random seed");
    run_toy->add_option("--report-every", toy.report_every, "Record cadence in steps");
    run_toy->add_option("--optimizer", toy.optimizer, "gd | momentum | adam (default: all)");
    run_toy->add_option("--projection", toy.projection, "none | random | svd (default: all)");
    run_toy->add_option("--lr", toy.learning_rate, "Learning rate override");
    run_toy->add_option("--adam-bias-mode", toy.adam_bias_mode, "standard | paper");
    run_toy->add_flag("--fast", toy.fast, "Small profile (D=30, 5000 steps)");
    run_toy->add_flag("--reset-factor-state", toy.reset_factor_state, "Re-initialize factor optimizer state every step");

    MemoryTableArgs mem;
    auto* memory = app.add_subcommand("memory-table", "Slot accounting for full-rank vs low-rank training");
    memory->add_option("--config", mem.config_path, "JSON config file")->check(CLI::ExistingFile);
    memory->add_option("--out", mem.out_path, "CSV output path");
    memory->add_option("--dim", mem.dim, "Square layer dimension");
    memory->add_option("--layer", mem.layers, "Layer shape MxN (repeatable)");
    memory->add_option("--max-rank", mem.max_rank, "Largest rank in the table");
    memory->add_option("--rank-step", mem.rank_step, "Rank increment");
    memory->add_option("--bytes-per-slot", mem.bytes_per_slot, "4 or 8");
    memory->add_flag("--exclude-gradient", mem.exclude_gradient, "Leave the transient gradient out of the totals");

    SelfCheckArgs check;
    auto* selfcheck = app.add_subcommand("selfcheck", "Run the invariant suites");
    selfcheck->add_option("--seed", check.seed, "Seed for the random instances");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_usage;
    }

    try {
        if (*run_toy) return cmd_run_toy(toy, out, err);
        if (*memory) return cmd_memory_table(mem, out, err);
        return cmd_selfcheck(check, out, err, hooks);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_failure;
    }
}

}  // namespace lowrank::cli
