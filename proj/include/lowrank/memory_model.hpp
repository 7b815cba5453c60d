#pragma once

// Analytical training-memory accounting in scalar slots.
//
// Full-rank training keeps the weights, the optimizer accumulators for every
// weight entry, and one transient gradient buffer. Low-rank training keeps the
// weights, the factors U and V per matrix, the optimizer accumulators for the
// factors only, and the same transient gradient. Activations and workspace are
// outside the model.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lowrank/optimizer.hpp"

namespace lowrank {

struct LayerShape {
    std::size_t rows = 0;
    std::size_t cols = 0;
    friend bool operator==(const LayerShape&, const LayerShape&) = default;
};

using LayerDims = std::vector<LayerShape>;

struct MemoryOptions {
    std::size_t bytes_per_slot = 8;
    bool include_gradient = true;
};

struct MemoryReport {
    std::size_t weight_slots = 0;
    std::size_t optimizer_state_slots = 0;
    std::size_t factor_slots = 0;
    std::size_t factor_state_slots = 0;
    std::size_t transient_gradient_slots = 0;
    std::size_t total_slots = 0;
    std::size_t total_bytes = 0;

    friend bool operator==(const MemoryReport&, const MemoryReport&) = default;
};

namespace detail {

inline void validate_dims(const LayerDims& dims) {
    for (const auto& layer : dims)
        if (layer.rows == 0 || layer.cols == 0)
            throw std::invalid_argument("memory model: layer dimensions must be positive");
}

inline void validate_options(const MemoryOptions& options) {
    if (options.bytes_per_slot != 4 && options.bytes_per_slot != 8)
        throw std::invalid_argument("memory model: bytes per slot must be 4 or 8");
}

inline std::size_t sum_mn(const LayerDims& dims) {
    std::size_t s = 0;
    for (const auto& l : dims) s += l.rows * l.cols;
    return s;
}

inline std::size_t sum_m_plus_n(const LayerDims& dims) {
    std::size_t s = 0;
    for (const auto& l : dims) s += l.rows + l.cols;
    return s;
}

inline std::size_t smallest_side(const LayerDims& dims) {
    std::size_t s = std::numeric_limits<std::size_t>::max();
    for (const auto& l : dims) s = std::min({s, l.rows, l.cols});
    return dims.empty() ? 0 : s;
}

inline MemoryReport finish(MemoryReport r, const MemoryOptions& options) {
    r.total_slots = r.weight_slots + r.optimizer_state_slots + r.factor_slots + r.factor_state_slots +
                    r.transient_gradient_slots;
    r.total_bytes = r.total_slots * options.bytes_per_slot;
    return r;
}

}  // namespace detail

inline MemoryReport full_rank_memory(const LayerDims& dims, const OptimizerSpec& optimizer,
                                     const MemoryOptions& options = {}) {
    detail::validate_dims(dims);
    detail::validate_options(options);
    MemoryReport r;
    r.weight_slots = detail::sum_mn(dims);
    for (const auto& l : dims) r.optimizer_state_slots += state_slot_count(optimizer, l.rows, l.cols);
    r.transient_gradient_slots = options.include_gradient ? r.weight_slots : 0;
    return detail::finish(r, options);
}

// rank 0 is accepted as the degenerate lower bound (weights + gradient only).
inline MemoryReport low_rank_memory(const LayerDims& dims, const OptimizerSpec& optimizer, std::size_t rank,
                                    const MemoryOptions& options = {}) {
    detail::validate_dims(dims);
    detail::validate_options(options);
    for (const auto& l : dims)
        if (rank > std::min(l.rows, l.cols))
            throw std::invalid_argument("low_rank_memory: rank " + std::to_string(rank) + " exceeds layer " +
                                        std::to_string(l.rows) + "x" + std::to_string(l.cols));
    MemoryReport r;
    r.weight_slots = detail::sum_mn(dims);
    r.factor_slots = rank * detail::sum_m_plus_n(dims);
    r.factor_state_slots = state_multiplier(optimizer.kind) * r.factor_slots;
    r.transient_gradient_slots = options.include_gradient ? r.weight_slots : 0;
    return detail::finish(r, options);
}

// Slots added per unit of rank: (1 + k)·Σ(m + n).
inline std::size_t low_rank_slope(const LayerDims& dims, const OptimizerSpec& optimizer) {
    return (1 + state_multiplier(optimizer.kind)) * detail::sum_m_plus_n(dims);
}

// Largest rank at which low-rank training needs no more slots than full-rank
// training: floor(k·Σmn / ((1 + k)·Σ(m + n))), capped at the smallest layer side.
inline std::size_t crossover_rank(const LayerDims& dims, const OptimizerSpec& optimizer) {
    detail::validate_dims(dims);
    if (dims.empty()) throw std::invalid_argument("crossover_rank: no layers");
    const std::size_t k = state_multiplier(optimizer.kind);
    if (k == 0) throw std::invalid_argument("crossover_rank: gradient descent keeps no optimizer state to save");
    const std::size_t r = (k * detail::sum_mn(dims)) / ((1 + k) * detail::sum_m_plus_n(dims));
    return std::min(r, detail::smallest_side(dims));
}

}  // namespace lowrank
