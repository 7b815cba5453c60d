#include <gtest/gtest.h>

#include "lowrank/memory_model.hpp"

using namespace lowrank;

namespace {
const OptimizerSpec kGd = OptimizerSpec::defaults(OptimizerKind::GradientDescent);
const OptimizerSpec kMomentum = OptimizerSpec::defaults(OptimizerKind::Momentum);
const OptimizerSpec kAdam = OptimizerSpec::defaults(OptimizerKind::Adam);

std::size_t brute_force_crossover(const LayerDims& dims, const OptimizerSpec& spec) {
    const std::size_t full = full_rank_memory(dims, spec).total_slots;
    std::size_t limit = dims[0].rows;
    for (const auto& l : dims) limit = std::min({limit, l.rows, l.cols});
    std::size_t best = 0;
    for (std::size_t r = 0; r <= limit; ++r)
        if (low_rank_memory(dims, spec, r).total_slots <= full) best = r;
    return best;
}
}  // namespace

TEST(FullRankMemory, AdamTenByTen) {
    const MemoryReport r = full_rank_memory({{10, 10}}, kAdam);
    EXPECT_EQ(r.weight_slots, 100u);
    EXPECT_EQ(r.optimizer_state_slots, 200u);
    EXPECT_EQ(r.transient_gradient_slots, 100u);
    EXPECT_EQ(r.total_slots, 400u);
    EXPECT_EQ(r.total_bytes, 3200u);
}

TEST(FullRankMemory, Multipliers) {
    const LayerDims dims{{30, 40}, {7, 9}};
    EXPECT_EQ(full_rank_memory(dims, kGd).optimizer_state_slots, 0u);
    const MemoryReport m = full_rank_memory(dims, kMomentum);
    EXPECT_EQ(m.optimizer_state_slots, m.weight_slots);
    const MemoryOptions no_grad{8, false};
    EXPECT_EQ(full_rank_memory(dims, kGd, no_grad).total_slots, m.weight_slots);
    EXPECT_EQ(full_rank_memory(dims, kMomentum, no_grad).total_slots, 2 * m.weight_slots);
    EXPECT_EQ(full_rank_memory(dims, kAdam, no_grad).total_slots, 3 * m.weight_slots);
    EXPECT_EQ(full_rank_memory(dims, kAdam, {4, true}).total_bytes, full_rank_memory(dims, kAdam).total_slots * 4);
}

TEST(FullRankMemory, StateMatchesOptimizerSlotCount) {
    const LayerDims dims{{12, 5}, {3, 8}, {20, 20}};
    for (const auto* spec : {&kGd, &kMomentum, &kAdam}) {
        std::size_t expected = 0;
        for (const auto& l : dims) expected += state_slot_count(*spec, l.rows, l.cols);
        EXPECT_EQ(full_rank_memory(dims, *spec).optimizer_state_slots, expected);
    }
}

TEST(LowRankMemory, Components) {
    const MemoryReport r = low_rank_memory({{1000, 1000}}, kAdam, 10);
    EXPECT_EQ(r.weight_slots, 1000000u);
    EXPECT_EQ(r.optimizer_state_slots, 0u);
    EXPECT_EQ(r.factor_slots, 20000u);
    EXPECT_EQ(r.factor_state_slots, 40000u);
    EXPECT_EQ(r.transient_gradient_slots, 1000000u);
    EXPECT_EQ(r.total_slots, r.weight_slots + r.factor_slots + r.factor_state_slots + r.transient_gradient_slots);
}

TEST(LowRankMemory, RankZeroIsWeightsPlusGradient) {
    const MemoryReport r = low_rank_memory({{8, 6}}, kAdam, 0);
    EXPECT_EQ(r.total_slots, 2u * 48u);
}

TEST(LowRankMemory, RankTooLarge) {
    EXPECT_THROW(low_rank_memory({{8, 6}}, kAdam, 7), std::invalid_argument);
    EXPECT_THROW(low_rank_memory({{0, 6}}, kAdam, 1), std::invalid_argument);
    EXPECT_THROW(full_rank_memory({{8, 6}}, kAdam, {3, true}), std::invalid_argument);
}

TEST(LowRankMemory, SquareThousandAdamBreakEven) {
    const LayerDims dims{{1000, 1000}};
    const std::size_t full = full_rank_memory(dims, kAdam).total_slots;
    EXPECT_LT(low_rank_memory(dims, kAdam, 333).total_slots, full);
    EXPECT_GT(low_rank_memory(dims, kAdam, 334).total_slots, full);
}

TEST(CrossoverRank, SquareThousand) {
    const LayerDims dims{{1000, 1000}};
    EXPECT_EQ(crossover_rank(dims, kAdam), 333u);
    EXPECT_EQ(crossover_rank(dims, kMomentum), 250u);
    EXPECT_GT(crossover_rank(dims, kAdam), crossover_rank(dims, kMomentum));
    EXPECT_THROW(crossover_rank(dims, kGd), std::invalid_argument);
    EXPECT_THROW(crossover_rank({}, kAdam), std::invalid_argument);
}

// Properties: monotone and affine in rank; closed form agrees with search.
TEST(MemoryProperty, AffineMonotoneAndCrossover) {
    const std::vector<LayerDims> cases = {
        {{1000, 1000}}, {{640, 2048}, {2048, 640}}, {{100, 37}}, {{512, 512}, {512, 80}, {30, 300}}, {{3, 5}}};
    for (const auto& dims : cases) {
        for (const auto* spec : {&kMomentum, &kAdam}) {
            const std::size_t slope = low_rank_slope(dims, *spec);
            std::size_t limit = dims[0].rows;
            for (const auto& l : dims) limit = std::min({limit, l.rows, l.cols});
            for (std::size_t r = 1; r <= limit; ++r) {
                const std::size_t a = low_rank_memory(dims, *spec, r - 1).total_slots;
                const std::size_t b = low_rank_memory(dims, *spec, r).total_slots;
                ASSERT_GT(b, a);
                ASSERT_EQ(b - a, slope);
            }
            const std::size_t c = crossover_rank(dims, *spec);
            EXPECT_EQ(c, brute_force_crossover(dims, *spec));
            const std::size_t full = full_rank_memory(dims, *spec).total_slots;
            EXPECT_LE(low_rank_memory(dims, *spec, c).total_slots, full);
            if (c < limit) {
                EXPECT_GT(low_rank_memory(dims, *spec, c + 1).total_slots, full);
            }
        }
    }
}
