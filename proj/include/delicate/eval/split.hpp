#pragma once

#include <cstdint>
#include <vector>

#include "delicate/eval/dataset.hpp"

namespace delicate::eval {

// Per-fold record assignment: a seeded shuffle followed by a contiguous
// 80/10/10 cut. Folds rotate the shuffle seed deterministically
// (seed + fold).
struct SplitPlan {
    std::vector<int> train;
    std::vector<int> val;
    std::vector<int> test;
};

inline constexpr int kFoldCount = 3;

SplitPlan split(const TaskDataset& dataset, std::uint64_t seed, int fold);

}  // namespace delicate::eval
