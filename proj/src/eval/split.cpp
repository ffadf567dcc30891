#include "delicate/eval/split.hpp"

#include "delicate/error.hpp"
#include "delicate/rng.hpp"

namespace delicate::eval {

SplitPlan split(const TaskDataset& dataset, std::uint64_t seed, int fold) {
    const int n = dataset.size();
    if (n < 20) throw data_error("dataset too small to split: " + std::to_string(n) + " records");
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed + static_cast<std::uint64_t>(fold), Rng::kShuffle);
    rng.shuffle(order);
    int n_train = static_cast<int>(n * 0.8);
    int n_val = static_cast<int>(n * 0.1);
    SplitPlan plan;
    plan.train.assign(order.begin(), order.begin() + n_train);
    plan.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
    plan.test.assign(order.begin() + n_train + n_val, order.end());
    return plan;
}

}  // namespace delicate::eval
