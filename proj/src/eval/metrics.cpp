#include "delicate/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "delicate/error.hpp"

namespace delicate::eval {

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw dimension_error("roc_auc: scores and labels differ in length");
    std::int64_t n_pos = 0, n_neg = 0;
    for (int label : labels) {
        if (label == 1) ++n_pos;
        else if (label == 0) ++n_neg;
        else throw data_error("roc_auc: labels must be 0 or 1");
    }
    if (n_pos == 0 || n_neg == 0)
        throw data_error("roc_auc: needs at least one positive and one negative");

    // Rank-sum formulation with midranks for ties; equals the pairwise
    // count with half-credit on equal scores.
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        double midrank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k)
            if (labels[order[k]] == 1) pos_rank_sum += midrank;
        i = j + 1;
    }
    double u = pos_rank_sum - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double r2(const std::vector<double>& predictions, const std::vector<double>& targets) {
    if (predictions.size() != targets.size())
        throw dimension_error("r2: predictions and targets differ in length");
    if (targets.size() < 2) throw data_error("r2: needs at least 2 targets");
    double target_mean = mean(targets);
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        ss_res += (targets[i] - predictions[i]) * (targets[i] - predictions[i]);
        ss_tot += (targets[i] - target_mean) * (targets[i] - target_mean);
    }
    if (ss_tot == 0.0) throw data_error("r2: targets have zero variance");
    return 1.0 - ss_res / ss_tot;
}

double mean(const std::vector<double>& values) {
    if (values.empty()) throw data_error("mean of an empty list");
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
}

double sem(const std::vector<double>& values) {
    double m = mean(values);
    double var = 0.0;
    for (double v : values) var += (v - m) * (v - m);
    var /= static_cast<double>(values.size());
    return std::sqrt(var / static_cast<double>(values.size()));
}

}  // namespace delicate::eval
