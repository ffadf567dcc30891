#include "delicate/pretrain/masking.hpp"

#include <algorithm>

#include "delicate/error.hpp"

namespace delicate::pretrain {

using chem::Vocab;

TokenGrid assemble_grid(const std::vector<chem::TokenSeq>& seqs, const std::vector<int>& indices) {
    if (indices.empty()) throw data_error("assemble_grid: empty batch");
    TokenGrid grid;
    grid.batch = static_cast<std::int64_t>(indices.size());
    std::int64_t max_len = 0;
    for (int idx : indices)
        max_len = std::max(max_len, static_cast<std::int64_t>(seqs[idx].length()));
    grid.seq = max_len;
    grid.ids.assign(grid.batch * grid.seq, Vocab::kPad);
    grid.mask.assign(grid.batch * grid.seq, 0);
    for (std::int64_t b = 0; b < grid.batch; ++b) {
        const auto& ids = seqs[indices[b]].ids;
        for (std::size_t s = 0; s < ids.size(); ++s) {
            grid.ids[b * grid.seq + static_cast<std::int64_t>(s)] = ids[s];
            grid.mask[b * grid.seq + static_cast<std::int64_t>(s)] = 1;
        }
    }
    return grid;
}

MaskedBatch mask_batch(const TokenGrid& clean, const Vocab& vocab, Rng& rng, double rate) {
    MaskedBatch out;
    out.grid = clean;
    out.labels.assign(clean.ids.size(), -1);
    const int vocab_size = vocab.size();
    const int content_tokens = vocab_size - Vocab::kNumSpecials;

    auto corrupt = [&](std::int64_t pos) {
        out.labels[pos] = clean.ids[pos];
        double roll = rng.uniform();
        if (roll < 0.8) {
            out.grid.ids[pos] = Vocab::kMask;
        } else if (roll < 0.9 && content_tokens > 0) {
            out.grid.ids[pos] = Vocab::kNumSpecials + static_cast<int>(rng.below(content_tokens));
        }  // else: keep the original token
    };

    for (std::int64_t b = 0; b < clean.batch; ++b) {
        std::vector<std::int64_t> candidates;
        bool any_selected = false;
        for (std::int64_t s = 0; s < clean.seq; ++s) {
            std::int64_t pos = b * clean.seq + s;
            if (!clean.mask[pos]) continue;
            int id = clean.ids[pos];
            if (vocab.is_special(id)) continue;
            candidates.push_back(pos);
            if (rng.uniform() < rate) {
                corrupt(pos);
                any_selected = true;
            }
        }
        if (!any_selected && !candidates.empty())
            corrupt(candidates[rng.below(static_cast<std::uint32_t>(candidates.size()))]);
    }
    return out;
}

}  // namespace delicate::pretrain
