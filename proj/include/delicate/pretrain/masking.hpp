#pragma once

#include <cstdint>
#include <vector>

#include "delicate/chem/descriptors.hpp"
#include "delicate/chem/tokenizer.hpp"
#include "delicate/chem/vocab.hpp"
#include "delicate/rng.hpp"

namespace delicate::pretrain {

// A padded [batch, seq] grid of token ids plus its attention mask.
struct TokenGrid {
    std::int64_t batch = 0;
    std::int64_t seq = 0;
    std::vector<int> ids;             // row-major [batch * seq], PAD-padded
    std::vector<std::uint8_t> mask;   // 1 = real token, 0 = PAD
};

TokenGrid assemble_grid(const std::vector<chem::TokenSeq>& seqs, const std::vector<int>& indices);

// Masked-LM training batch. labels[i] == -1 means position i is not a
// prediction target; otherwise it holds the original token id. Descriptor
// targets are filled by the trainer (normalized, [batch * 16]).
struct MaskedBatch {
    TokenGrid grid;
    std::vector<int> labels;
    std::vector<double> descriptor_targets;

    std::vector<std::int64_t> labeled_rows() const {
        std::vector<std::int64_t> rows;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] >= 0) rows.push_back(static_cast<std::int64_t>(i));
        return rows;
    }
};

// Each non-special position is selected independently with probability
// `rate`; of the selected, 80% are replaced by MASK, 10% by a uniform
// random non-special token, 10% kept. A sequence where nothing was selected
// gets one forced selection at a random non-special position so the loss
// stays defined.
MaskedBatch mask_batch(const TokenGrid& clean, const chem::Vocab& vocab, Rng& rng,
                       double rate = 0.15);

}  // namespace delicate::pretrain
