#pragma once

#include <string>
#include <vector>

#include "delicate/chem/vocab.hpp"

namespace delicate::chem {

// Vocab-id sequence: begins with CLS, ends with SEP, no interior padding.
struct TokenSeq {
    std::vector<int> ids;

    int length() const { return static_cast<int>(ids.size()); }
};

// Splits a SMILES string by greedy longest match:
//   - a bracket expression `[...]` is one token,
//   - the two-letter organic-subset atoms Cl and Br are single tokens,
//   - `%nn` ring closures are single tokens,
//   - every other character stands alone.
// Throws a data error on an unterminated bracket or a bare `%`.
std::vector<std::string> scan_tokens(const std::string& smiles);

// Scan, map through `vocab` (unknown tokens become UNK), wrap in CLS/SEP.
// `max_len` of 0 means unlimited; otherwise sequences longer than `max_len`
// (CLS/SEP included) are a data error.
TokenSeq tokenize(const std::string& smiles, const Vocab& vocab, int max_len = 0);

// Concatenation of non-special tokens. Inverse of tokenize for inputs that
// contain no UNK.
std::string detokenize(const TokenSeq& seq, const Vocab& vocab);

}  // namespace delicate::chem
