#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace delicate::corpus {

// Deterministic combinatorial SMILES generator over a small fragment
// grammar: alkyl chains with branches and occasional double bonds, rings of
// size 3-6 with heteroatom substitution, aromatic rings, O/N/S/halogen
// substituents, charged bracket groups, and rare multi-fragment salts.
// Outputs are valid by construction (every candidate is re-parsed before it
// is emitted), deduplicated, and reproducible from the seed.
std::vector<std::string> gen_corpus(std::uint64_t seed, int n);

// Planted-signal virtual-screening set: actives share an aromatic amide
// scaffold family, decoys are drawn from the general grammar with the
// scaffold anchor excluded. Queries and library actives are disjoint.
struct VsSet {
    std::vector<std::string> queries;      // known actives used for scoring
    std::vector<std::string> library;      // mixed actives + decoys
    std::vector<int> active;               // 1 per library entry
};

VsSet gen_vs_set(std::uint64_t seed, int n_queries = 5, int n_library_actives = 30,
                 int n_decoys = 300);

}  // namespace delicate::corpus
