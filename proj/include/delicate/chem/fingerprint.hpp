#pragma once

#include <cstdint>
#include <vector>

#include "delicate/chem/mol.hpp"

namespace delicate::chem {

// Circular fingerprint bitset. Width is a power of two (default 2048),
// radius counts neighborhood-hashing rounds (default 2, i.e. diameter 4).
class Fingerprint {
public:
    Fingerprint() : Fingerprint(2048, 2) {}
    Fingerprint(int width, int radius);

    void set(std::uint64_t identifier);
    bool test(int bit) const;
    int popcount() const;
    int width() const { return width_; }
    int radius() const { return radius_; }
    const std::vector<std::uint64_t>& words() const { return words_; }

    bool operator==(const Fingerprint& other) const {
        return width_ == other.width_ && words_ == other.words_;
    }

private:
    int width_;
    int radius_;
    std::vector<std::uint64_t> words_;
};

// Stable 64-bit mixing hash (splitmix64 finalizer; fixed constants so
// fingerprints are identical across runs and platforms).
std::uint64_t mix64(std::uint64_t x);
std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v);

// Iterative neighborhood hashing: round-0 identifier per atom from
// (element, degree, charge, implicit_h, aromatic); each round rehashes the
// atom's own identifier with the sorted (bond order, neighbor identifier)
// list. Identifiers from rounds 0..radius fold into the bitset mod width.
Fingerprint ecfp(const MolGraph& mol, int radius = 2, int width = 2048);

// |A & B| / |A | B|; two empty bitsets compare equal, so 1.0.
double tanimoto(const Fingerprint& a, const Fingerprint& b);

}  // namespace delicate::chem
