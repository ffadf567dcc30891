#include "delicate/chem/fingerprint.hpp"

#include <algorithm>
#include <bit>

#include "delicate/error.hpp"

namespace delicate::chem {

namespace {

// Atomic numbers for the supported elements; part of the round-0 invariant.
int atomic_number(const std::string& element) {
    if (element == "H") return 1;
    if (element == "B") return 5;
    if (element == "C") return 6;
    if (element == "N") return 7;
    if (element == "O") return 8;
    if (element == "F") return 9;
    if (element == "P") return 15;
    if (element == "S") return 16;
    if (element == "Cl") return 17;
    if (element == "Br") return 35;
    if (element == "I") return 53;
    throw data_error("no atomic number for element " + element);
}

constexpr std::uint64_t kSeed = 0x5D1CE4A2B3C4D5E6ULL;

}  // namespace

std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
}

std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) {
    return mix64(h ^ (v + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2)));
}

Fingerprint::Fingerprint(int width, int radius) : width_(width), radius_(radius) {
    if (width <= 0 || (width & (width - 1)) != 0)
        throw config_error("fingerprint width must be a power of two, got " + std::to_string(width));
    words_.assign(width / 64 == 0 ? 1 : width / 64, 0);
}

void Fingerprint::set(std::uint64_t identifier) {
    std::uint64_t bit = identifier & static_cast<std::uint64_t>(width_ - 1);
    words_[bit >> 6] |= 1ULL << (bit & 63);
}

bool Fingerprint::test(int bit) const {
    return (words_[bit >> 6] >> (bit & 63)) & 1ULL;
}

int Fingerprint::popcount() const {
    int total = 0;
    for (std::uint64_t w : words_) total += std::popcount(w);
    return total;
}

Fingerprint ecfp(const MolGraph& mol, int radius, int width) {
    Fingerprint fp(width, radius);
    const int n = mol.atom_count();

    std::vector<std::vector<std::pair<int, int>>> adj(n);  // (bond order code, neighbor)
    for (const auto& bond : mol.bonds) {
        int code = static_cast<int>(bond.order * 2.0);  // 2, 3 (aromatic), 4, 6
        adj[bond.a].push_back({code, bond.b});
        adj[bond.b].push_back({code, bond.a});
    }

    std::vector<std::uint64_t> ids(n);
    for (int i = 0; i < n; ++i) {
        const Atom& atom = mol.atoms[i];
        std::uint64_t h = kSeed;
        h = hash_combine(h, atomic_number(atom.element));
        h = hash_combine(h, adj[i].size());
        h = hash_combine(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(atom.charge)));
        h = hash_combine(h, atom.implicit_h);
        h = hash_combine(h, atom.aromatic ? 1 : 0);
        ids[i] = h;
        fp.set(h);
    }

    for (int round = 1; round <= radius; ++round) {
        std::vector<std::uint64_t> next(n);
        for (int i = 0; i < n; ++i) {
            std::vector<std::pair<int, std::uint64_t>> env;
            env.reserve(adj[i].size());
            for (auto [code, nb] : adj[i]) env.push_back({code, ids[nb]});
            std::sort(env.begin(), env.end());
            std::uint64_t h = hash_combine(kSeed, round);
            h = hash_combine(h, ids[i]);
            for (auto [code, nb_id] : env) {
                h = hash_combine(h, code);
                h = hash_combine(h, nb_id);
            }
            next[i] = h;
            fp.set(h);
        }
        ids = std::move(next);
    }
    return fp;
}

double tanimoto(const Fingerprint& a, const Fingerprint& b) {
    if (a.width() != b.width())
        throw dimension_error("fingerprint width mismatch: " + std::to_string(a.width()) + " vs " +
                              std::to_string(b.width()));
    int inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.words().size(); ++i) {
        inter += std::popcount(a.words()[i] & b.words()[i]);
        uni += std::popcount(a.words()[i] | b.words()[i]);
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace delicate::chem
