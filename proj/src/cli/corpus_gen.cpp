#include "delicate/cli/corpus_gen.hpp"

#include <unordered_set>

#include "delicate/chem/mol.hpp"
#include "delicate/chem/tokenizer.hpp"
#include "delicate/error.hpp"
#include "delicate/rng.hpp"

namespace delicate::corpus {

namespace {

// One attachment site of a scaffold: the rendered atom token plus how many
// substituents its remaining valence can host.
struct Site {
    std::string token;
    int cap = 0;
    std::string ring_digit;   // emitted right after the token
};

struct Scaffold {
    std::vector<Site> sites;
};

const std::vector<std::string>& substituents() {
    static const std::vector<std::string> subs = {
        "F", "Cl", "Br", "I",
        "O", "N", "S",
        "C", "CC", "CCC", "C(C)C",
        "OC", "C#N",
        "C=O", "C(=O)C", "C(=O)O", "C(=O)N", "C(=O)[O-]",
        "[NH3+]", "[N+](C)(C)C", "[N+](=O)[O-]",
        "S(=O)(=O)O",
        // digit 2: scaffolds hold digit 1 open while branches render; the
        // explicit single bond keeps an aromatic host from fusing with it
        "-c2ccccc2",
    };
    return subs;
}

Scaffold make_chain(Rng& rng) {
    int len = 1 + static_cast<int>(rng.below(6));
    Scaffold s;
    for (int i = 0; i < len; ++i) {
        int chain_bonds = (i == 0 || i == len - 1) ? (len > 1 ? 1 : 0) : 2;
        s.sites.push_back({"C", std::min(2, 4 - chain_bonds - 1), ""});
    }
    // occasionally turn one chain link into a double bond
    if (len >= 2 && rng.uniform() < 0.2) {
        int pos = static_cast<int>(rng.below(len - 1));
        s.sites[pos].token += "=";   // rendered as C=C
        s.sites[pos].cap -= 1;
        s.sites[pos + 1].cap -= 1;
        if (s.sites[pos].cap < 0) s.sites[pos].cap = 0;
        if (s.sites[pos + 1].cap < 0) s.sites[pos + 1].cap = 0;
    }
    return s;
}

Scaffold make_ring(Rng& rng) {
    int size = 3 + static_cast<int>(rng.below(4));
    Scaffold s;
    for (int i = 0; i < size; ++i) s.sites.push_back({"C", i == 0 ? 1 : 2, i == 0 ? "1" : ""});
    s.sites.back().ring_digit = "1";
    // at most one heteroatom, never at the ring-opening atom
    if (size >= 4 && rng.uniform() < 0.5) {
        int pos = 1 + static_cast<int>(rng.below(size - 2));
        const char* het[] = {"O", "N", "S"};
        std::string h = het[rng.below(3)];
        s.sites[pos].token = h;
        s.sites[pos].cap = h == "N" ? 1 : 0;
    }
    return s;
}

Scaffold make_aromatic(Rng& rng) {
    Scaffold s;
    bool pyridine = rng.uniform() < 0.3;
    for (int i = 0; i < 6; ++i) {
        std::string tok = pyridine && i == 3 ? "n" : "c";
        s.sites.push_back({tok, tok == "c" ? 1 : 0, i == 0 || i == 5 ? "1" : ""});
    }
    return s;
}

std::string render(const Scaffold& scaffold, Rng& rng) {
    std::vector<std::vector<std::string>> branches(scaffold.sites.size());
    int decorations = static_cast<int>(rng.below(4));  // 0..3
    for (int d = 0; d < decorations; ++d) {
        std::vector<int> open;
        for (std::size_t i = 0; i < scaffold.sites.size(); ++i)
            if (static_cast<int>(branches[i].size()) < scaffold.sites[i].cap)
                open.push_back(static_cast<int>(i));
        if (open.empty()) break;
        int site = open[rng.below(static_cast<std::uint32_t>(open.size()))];
        const auto& subs = substituents();
        branches[site].push_back(subs[rng.below(static_cast<std::uint32_t>(subs.size()))]);
    }
    std::string out;
    for (std::size_t i = 0; i < scaffold.sites.size(); ++i) {
        const Site& site = scaffold.sites[i];
        bool double_link = !site.token.empty() && site.token.back() == '=';
        out += double_link ? site.token.substr(0, site.token.size() - 1) : site.token;
        out += site.ring_digit;
        for (const auto& b : branches[i]) out += "(" + b + ")";
        if (double_link) out += "=";
    }
    if (rng.uniform() < 0.05) {
        const char* salts[] = {"[NH4+]", "O", "Cl", "C"};
        out += ".";
        out += salts[rng.below(4)];
    }
    return out;
}

std::string generate_one(Rng& rng) {
    double roll = rng.uniform();
    Scaffold s = roll < 0.4 ? make_chain(rng) : roll < 0.7 ? make_ring(rng) : make_aromatic(rng);
    return render(s, rng);
}

void self_check(const std::string& smiles) {
    chem::parse_smiles(smiles);  // throws on any grammar bug
    auto tokens = chem::scan_tokens(smiles);
    std::string joined;
    for (const auto& t : tokens) joined += t;
    if (joined != smiles)
        throw data_error("generator produced a non-roundtripping SMILES: " + smiles);
}

}  // namespace

std::vector<std::string> gen_corpus(std::uint64_t seed, int n) {
    if (n < 1) throw config_error("gen_corpus: n must be >= 1");
    Rng rng(seed, Rng::kCorpus);
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    out.reserve(n);
    long attempts = 0;
    const long max_attempts = 200L * n + 10000L;
    while (static_cast<int>(out.size()) < n) {
        if (++attempts > max_attempts)
            throw data_error("gen_corpus: grammar capacity exhausted after " +
                             std::to_string(attempts) + " attempts for n = " + std::to_string(n));
        std::string candidate = generate_one(rng);
        if (!seen.insert(candidate).second) continue;
        self_check(candidate);
        out.push_back(std::move(candidate));
    }
    return out;
}

VsSet gen_vs_set(std::uint64_t seed, int n_queries, int n_library_actives, int n_decoys) {
    if (n_queries < 1 || n_library_actives < 1 || n_decoys < 1)
        throw config_error("gen_vs_set: all set sizes must be >= 1");
    Rng rng(seed, Rng::kCorpus);

    // Actives: para-substituted aromatic amide family.
    const std::vector<std::string> ring_subs = {"F",  "Cl",     "Br",   "C",  "CC",
                                                "O",  "OC",     "C#N",  "N",  "C(C)C",
                                                "I",  "S",      "CCC"};
    const std::vector<std::string> amide_tails = {"N", "NC", "NCC", "N(C)C", "NCCC", "NC(C)C"};
    std::unordered_set<std::string> seen;
    std::vector<std::string> actives;
    long attempts = 0;
    while (static_cast<int>(actives.size()) < n_queries + n_library_actives) {
        if (++attempts > 100000) throw data_error("gen_vs_set: active family exhausted");
        std::string ring_sub = ring_subs[rng.below(static_cast<std::uint32_t>(ring_subs.size()))];
        std::string tail = amide_tails[rng.below(static_cast<std::uint32_t>(amide_tails.size()))];
        std::string smiles = "c1cc(" + ring_sub + ")ccc1C(=O)" + tail;
        if (!seen.insert(smiles).second) continue;
        self_check(smiles);
        actives.push_back(std::move(smiles));
    }

    VsSet set;
    set.queries.assign(actives.begin(), actives.begin() + n_queries);
    std::vector<std::string> library_actives(actives.begin() + n_queries, actives.end());

    // Decoys from the general grammar, excluding the scaffold anchor.
    std::vector<std::string> decoys;
    attempts = 0;
    while (static_cast<int>(decoys.size()) < n_decoys) {
        if (++attempts > 200L * n_decoys + 10000L)
            throw data_error("gen_vs_set: decoy grammar capacity exhausted");
        std::string candidate = generate_one(rng);
        if (candidate.find("C(=O)N") != std::string::npos) continue;
        if (!seen.insert(candidate).second) continue;
        self_check(candidate);
        decoys.push_back(std::move(candidate));
    }

    for (const auto& s : library_actives) {
        set.library.push_back(s);
        set.active.push_back(1);
    }
    for (const auto& s : decoys) {
        set.library.push_back(s);
        set.active.push_back(0);
    }
    return set;
}

}  // namespace delicate::corpus
