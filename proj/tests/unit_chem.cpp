#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "delicate/chem/descriptors.hpp"
#include "delicate/chem/fingerprint.hpp"
#include "delicate/chem/io.hpp"
#include "delicate/chem/mol.hpp"
#include "delicate/chem/tokenizer.hpp"
#include "delicate/chem/vocab.hpp"
#include "delicate/cli/corpus_gen.hpp"
#include "delicate/error.hpp"
#include "support/oracles.hpp"

using namespace delicate;
using namespace delicate::chem;

TEST_CASE("tokenizer splits by the longest-match rules") {
    CHECK(scan_tokens("CCO") == std::vector<std::string>{"C", "C", "O"});
    CHECK(scan_tokens("c1ccccc1Cl") ==
          std::vector<std::string>{"c", "1", "c", "c", "c", "c", "c", "1", "Cl"});
    CHECK(scan_tokens("[NH4+]") == std::vector<std::string>{"[NH4+]"});
    CHECK(scan_tokens("C%12CC%12") == std::vector<std::string>{"C", "%12", "C", "C", "%12"});
    CHECK(scan_tokens("BrCBr") == std::vector<std::string>{"Br", "C", "Br"});
    CHECK_THROWS_AS(scan_tokens("[NH4"), Error);
    CHECK_THROWS_AS(scan_tokens("C%1"), Error);
    CHECK_THROWS_AS(scan_tokens(""), Error);
}

TEST_CASE("tokenize wraps content in CLS/SEP and maps unknowns to UNK") {
    Vocab v = build_vocab({"CCO"});
    TokenSeq seq = tokenize("CCO", v);
    REQUIRE(seq.length() == 5);
    CHECK(seq.ids.front() == Vocab::kCls);
    CHECK(seq.ids.back() == Vocab::kSep);
    CHECK(seq.ids[1] == v.lookup("C"));
    CHECK(seq.ids[2] == v.lookup("C"));
    CHECK(seq.ids[3] == v.lookup("O"));

    TokenSeq unk = tokenize("CN", v);  // N not in vocab
    CHECK(unk.ids[2] == Vocab::kUnk);

    CHECK_THROWS_AS(tokenize("CCCCCC", v, 4), Error);  // 8 tokens > 4
}

TEST_CASE("detokenize inverts tokenize for UNK-free strings") {
    Vocab v = build_vocab({"CCO", "c1ccccc1Cl", "[NH4+]"});
    for (const std::string& s : {"CCO", "c1ccccc1Cl", "[NH4+]", "OCC", "Clc1ccccc1"})
        CHECK(detokenize(tokenize(s, v), v) == s);
    CHECK(detokenize(TokenSeq{{Vocab::kCls, Vocab::kSep}}, v) == "");
}

TEST_CASE("tokenize/detokenize round-trips the whole generated corpus") {
    auto corpus = corpus::gen_corpus(7, 300);
    Vocab v = build_vocab(corpus);
    for (const auto& s : corpus) CHECK(detokenize(tokenize(s, v), v) == s);
}

TEST_CASE("build_vocab is dense, deduplicated, and order-stable") {
    Vocab v = build_vocab({"CCO"});
    CHECK(v.size() == 7);  // 5 specials + C + O
    CHECK(v.lookup("C") == 5);
    CHECK(v.lookup("O") == 6);
    Vocab v2 = build_vocab({"CCO", "CCO"});
    CHECK(v2.size() == v.size());
    for (int i = 0; i < v.size(); ++i) CHECK(v.token_of(i) == v2.token_of(i));
    // lookup(token_of(id)) == id
    for (int i = 0; i < v.size(); ++i) CHECK(v.lookup(v.token_of(i)) == i);
}

TEST_CASE("vocab file round trip: one token per line, line number = id") {
    auto corpus = corpus::gen_corpus(3, 50);
    Vocab v = build_vocab(corpus);
    std::string path = "vocab_test.txt";
    v.save(path);
    Vocab loaded = Vocab::load(path);
    REQUIRE(loaded.size() == v.size());
    for (int i = 0; i < v.size(); ++i) CHECK(loaded.token_of(i) == v.token_of(i));
    std::remove(path.c_str());
}

TEST_CASE("parse_smiles handles the basic organic forms") {
    MolGraph methane = parse_smiles("C");
    REQUIRE(methane.atom_count() == 1);
    CHECK(methane.bond_count() == 0);
    CHECK(methane.atoms[0].implicit_h == 4);

    MolGraph benzene = parse_smiles("c1ccccc1");
    REQUIRE(benzene.atom_count() == 6);
    REQUIRE(benzene.bond_count() == 6);
    for (const auto& atom : benzene.atoms) {
        CHECK(atom.aromatic);
        CHECK(atom.implicit_h == 1);
    }
    for (const auto& bond : benzene.bonds) CHECK(bond.order == 1.5);

    MolGraph co2 = parse_smiles("O=C=O");
    REQUIRE(co2.atom_count() == 3);
    for (const auto& atom : co2.atoms) CHECK(atom.implicit_h == 0);

    MolGraph ammonium = parse_smiles("[NH4+]");
    REQUIRE(ammonium.atom_count() == 1);
    CHECK(ammonium.atoms[0].charge == 1);
    CHECK(ammonium.atoms[0].implicit_h == 4);

    MolGraph salt = parse_smiles("CC(=O)[O-].[NH4+]");
    CHECK(salt.fragment_count() == 2);

    // stereo and isotope markers parse and are discarded
    MolGraph stereo = parse_smiles("C/C=C\\C");
    CHECK(stereo.atom_count() == 4);
    MolGraph isotope = parse_smiles("[13CH4]");
    CHECK(isotope.atoms[0].implicit_h == 4);
    MolGraph chiral = parse_smiles("N[C@@H](C)C(=O)O");
    CHECK(chiral.atom_count() == 6);
}

TEST_CASE("parse_smiles rejects malformed inputs with positions") {
    CHECK_THROWS_WITH_AS(parse_smiles("C1CC"), doctest::Contains("unmatched ring closure"), Error);
    CHECK_THROWS_WITH_AS(parse_smiles("C(C"), doctest::Contains("unmatched opening parenthesis"),
                         Error);
    CHECK_THROWS_WITH_AS(parse_smiles("C)C"), doctest::Contains("unmatched closing parenthesis"),
                         Error);
    CHECK_THROWS_WITH_AS(parse_smiles("ZzC"), doctest::Contains("unknown"), Error);
    CHECK_THROWS_WITH_AS(parse_smiles("O(C)(C)C"), doctest::Contains("valence impossible"), Error);
    CHECK_THROWS_AS(parse_smiles("C=#C"), Error);
    CHECK_THROWS_AS(parse_smiles("C.=C"), Error);
}

TEST_CASE("ring count equals the spanning-forest cycle rank oracle") {
    CHECK(parse_smiles("c1ccccc1").ring_count() == 1);
    CHECK(parse_smiles("C1CC1C1CC1").ring_count() == 2);
    CHECK(parse_smiles("CCO").ring_count() == 0);
    auto corpus = corpus::gen_corpus(11, 100);
    for (const auto& s : corpus) {
        MolGraph mol = parse_smiles(s);
        CHECK(mol.ring_count() == oracles::cycle_rank_spanning_forest(mol));
    }
}

TEST_CASE("implicit hydrogens satisfy the valence table over the corpus") {
    auto corpus = corpus::gen_corpus(13, 200);
    for (const auto& s : corpus) {
        MolGraph mol = parse_smiles(s);
        std::vector<double> order_sum(mol.atom_count(), 0.0);
        for (const auto& bond : mol.bonds) {
            order_sum[bond.a] += bond.order;
            order_sum[bond.b] += bond.order;
        }
        for (int i = 0; i < mol.atom_count(); ++i) {
            const Atom& atom = mol.atoms[i];
            int rounded = static_cast<int>(std::floor(order_sum[i] + 0.5));
            auto valences = oracles::valences(atom.element, atom.charge);
            bool matches = false;
            for (int v : valences)
                if (atom.implicit_h + rounded == v) matches = true;
            CHECK_MESSAGE(matches, "atom ", i, " (", atom.element, ") in ", s);
            CHECK(atom.implicit_h >= 0);
        }
    }
}

TEST_CASE("descriptor values match hand computation") {
    DescriptorVector d = descriptors(parse_smiles("CCO"));
    CHECK(d[kHeavyAtoms] == 3);
    CHECK(d[kMolWeight] == doctest::Approx(2 * 12.011 + 15.999 + 6 * 1.008).epsilon(1e-12));
    CHECK(d[kRingCount] == 0);
    CHECK(d[kHBondDonors] == 1);
    CHECK(d[kHBondAcceptors] == 1);
    CHECK(d[kRotatableBonds] == 0);  // C-O bond is terminal (O has degree 1)
    CHECK(d[kTotalImplicitH] == 6);
    CHECK(d[kFragmentCount] == 1);

    DescriptorVector benzene = descriptors(parse_smiles("c1ccccc1"));
    CHECK(benzene[kRingCount] == 1);
    CHECK(benzene[kAromaticFraction] == doctest::Approx(1.0));
    CHECK(benzene[kAromaticAtoms] == 6);

    CHECK(descriptors(parse_smiles("C1CC1C1CC1"))[kRingCount] == 2);

    // butane's central bond is the only rotatable one
    CHECK(descriptors(parse_smiles("CCCC"))[kRotatableBonds] == 1);
    // ring bonds never rotate
    CHECK(descriptors(parse_smiles("C1CCCCC1"))[kRotatableBonds] == 0);

    DescriptorVector charged = descriptors(parse_smiles("CC(=O)[O-]"));
    CHECK(charged[kNetCharge] == -1);
    CHECK(charged[kOxygenCount] == 2);
}

TEST_CASE("normalization: z-scores with clipping and constant passthrough") {
    auto d1 = descriptors(parse_smiles("CCO"));
    SUBCASE("identical molecules normalize to zero") {
        NormStats stats = fit_norm({d1, d1, d1});
        DescriptorVector z = apply_norm(d1, stats);
        for (double value : z) CHECK(value == doctest::Approx(0.0));
    }
    SUBCASE("two-point z-score is +-1 under the population std") {
        DescriptorVector a{}, b{};
        a[kMolWeight] = 40.0;
        b[kMolWeight] = 60.0;
        NormStats stats = fit_norm({a, b});
        CHECK(apply_norm(a, stats)[kMolWeight] == doctest::Approx(-1.0));
        CHECK(apply_norm(b, stats)[kMolWeight] == doctest::Approx(1.0));
        // constant columns pass through with std 1
        CHECK(stats.std[kRingCount] == 1.0);
        CHECK(apply_norm(a, stats)[kRingCount] == 0.0);
    }
    SUBCASE("normalized training corpus has column mean 0 and variance 1") {
        auto corpus = corpus::gen_corpus(17, 150);
        std::vector<DescriptorVector> descs;
        for (const auto& s : corpus) descs.push_back(descriptors(parse_smiles(s)));
        NormStats stats = fit_norm(descs);
        for (int k = 0; k < kDescriptorCount; ++k) {
            double mean = 0.0, var = 0.0;
            bool constant = true;
            for (const auto& d : descs)
                if (d[k] != descs[0][k]) constant = false;
            for (const auto& d : descs) mean += apply_norm(d, stats)[k];
            mean /= descs.size();
            for (const auto& d : descs) {
                double z = apply_norm(d, stats)[k];
                var += (z - mean) * (z - mean);
            }
            var /= descs.size();
            CHECK(std::fabs(mean) < 1e-9);
            if (!constant) CHECK(var == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
    SUBCASE("outliers clip to +-10") {
        DescriptorVector a{}, b{}, huge{};
        a[kMolWeight] = 10.0;
        b[kMolWeight] = 10.1;
        huge[kMolWeight] = 1e6;
        NormStats stats = fit_norm({a, b});
        CHECK(apply_norm(huge, stats)[kMolWeight] == 10.0);
    }
    CHECK_THROWS_AS(fit_norm({}), Error);
    CHECK_THROWS_AS(fit_norm({d1}), Error);
}

TEST_CASE("ecfp determinism and discrimination") {
    MolGraph ethanol = parse_smiles("CCO");
    Fingerprint a = ecfp(ethanol);
    Fingerprint b = ecfp(parse_smiles("CCO"));
    CHECK(a == b);
    CHECK(tanimoto(a, b) == 1.0);

    // single atoms with different elements share no identifiers
    CHECK(tanimoto(ecfp(parse_smiles("C")), ecfp(parse_smiles("O"))) == 0.0);

    // shared terminal fragments give partial overlap
    double t = tanimoto(ecfp(parse_smiles("CCO")), ecfp(parse_smiles("CCCO")));
    CHECK(t > 0.0);
    CHECK(t < 1.0);

    CHECK_THROWS_AS(ecfp(ethanol, 2, 1000), Error);  // not a power of two

    // frozen bit pattern: any change to the hash or invariants shows up here
    Fingerprint frozen = ecfp(ethanol, 2, 2048);
    std::set<int> bits;
    for (int i = 0; i < frozen.width(); ++i)
        if (frozen.test(i)) bits.insert(i);
    std::string joined;
    for (int bit : bits) joined += std::to_string(bit) + ",";
    CHECK(joined == "28,79,279,489,583,911,977,1764,1839,");
}

TEST_CASE("ecfp bit pattern is identical across repeated computation") {
    auto corpus = corpus::gen_corpus(19, 60);
    for (const auto& s : corpus) {
        MolGraph mol = parse_smiles(s);
        CHECK(ecfp(mol) == ecfp(mol));
    }
}

TEST_CASE("tanimoto formula and edge cases") {
    Fingerprint a(64, 2), b(64, 2), empty(64, 2);
    for (std::uint64_t id : {0, 1, 2, 3, 4, 5}) a.set(id);
    for (std::uint64_t id : {3, 4, 5, 6, 7, 8, 9, 10, 11}) b.set(id);
    CHECK(tanimoto(a, b) == doctest::Approx(0.25));  // |intersection| 3, |union| 12
    CHECK(tanimoto(a, b) == tanimoto(b, a));
    CHECK(tanimoto(a, a) == 1.0);
    CHECK(tanimoto(empty, empty) == 1.0);
    Fingerprint disjoint(64, 2);
    disjoint.set(12);
    CHECK(tanimoto(a, disjoint) == 0.0);
    Fingerprint wide(128, 2);
    CHECK_THROWS_AS(tanimoto(a, wide), Error);
}

TEST_CASE("corpus files ignore comments and blank lines") {
    std::string path = "corpus_test.txt";
    {
        std::ofstream out(path);
        out << "# header comment\nCCO\n\nCCC # inline comment\n  c1ccccc1  \n";
    }
    auto corpus = read_corpus(path);
    REQUIRE(corpus.size() == 3);
    CHECK(corpus[0] == "CCO");
    CHECK(corpus[1] == "CCC");
    CHECK(corpus[2] == "c1ccccc1");
    std::remove(path.c_str());
}
