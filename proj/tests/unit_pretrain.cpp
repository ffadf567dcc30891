#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "delicate/chem/io.hpp"
#include "delicate/cli/corpus_gen.hpp"
#include "delicate/pretrain/pretrain.hpp"

using namespace delicate;
using namespace delicate::pretrain;
using delicate::chem::Vocab;

namespace {

model::ModelConfig small_model(int layers = 2, bool tied = false) {
    model::ModelConfig cfg;
    cfg.hidden_size = 16;
    cfg.num_layers = layers;
    cfg.num_heads = 2;
    cfg.ffn_size = 32;
    cfg.max_seq_len = 64;
    cfg.share_layers = tied;
    cfg.dropout_p = 0.1;
    return cfg;
}

TokenGrid grid_for(const std::vector<std::string>& corpus, const Vocab& vocab) {
    std::vector<chem::TokenSeq> seqs;
    for (const auto& s : corpus) seqs.push_back(chem::tokenize(s, vocab));
    std::vector<int> idx(seqs.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    return assemble_grid(seqs, idx);
}

}  // namespace

TEST_CASE("mask_batch selection rules") {
    auto corpus = corpus::gen_corpus(21, 64);
    Vocab vocab = chem::build_vocab(corpus);
    TokenGrid grid = grid_for(corpus, vocab);

    SUBCASE("rate 0 keeps exactly one forced label per sequence") {
        Rng rng(1, Rng::kMask);
        MaskedBatch batch = mask_batch(grid, vocab, rng, 0.0);
        for (std::int64_t b = 0; b < grid.batch; ++b) {
            int labeled = 0;
            for (std::int64_t s = 0; s < grid.seq; ++s)
                if (batch.labels[b * grid.seq + s] >= 0) ++labeled;
            CHECK(labeled == 1);
        }
    }
    SUBCASE("specials and PAD are never selected, labels hold original ids") {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            Rng rng(seed, Rng::kMask);
            MaskedBatch batch = mask_batch(grid, vocab, rng, 0.3);
            for (std::size_t i = 0; i < batch.labels.size(); ++i) {
                if (batch.labels[i] < 0) continue;
                CHECK(grid.mask[i] == 1);
                CHECK_FALSE(vocab.is_special(grid.ids[i]));
                CHECK(batch.labels[i] == grid.ids[i]);
            }
        }
    }
    SUBCASE("selected fraction concentrates near the rate") {
        // count over enough positions for binomial concentration
        std::int64_t content = 0, labeled = 0;
        Rng rng(7, Rng::kMask);
        for (int rep = 0; rep < 40 && content < 10000; ++rep) {
            MaskedBatch batch = mask_batch(grid, vocab, rng, 0.15);
            for (std::size_t i = 0; i < batch.labels.size(); ++i) {
                if (!grid.mask[i] || vocab.is_special(grid.ids[i])) continue;
                ++content;
                if (batch.labels[i] >= 0) ++labeled;
            }
        }
        double fraction = static_cast<double>(labeled) / static_cast<double>(content);
        CHECK(fraction > 0.13);
        CHECK(fraction < 0.17);
    }
    SUBCASE("80/10/10 replacement: most selected positions become MASK") {
        Rng rng(3, Rng::kMask);
        std::int64_t masked = 0, labeled = 0;
        for (int rep = 0; rep < 30; ++rep) {
            MaskedBatch batch = mask_batch(grid, vocab, rng, 0.3);
            for (std::size_t i = 0; i < batch.labels.size(); ++i) {
                if (batch.labels[i] < 0) continue;
                ++labeled;
                if (batch.grid.ids[i] == Vocab::kMask) ++masked;
            }
        }
        double mask_share = static_cast<double>(masked) / static_cast<double>(labeled);
        CHECK(mask_share > 0.75);
        CHECK(mask_share < 0.85);
    }
}

TEST_CASE("fresh model starts near the uniform cross-entropy") {
    auto corpus = corpus::gen_corpus(23, 128);
    Vocab vocab = chem::build_vocab(corpus);
    model::ModelConfig cfg = small_model();
    cfg.vocab_size = vocab.size();
    auto store = model::init_params(cfg, 11);
    TokenGrid grid = grid_for(corpus, vocab);
    Rng rng(5, Rng::kMask);
    MaskedBatch batch = mask_batch(grid, vocab, rng);
    batch.descriptor_targets.assign(grid.batch * chem::kDescriptorCount, 0.0);
    StepLosses losses = pretrain_eval(store, batch);
    double uniform = std::log(static_cast<double>(vocab.size()));
    CHECK(losses.mlm > 0.8 * uniform);
    CHECK(losses.mlm < 1.2 * uniform);
}

TEST_CASE("one optimizer step lowers the loss on that batch") {
    auto corpus = corpus::gen_corpus(25, 64);
    Vocab vocab = chem::build_vocab(corpus);
    TokenGrid grid = grid_for(corpus, vocab);
    for (std::uint64_t seed : {1, 2, 3}) {
        model::ModelConfig cfg = small_model();
        cfg.vocab_size = vocab.size();
        cfg.dropout_p = 0.0;
        auto store = model::init_params(cfg, seed);
        Rng mask_rng(seed, Rng::kMask);
        MaskedBatch batch = mask_batch(grid, vocab, mask_rng);
        batch.descriptor_targets.assign(grid.batch * chem::kDescriptorCount, 0.5);
        tensor::AdamState adam(tensor::AdamConfig{1e-3});
        double before = pretrain_eval(store, batch).total;
        pretrain_step(store, adam, batch, nullptr);
        double after = pretrain_eval(store, batch).total;
        CHECK(after < before);
    }
}

TEST_CASE("perfectly predicted descriptors zero the physchem loss") {
    auto corpus = corpus::gen_corpus(27, 32);
    Vocab vocab = chem::build_vocab(corpus);
    model::ModelConfig cfg = small_model();
    cfg.vocab_size = vocab.size();
    auto store = model::init_params(cfg, 3);
    TokenGrid grid = grid_for(corpus, vocab);
    Rng rng(1, Rng::kMask);
    MaskedBatch batch = mask_batch(grid, vocab, rng);
    // use the model's own outputs as targets
    {
        tensor::Tape tape(store.precision, false, nullptr, false);
        auto enc = model::encode(store, tape, batch.grid.ids, batch.grid.mask, grid.batch, grid.seq);
        auto pred = model::physchem_pred(store, tape, enc.pooled);
        const auto& v = tape.value(pred);
        batch.descriptor_targets.assign(v.data(), v.data() + v.numel());
    }
    CHECK(pretrain_eval(store, batch).physchem == 0.0);
}

TEST_CASE("pretrain_run splits 16:1 and is reproducible in 64-bit mode") {
    auto corpus = corpus::gen_corpus(7, 1700);
    Vocab vocab = chem::build_vocab(corpus);
    model::ModelConfig cfg = small_model(1);
    PretrainConfig pc;
    pc.epochs = 1;
    pc.batch_size = 64;
    pc.precision = tensor::Precision::f64;
    auto r1 = pretrain_run(cfg, pc, corpus, vocab, 7);
    CHECK(r1.report.train_count == 1600);
    CHECK(r1.report.val_count == 100);

    auto r2 = pretrain_run(cfg, pc, corpus, vocab, 7);
    REQUIRE(r1.report.epochs.size() == r2.report.epochs.size());
    for (std::size_t e = 0; e < r1.report.epochs.size(); ++e) {
        CHECK(r1.report.epochs[e].l_mlm == r2.report.epochs[e].l_mlm);
        CHECK(r1.report.epochs[e].l_physchem == r2.report.epochs[e].l_physchem);
        CHECK(r1.report.epochs[e].total == r2.report.epochs[e].total);
        CHECK(r1.report.epochs[e].val_total == r2.report.epochs[e].val_total);
    }
    for (const auto& [name, param] : r1.final_store.params) {
        const auto& other = r2.final_store.at(name).value;
        for (std::int64_t i = 0; i < param.value.numel(); ++i)
            CHECK(param.value.data()[i] == other.data()[i]);
    }
}

TEST_CASE("tied-model training loss decreases over epoch windows") {
    auto corpus = corpus::gen_corpus(29, 400);
    Vocab vocab = chem::build_vocab(corpus);
    model::ModelConfig cfg = small_model(2, /*tied=*/true);
    PretrainConfig pc;
    pc.epochs = 10;
    pc.batch_size = 32;
    pc.precision = tensor::Precision::f64;
    std::vector<double> late_minus_early;
    for (std::uint64_t seed : {1, 2, 3}) {
        auto result = pretrain_run(cfg, pc, corpus, vocab, seed);
        double early = 0.0, late = 0.0;
        for (int e = 0; e < 5; ++e) early += result.report.epochs[e].total;
        for (int e = 5; e < 10; ++e) late += result.report.epochs[e].total;
        late_minus_early.push_back(late - early);
        CHECK(result.report.epochs.back().val_total <
              result.report.epochs.front().val_total);
    }
    std::sort(late_minus_early.begin(), late_minus_early.end());
    CHECK(late_minus_early[1] < 0.0);  // median of 3 seeds
}

TEST_CASE("metrics CSV has the documented layout") {
    PretrainReport report;
    report.epochs.push_back({0, 1.5, 0.5, 2.0, 2.1, 0.3});
    report.epochs.push_back({1, 1.2, 0.4, 1.6, 1.9, 0.3});
    std::string path = "pretrain_metrics_test.csv";
    report.write_csv(path);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "epoch,l_mlm,l_physchem,total,val_total,seconds");
    std::string row;
    int rows = 0;
    while (std::getline(in, row)) ++rows;
    CHECK(rows == 2);
    std::remove(path.c_str());
}
