#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "delicate/cli/corpus_gen.hpp"
#include "delicate/distill/distill.hpp"
#include "delicate/model/checkpoint.hpp"

using namespace delicate;
using namespace delicate::distill;
using namespace delicate::tensor;
using delicate::pretrain::MaskedBatch;

namespace {

model::ModelConfig mini_model(int layers, bool tied = false) {
    model::ModelConfig cfg;
    cfg.hidden_size = 16;
    cfg.num_layers = layers;
    cfg.num_heads = 2;
    cfg.ffn_size = 32;
    cfg.max_seq_len = 48;
    cfg.share_layers = tied;
    cfg.dropout_p = 0.0;
    return cfg;
}

MaskedBatch tiny_batch(const chem::Vocab& vocab, const std::vector<std::string>& corpus) {
    std::vector<chem::TokenSeq> seqs;
    for (const auto& s : corpus) seqs.push_back(chem::tokenize(s, vocab));
    std::vector<int> idx(seqs.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    Rng rng(5, Rng::kMask);
    return pretrain::mask_batch(pretrain::assemble_grid(seqs, idx), vocab, rng);
}

}  // namespace

TEST_CASE("uniform_layer_map") {
    CHECK(uniform_layer_map(12, 3) == std::vector<int>{0, 4, 8, 12});
    CHECK(uniform_layer_map(4, 2) == std::vector<int>{0, 2, 4});
    CHECK(uniform_layer_map(5, 5) == std::vector<int>{0, 1, 2, 3, 4, 5});
    CHECK_THROWS_AS(uniform_layer_map(12, 5), Error);
    CHECK_THROWS_AS(uniform_layer_map(3, 6), Error);
}

TEST_CASE("distill losses on hand-built signals") {
    // batch of one single-position sequence, labeled
    MaskedBatch batch;
    batch.grid.batch = 1;
    batch.grid.seq = 1;
    batch.grid.ids = {2};
    batch.grid.mask = {1};
    batch.labels = {0};

    TeacherSignals teacher;
    teacher.hidden_states = {Tensor({1, 1, 2}, {0.3, -0.1}), Tensor({1, 1, 2}, {0.2, 0.4})};
    teacher.logits = Tensor({1, 1, 2}, {2.0, 0.0});

    Tape tape;
    model::EncoderOutput student;
    student.hidden_states = {tape.leaf(Tensor({1, 1, 2}, {0.3, -0.1})),
                             tape.leaf(Tensor({1, 1, 2}, {0.2, 0.4}))};
    student.pooled = tape.leaf(Tensor({1, 2}));
    Var student_logits = tape.leaf(Tensor({1, 1, 2}, {0.0, 0.0}));
    auto layer_map = uniform_layer_map(1, 1);

    SUBCASE("softened two-class logit gap matches the scalar oracle") {
        DistillConfig cfg;
        cfg.use_mlm = false;
        cfg.use_hidn = false;
        auto out = distill_losses(tape, teacher, student, student_logits, batch, cfg, layer_map);
        // teacher softened: softmax([2/8, 0]); student: [0.5, 0.5]
        double e = std::exp(0.25);
        double p = e / (1.0 + e);
        double expected = ((p - 0.5) * (p - 0.5) + ((1.0 - p) - 0.5) * ((1.0 - p) - 0.5)) / 2.0;
        CHECK(out.report.l_logits == doctest::Approx(expected).epsilon(1e-12));
        CHECK(out.report.l_logits == doctest::Approx(3.866e-3).epsilon(1e-3));
        CHECK(out.report.l_mlm == 0.0);
        CHECK(out.report.l_hidn == 0.0);
        CHECK(out.report.total == out.report.l_logits);
    }
    SUBCASE("identical hidden states zero the hidden loss") {
        DistillConfig cfg;
        cfg.use_mlm = false;
        cfg.use_logits = false;
        auto out = distill_losses(tape, teacher, student, student_logits, batch, cfg, layer_map);
        CHECK(out.report.l_hidn == 0.0);
    }
    SUBCASE("a very large temperature flattens both sides") {
        DistillConfig cfg;
        cfg.use_mlm = false;
        cfg.use_hidn = false;
        cfg.temperature = 1e6;
        auto out = distill_losses(tape, teacher, student, student_logits, batch, cfg, layer_map);
        CHECK(out.report.l_logits < 1e-12);
    }
    SUBCASE("disabled logit loss never reads the teacher logits") {
        TeacherSignals poisoned = teacher;
        poisoned.logits.fill(std::numeric_limits<double>::quiet_NaN());
        DistillConfig cfg;
        cfg.use_logits = false;
        auto out = distill_losses(tape, poisoned, student, student_logits, batch, cfg, layer_map);
        CHECK(std::isfinite(out.report.total));
        CHECK(out.report.l_logits == 0.0);
    }
    SUBCASE("temperature must be positive") {
        DistillConfig cfg;
        cfg.temperature = 0.0;
        CHECK_THROWS_AS(distill_losses(tape, teacher, student, student_logits, batch, cfg, layer_map),
                        Error);
    }
}

TEST_CASE("logit loss is symmetric in its two distributions") {
    Tape tape;
    Tensor a({3, 4}, {1.0, -2.0, 0.5, 0.3, 2.0, 0.0, -1.0, 0.7, 0.1, 0.2, 0.3, 0.4});
    Tensor b({3, 4}, {0.5, 0.5, -0.5, 1.5, 0.0, 1.0, 2.0, -2.0, 1.1, 0.9, 0.2, 0.0});
    Var sa = softmax(scale(tape.leaf(a), 1.0 / 8.0), -1);
    Var sb = softmax(scale(tape.leaf(b), 1.0 / 8.0), -1);
    CHECK(tape.value(mse(sa, sb)).item() == tape.value(mse(sb, sa)).item());
}

TEST_CASE("temperature never changes the argmax") {
    Rng rng(9, 0);
    for (int rep = 0; rep < 50; ++rep) {
        Tensor logits({1, 9});
        for (int j = 0; j < 9; ++j) logits.data()[j] = rng.gaussian() * 4.0;
        int base_arg = 0;
        for (int j = 1; j < 9; ++j)
            if (logits.data()[j] > logits.data()[base_arg]) base_arg = j;
        for (double temp : {0.25, 1.0, 8.0, 500.0}) {
            Tape tape;
            Var soft = softmax(scale(tape.leaf(logits), 1.0 / temp), -1);
            int arg = 0;
            for (int j = 1; j < 9; ++j)
                if (tape.value(soft).data()[j] > tape.value(soft).data()[arg]) arg = j;
            CHECK(arg == base_arg);
        }
    }
}

TEST_CASE("capacity-matched self-distillation zeroes hidden and logit losses") {
    auto corpus = corpus::gen_corpus(31, 48);
    auto vocab = chem::build_vocab(corpus);
    model::ModelConfig cfg = mini_model(2);
    cfg.vocab_size = vocab.size();
    auto teacher = model::init_params(cfg, 17);
    MaskedBatch batch = tiny_batch(vocab, corpus);

    TeacherSignals signals = teacher_forward(teacher, batch);
    Tape tape;
    auto student_out = model::encode(teacher, tape, batch.grid.ids, batch.grid.mask,
                                     batch.grid.batch, batch.grid.seq);
    Var student_logits = model::mlm_logits(teacher, tape, student_out.hidden_states.back());
    DistillConfig dc;
    auto out = distill_losses(tape, signals, student_out, student_logits, batch, dc,
                              uniform_layer_map(2, 2));
    CHECK(out.report.l_hidn == 0.0);
    CHECK(out.report.l_logits == 0.0);
    CHECK(out.report.total == out.report.l_mlm);
}

TEST_CASE("additivity and ablation switches on a real distillation step") {
    auto corpus = corpus::gen_corpus(33, 64);
    auto vocab = chem::build_vocab(corpus);
    model::ModelConfig tcfg = mini_model(2);
    tcfg.vocab_size = vocab.size();
    auto teacher = model::init_params(tcfg, 21);
    MaskedBatch batch = tiny_batch(vocab, corpus);
    TeacherSignals signals = teacher_forward(teacher, batch);

    model::ModelConfig scfg = mini_model(1);
    scfg.vocab_size = vocab.size();
    auto student = model::init_params(scfg, 22);
    auto layer_map = uniform_layer_map(2, 1);

    auto run_with = [&](bool use_mlm, bool use_hidn, bool use_logits) {
        Tape tape;
        auto student_out = model::encode(student, tape, batch.grid.ids, batch.grid.mask,
                                         batch.grid.batch, batch.grid.seq);
        Var logits = model::mlm_logits(student, tape, student_out.hidden_states.back());
        DistillConfig cfg;
        cfg.use_mlm = use_mlm;
        cfg.use_hidn = use_hidn;
        cfg.use_logits = use_logits;
        return distill_losses(tape, signals, student_out, logits, batch, cfg, layer_map).report;
    };

    auto all_on = run_with(true, true, true);
    CHECK(all_on.total == all_on.l_mlm + all_on.l_hidn + all_on.l_logits);
    CHECK(all_on.l_mlm > 0.0);
    CHECK(all_on.l_hidn > 0.0);
    CHECK(all_on.l_logits > 0.0);

    auto no_logits = run_with(true, true, false);
    CHECK(no_logits.l_logits == 0.0);
    CHECK(no_logits.l_mlm == all_on.l_mlm);
    CHECK(no_logits.l_hidn == all_on.l_hidn);
    CHECK(no_logits.total == no_logits.l_mlm + no_logits.l_hidn);

    auto no_hidn = run_with(true, false, true);
    CHECK(no_hidn.l_hidn == 0.0);
    CHECK(no_hidn.total == no_hidn.l_mlm + no_hidn.l_logits);

    auto no_mlm = run_with(false, true, true);
    CHECK(no_mlm.l_mlm == 0.0);
    CHECK(no_mlm.total == no_mlm.l_hidn + no_mlm.l_logits);
}

TEST_CASE("distill_run: tied teacher to tied student end to end") {
    auto corpus = corpus::gen_corpus(35, 96);
    auto vocab = chem::build_vocab(corpus);
    model::ModelConfig tcfg = mini_model(4, /*tied=*/true);
    tcfg.vocab_size = vocab.size();
    auto teacher = model::init_params(tcfg, 41);

    std::string teacher_path = "distill_teacher_before.ckpt";
    model::save_checkpoint(teacher, teacher_path);

    model::ModelConfig scfg = mini_model(2, /*tied=*/true);
    DistillConfig cfg;
    std::string run_dir = "distill_run_test";
    auto result = distill_run(teacher, scfg, corpus, vocab, cfg, /*steps=*/6, /*batch=*/16,
                              /*seed=*/51, run_dir);
    REQUIRE(result.trace.size() == 6);
    for (const auto& step : result.trace)
        CHECK(step.total == step.l_mlm + step.l_hidn + step.l_logits);

    // teacher is frozen: bytes identical before and after
    std::string teacher_after = "distill_teacher_after.ckpt";
    model::save_checkpoint(teacher, teacher_after);
    std::ifstream f1(teacher_path, std::ios::binary), f2(teacher_after, std::ios::binary);
    std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);

    // the student checkpoint loads and matches the student config
    auto loaded = model::load_checkpoint(run_dir + "/checkpoints/student.ckpt");
    CHECK(loaded.config.num_layers == 2);
    CHECK(loaded.config.share_layers);

    // trace stream layout
    std::ifstream trace(run_dir + "/metrics/distill.csv");
    std::string header;
    std::getline(trace, header);
    CHECK(header == "step,l_mlm,l_hidn,l_logits,total");

    std::remove(teacher_path.c_str());
    std::remove(teacher_after.c_str());
    std::filesystem::remove_all(run_dir);
}

TEST_CASE("distill_run rejects mismatched widths") {
    auto corpus = corpus::gen_corpus(37, 40);
    auto vocab = chem::build_vocab(corpus);
    model::ModelConfig tcfg = mini_model(2);
    tcfg.vocab_size = vocab.size();
    auto teacher = model::init_params(tcfg, 1);
    model::ModelConfig scfg = mini_model(1);
    scfg.hidden_size = 32;
    scfg.num_heads = 4;
    CHECK_THROWS_AS(distill_run(teacher, scfg, corpus, vocab, {}, 1, 8, 1), Error);
}
