// delicate: chemical transformer compression toolkit.
//
// Subcommands compose the pipeline: gen-corpus -> vocab-build -> pretrain
// (tied or untied) -> distill (shallow student) -> finetune / screen /
// embed, plus params / bench / gradcheck utilities.

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "delicate/chem/io.hpp"
#include "delicate/cli/bench.hpp"
#include "delicate/cli/corpus_gen.hpp"
#include "delicate/cli/run_config.hpp"
#include "delicate/distill/distill.hpp"
#include "delicate/error.hpp"
#include "delicate/eval/finetune.hpp"
#include "delicate/eval/screening.hpp"
#include "delicate/model/checkpoint.hpp"
#include "delicate/model/encoder.hpp"
#include "delicate/pretrain/pretrain.hpp"
#include "delicate/tensor/grad_check.hpp"

namespace fs = std::filesystem;
using namespace delicate;

namespace {

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::config: return 2;
        case ErrorKind::data: return 3;
        case ErrorKind::numeric: return 4;
        case ErrorKind::io: return 5;
        case ErrorKind::dimension: return 6;
    }
    return 1;
}

// Remaining tokens of the form `--section.key value` override config keys.
void apply_overrides(config::RunConfig& cfg, const std::vector<std::string>& extras) {
    for (std::size_t i = 0; i < extras.size(); ++i) {
        const std::string& tok = extras[i];
        if (tok.rfind("--", 0) != 0) throw config_error("unexpected argument '" + tok + "'");
        std::string key = tok.substr(2);
        std::string value;
        auto eq = key.find('=');
        if (eq != std::string::npos) {
            value = key.substr(eq + 1);
            key = key.substr(0, eq);
        } else {
            if (i + 1 >= extras.size()) throw config_error("override '" + tok + "' is missing a value");
            value = extras[++i];
        }
        cfg.set(key, value);
    }
}

struct RunDir {
    fs::path root;

    explicit RunDir(const std::string& path) : root(path) {}

    void prepare(const config::RunConfig& cfg) const {
        fs::create_directories(root / "checkpoints");
        fs::create_directories(root / "metrics");
        fs::create_directories(root / "logs");
        cfg.write_snapshot((root / "config.snapshot").string());
    }

    void log(const std::string& line) const {
        std::ofstream out(root / "logs" / "run.log", std::ios::app);
        auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        char buf[32];
        std::strftime(buf, sizeof buf, "%F %T", std::localtime(&now));
        out << buf << ' ' << line << '\n';
    }
};

void require_readable(const std::string& path, const std::string& what) {
    std::ifstream probe(path);
    if (!probe) throw data_error("cannot open " + what + ": " + path);
}

chem::Vocab load_vocab_for(const config::RunConfig& cfg) {
    return chem::Vocab::load(cfg.require_path("vocab"));
}

int cmd_gen_corpus(const config::RunConfig& cfg, int n, const std::string& out) {
    auto corpus = corpus::gen_corpus(cfg.seed(), n);
    chem::write_corpus(out, corpus);
    std::cout << "wrote " << corpus.size() << " molecules to " << out << "\n";
    return 0;
}

int cmd_gen_vs(const config::RunConfig& cfg, int n_actives, int n_decoys,
               const std::string& out_dir) {
    auto set = corpus::gen_vs_set(cfg.seed(), 5, n_actives, n_decoys);
    fs::create_directories(out_dir);
    {
        std::ofstream q(fs::path(out_dir) / "queries.csv");
        q << "smiles\n";
        for (const auto& s : set.queries) q << s << '\n';
    }
    {
        std::ofstream l(fs::path(out_dir) / "library.csv");
        l << "smiles,active\n";
        for (std::size_t i = 0; i < set.library.size(); ++i)
            l << set.library[i] << ',' << set.active[i] << '\n';
    }
    std::cout << "wrote " << set.queries.size() << " queries and " << set.library.size()
              << " library molecules to " << out_dir << "\n";
    return 0;
}

int cmd_vocab_build(const config::RunConfig& cfg, const std::string& out) {
    auto corpus = chem::read_corpus(cfg.require_path("corpus"));
    chem::Vocab vocab = chem::build_vocab(corpus);
    vocab.save(out);
    std::cout << "vocab of " << vocab.size() << " tokens (5 specials + "
              << vocab.size() - chem::Vocab::kNumSpecials << " observed) written to " << out << "\n";
    return 0;
}

int cmd_pretrain(const config::RunConfig& cfg, const std::string& run_dir) {
    auto corpus = chem::read_corpus(cfg.require_path("corpus"));
    chem::Vocab vocab = load_vocab_for(cfg);
    RunDir dir(run_dir);
    dir.prepare(cfg);
    dir.log("pretrain start");
    auto result = pretrain::pretrain_run(cfg.model(), cfg.pretrain(), corpus, vocab, cfg.seed(),
                                         run_dir);
    dir.log("pretrain done, best epoch " + std::to_string(result.report.best_epoch));
    const auto& last = result.report.epochs.back();
    std::cout << "epochs " << result.report.epochs.size() << ", final train total " << last.total
              << ", best val " << result.report.epochs[result.report.best_epoch].val_total << "\n"
              << "checkpoints under " << (dir.root / "checkpoints").string() << "\n";
    return 0;
}

int cmd_distill(const config::RunConfig& cfg, const std::string& run_dir) {
    auto corpus = chem::read_corpus(cfg.require_path("corpus"));
    chem::Vocab vocab = load_vocab_for(cfg);
    auto teacher = model::load_checkpoint(cfg.require_path("teacher"));
    if (teacher.config.vocab_size != vocab.size())
        throw config_error("teacher checkpoint vocab size does not match the vocab file");
    RunDir dir(run_dir);
    dir.prepare(cfg);
    dir.log("distill start");
    auto result = distill::distill_run(teacher, cfg.student_model(), corpus, vocab, cfg.distill(),
                                       cfg.distill_steps(), cfg.distill_batch_size(), cfg.seed(),
                                       run_dir);
    dir.log("distill done");
    std::cout << "steps " << result.trace.size() << ", final total " << result.trace.back().total
              << "\nstudent checkpoint under " << (dir.root / "checkpoints").string() << "\n";
    return 0;
}

int cmd_finetune(const config::RunConfig& cfg, const std::string& run_dir) {
    chem::Vocab vocab = load_vocab_for(cfg);
    auto store = model::load_checkpoint(cfg.require_path("checkpoint"));
    auto dataset = eval::load_task_csv(cfg.require_path("task"), cfg.task_kind());
    RunDir dir(run_dir);
    dir.prepare(cfg);
    dir.log("finetune start on " + dataset.name);
    auto report = eval::finetune(store, vocab, dataset, cfg.seed(), cfg.finetune());
    report.write_csv((dir.root / "metrics" / "finetune.csv").string());
    dir.log("finetune done");
    std::cout << (dataset.kind == eval::TaskKind::classification ? "roc_auc" : "r2") << " mean "
              << report.mean << " sem " << report.sem << " over " << report.fold_metrics.size()
              << " folds\n";
    return 0;
}

int cmd_screen(const config::RunConfig& cfg, const std::string& run_dir, const std::string& scorer) {
    // queries.csv: header `smiles`; library.csv: header `smiles,active`
    std::string qpath = cfg.require_path("queries");
    std::string lpath = cfg.require_path("library");
    require_readable(qpath, "queries file");
    require_readable(lpath, "library file");

    std::vector<std::string> queries;
    {
        std::ifstream in(qpath);
        std::string line;
        std::getline(in, line);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line != "smiles") throw data_error("queries file must start with header 'smiles'");
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.empty()) queries.push_back(line);
        }
    }
    std::vector<std::string> library;
    std::vector<int> active;
    {
        std::ifstream in(lpath);
        std::string line;
        std::getline(in, line);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line != "smiles,active")
            throw data_error("library file must start with header 'smiles,active'");
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            auto comma = line.rfind(',');
            if (comma == std::string::npos) throw data_error("malformed library row: " + line);
            library.push_back(line.substr(0, comma));
            active.push_back(std::stoi(line.substr(comma + 1)));
        }
    }

    double auc = 0.0;
    if (scorer == "ecfp") {
        std::vector<chem::Fingerprint> qfp, lfp;
        for (const auto& s : queries) qfp.push_back(chem::ecfp(chem::parse_smiles(s)));
        for (const auto& s : library) lfp.push_back(chem::ecfp(chem::parse_smiles(s)));
        auc = eval::vs_rank(qfp, lfp, active);
    } else if (scorer == "embedding") {
        chem::Vocab vocab = load_vocab_for(cfg);
        auto store = model::load_checkpoint(cfg.require_path("checkpoint"));
        auto qemb = eval::embed(store, vocab, queries);
        auto lemb = eval::embed(store, vocab, library);
        auc = eval::vs_rank(qemb, lemb, active);
    } else {
        throw config_error("scorer must be 'ecfp' or 'embedding', got '" + scorer + "'");
    }

    RunDir dir(run_dir);
    dir.prepare(cfg);
    {
        std::ofstream out(dir.root / "metrics" / "screen.csv");
        out.precision(17);
        out << "scorer,auc\n" << scorer << ',' << auc << '\n';
    }
    dir.log("screen done, auc " + std::to_string(auc));
    std::cout << "screening roc_auc (" << scorer << "): " << auc << "\n";
    return 0;
}

int cmd_embed(const config::RunConfig& cfg, const std::string& out_path) {
    chem::Vocab vocab = load_vocab_for(cfg);
    auto store = model::load_checkpoint(cfg.require_path("checkpoint"));
    auto smiles = chem::read_corpus(cfg.require_path("corpus"));
    auto matrix = eval::embed(store, vocab, smiles);
    std::ofstream out(out_path);
    if (!out) throw io_error("cannot open embedding output: " + out_path);
    out.precision(17);
    for (std::int64_t i = 0; i < matrix.dim(0); ++i) {
        for (std::int64_t j = 0; j < matrix.dim(1); ++j) {
            if (j) out << ',';
            out << matrix.data()[i * matrix.dim(1) + j];
        }
        out << '\n';
    }
    std::cout << "wrote " << matrix.dim(0) << " x " << matrix.dim(1) << " embeddings to "
              << out_path << "\nmean pairwise cosine: " << eval::mean_pairwise_cosine(matrix)
              << "\n";
    return 0;
}

int cmd_params(const config::RunConfig& cfg) {
    model::ModelConfig base = cfg.model();
    if (base.vocab_size == 0)
        throw config_error("params needs model.vocab_size (no vocab file is consulted)");
    model::ModelConfig untied = base;
    untied.share_layers = false;
    model::ModelConfig tied = base;
    tied.share_layers = true;
    std::int64_t untied_count = model::param_count(untied);
    std::int64_t tied_count = model::param_count(tied);
    std::cout << "layers " << base.num_layers << ", hidden " << base.hidden_size << ", ffn "
              << base.ffn_size << ", vocab " << base.vocab_size << "\n"
              << "untied parameters: " << untied_count << "\n"
              << "tied parameters:   " << tied_count << " (independent of depth)\n"
              << "tied/untied ratio: " << static_cast<double>(tied_count) / untied_count << "\n"
              << "reduction factor:  " << static_cast<double>(untied_count) / tied_count << "\n";
    return 0;
}

int cmd_bench(const config::RunConfig& cfg, int batch, int seq) {
    auto store = model::load_checkpoint(cfg.require_path("checkpoint"));
    auto report = bench::run_benchmark(store, batch, seq, cfg.require_path("checkpoint"));
    std::cout << "model " << report.model_id << " (layers " << store.config.num_layers
              << ", hidden " << store.config.hidden_size << ")\n"
              << "batch " << report.batch << " x seq " << report.seq << "\n"
              << "forward tokens/s:    " << report.forward_tokens_per_sec << "\n"
              << "train-step tokens/s: " << report.train_tokens_per_sec << "\n";
    return 0;
}

int cmd_gradcheck() {
    using namespace delicate::tensor;
    int failures = 0;
    auto report = [&](const std::string& name, double err, double tol) {
        bool ok = err < tol;
        if (!ok) ++failures;
        std::cout << (ok ? "PASS " : "FAIL ") << name << ": worst relative error " << err
                  << " (tolerance " << tol << ")\n";
    };

    Rng rng(12345, 0);
    auto rand_tensor = [&rng](Shape shape, double scale = 1.0) {
        Tensor t(std::move(shape));
        for (std::int64_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.gaussian() * scale;
        return t;
    };

    {
        ParamMap p;
        p.emplace("a", Param(rand_tensor({4, 5})));
        p.emplace("b", Param(rand_tensor({5, 3})));
        report("matmul", grad_check([](Tape& t, ParamMap& p) {
            return mse(matmul(t.param(p.at("a")), t.param(p.at("b"))), t.leaf(Tensor({4, 3})));
        }, p), 1e-5);
    }
    {
        ParamMap p;
        p.emplace("x", Param(rand_tensor({6, 8}, 2.0)));
        p.emplace("g", Param(rand_tensor({8}, 0.2)));
        p.emplace("b", Param(rand_tensor({8}, 0.2)));
        report("layer_norm", grad_check([](Tape& t, ParamMap& p) {
            return mse(layer_norm(t.param(p.at("x")), t.param(p.at("g")), t.param(p.at("b"))),
                       t.leaf(Tensor({6, 8})));
        }, p), 1e-5);
    }
    {
        ParamMap p;
        p.emplace("x", Param(rand_tensor({5, 7})));
        report("gelu", grad_check([](Tape& t, ParamMap& p) {
            return sum_all(gelu(t.param(p.at("x"))));
        }, p), 1e-5);
    }
    {
        ParamMap p;
        p.emplace("x", Param(rand_tensor({4, 9}, 2.0)));
        std::vector<int> targets = {0, 3, -1, 8};
        report("softmax+cross_entropy", grad_check([targets](Tape& t, ParamMap& p) {
            return masked_cross_entropy(t.param(p.at("x")), targets);
        }, p), 1e-5);
    }

    // full tiny models: pretraining loss and the triple distillation loss
    model::ModelConfig mc;
    mc.hidden_size = 8;
    mc.num_layers = 2;
    mc.num_heads = 2;
    mc.ffn_size = 16;
    mc.max_seq_len = 8;
    mc.vocab_size = 11;
    mc.dropout_p = 0.0;

    pretrain::MaskedBatch batch;
    batch.grid.batch = 2;
    batch.grid.seq = 5;
    batch.grid.ids = {2, 5, 4, 6, 3, 2, 7, 8, 3, 0};
    batch.grid.mask = {1, 1, 1, 1, 1, 1, 1, 1, 1, 0};
    batch.labels.assign(10, -1);
    batch.labels[2] = 9;
    batch.labels[6] = 5;
    batch.descriptor_targets.assign(2 * chem::kDescriptorCount, 0.25);

    {
        auto store = model::init_params(mc, 3);
        report("tiny model: masked-LM + descriptor loss",
               grad_check([&](Tape& t, ParamMap& p) {
                   model::ParamStore view;
                   view.config = mc;
                   view.params = std::move(p);
                   auto enc = model::encode(view, t, batch.grid.ids, batch.grid.mask, 2, 5);
                   Var logits = model::mlm_logits(view, t, enc.hidden_states.back());
                   Var l_mlm = masked_cross_entropy(reshape(logits, {10, mc.vocab_size}),
                                                    batch.labels);
                   Var pred = model::physchem_pred(view, t, enc.pooled);
                   Var target = t.leaf(Tensor({2, chem::kDescriptorCount},
                                              batch.descriptor_targets));
                   Var total = add(l_mlm, mse(pred, target));
                   p = std::move(view.params);
                   return total;
               }, store.params), 1e-5);
    }
    {
        auto teacher = model::init_params(mc, 5);
        auto signals = distill::teacher_forward(teacher, batch);
        model::ModelConfig sc = mc;
        sc.num_layers = 1;
        auto student = model::init_params(sc, 6);
        auto layer_map = distill::uniform_layer_map(mc.num_layers, sc.num_layers);
        distill::DistillConfig dc;
        report("tiny model: triple distillation loss",
               grad_check([&](Tape& t, ParamMap& p) {
                   model::ParamStore view;
                   view.config = sc;
                   view.params = std::move(p);
                   auto out = model::encode(view, t, batch.grid.ids, batch.grid.mask, 2, 5);
                   Var logits = model::mlm_logits(view, t, out.hidden_states.back());
                   auto losses = distill::distill_losses(t, signals, out, logits, batch, dc,
                                                         layer_map);
                   p = std::move(view.params);
                   return losses.total;
               }, student.params), 1e-5);
    }

    std::cout << (failures == 0 ? "gradient checks passed\n" : "gradient checks FAILED\n");
    return failures == 0 ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"delicate: chemical transformer compression toolkit"};
    app.require_subcommand(1);

    std::string config_path, run_dir = "run", out_path, scorer = "ecfp";
    int gen_n = 1000, vs_actives = 30, vs_decoys = 300, bench_batch = 32, bench_seq = 32;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "INI run configuration");
        sub->allow_extras();
        return sub;
    };

    auto* gen = add_common(app.add_subcommand("gen-corpus", "generate the toy SMILES corpus"));
    gen->add_option("--n", gen_n, "number of molecules");
    gen->add_option("--out", out_path, "output corpus file")->required();

    auto* genvs = add_common(app.add_subcommand("gen-vs", "generate a planted screening set"));
    genvs->add_option("--actives", vs_actives, "library actives");
    genvs->add_option("--decoys", vs_decoys, "library decoys");
    genvs->add_option("--out-dir", out_path, "output directory")->required();

    auto* vocab = add_common(app.add_subcommand("vocab-build", "build a vocab from a corpus"));
    vocab->add_option("--out", out_path, "output vocab file")->required();

    auto* pre = add_common(app.add_subcommand("pretrain", "self-supervised pretraining"));
    pre->add_option("--run-dir", run_dir, "run directory");

    auto* dis = add_common(app.add_subcommand("distill", "teacher-student distillation"));
    dis->add_option("--run-dir", run_dir, "run directory");
    bool no_mlm = false, no_hidden = false, no_logits = false;
    dis->add_flag("--no-mlm", no_mlm, "drop the masked-LM component");
    dis->add_flag("--no-hidden", no_hidden, "drop the hidden-state component");
    dis->add_flag("--no-logits", no_logits, "drop the softened-logit component");

    auto* fin = add_common(app.add_subcommand("finetune", "QSAR fine-tuning with 3-fold CV"));
    fin->add_option("--run-dir", run_dir, "run directory");

    auto* scr = add_common(app.add_subcommand("screen", "virtual screening"));
    scr->add_option("--run-dir", run_dir, "run directory");
    scr->add_option("--scorer", scorer, "ecfp | embedding");

    auto* emb = add_common(app.add_subcommand("embed", "write pooled embeddings as CSV"));
    emb->add_option("--out", out_path, "output CSV")->required();

    auto* par = add_common(app.add_subcommand("params", "unique-parameter counts"));

    auto* ben = add_common(app.add_subcommand("bench", "throughput benchmark"));
    ben->add_option("--batch", bench_batch, "batch size");
    ben->add_option("--seq", bench_seq, "sequence length");

    auto* grc = app.add_subcommand("gradcheck", "run the gradient-check suite");

    CLI11_PARSE(app, argc, argv);

    try {
        config::RunConfig cfg;
        if (!config_path.empty()) cfg = config::RunConfig::load(config_path);
        for (auto* sub : {gen, genvs, vocab, pre, dis, fin, scr, emb, par, ben})
            if (sub->parsed()) apply_overrides(cfg, sub->remaining());
        if (dis->parsed()) {
            if (no_mlm) cfg.set("distill.use_mlm", "false");
            if (no_hidden) cfg.set("distill.use_hidn", "false");
            if (no_logits) cfg.set("distill.use_logits", "false");
        }
        cfg.apply_env();

        if (gen->parsed()) return cmd_gen_corpus(cfg, gen_n, out_path);
        if (genvs->parsed()) return cmd_gen_vs(cfg, vs_actives, vs_decoys, out_path);
        if (vocab->parsed()) return cmd_vocab_build(cfg, out_path);
        if (pre->parsed()) return cmd_pretrain(cfg, run_dir);
        if (dis->parsed()) return cmd_distill(cfg, run_dir);
        if (fin->parsed()) return cmd_finetune(cfg, run_dir);
        if (scr->parsed()) return cmd_screen(cfg, run_dir, scorer);
        if (emb->parsed()) return cmd_embed(cfg, out_path);
        if (par->parsed()) return cmd_params(cfg);
        if (ben->parsed()) return cmd_bench(cfg, bench_batch, bench_seq);
        if (grc->parsed()) return cmd_gradcheck();
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
