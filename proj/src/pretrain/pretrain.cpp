#include "delicate/pretrain/pretrain.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "delicate/chem/mol.hpp"
#include "delicate/model/checkpoint.hpp"

namespace delicate::pretrain {

using namespace delicate::tensor;
using delicate::chem::kDescriptorCount;
using delicate::model::ParamStore;

namespace {

struct Losses {
    Var mlm, physchem, total;
};

Losses build_losses(ParamStore& store, Tape& tape, const MaskedBatch& batch) {
    const auto& grid = batch.grid;
    auto enc = model::encode(store, tape, grid.ids, grid.mask, grid.batch, grid.seq);
    Var logits = model::mlm_logits(store, tape, enc.hidden_states.back());
    Var flat = reshape(logits, {grid.batch * grid.seq, store.config.vocab_size});
    Var l_mlm = masked_cross_entropy(flat, batch.labels);
    Var pred = model::physchem_pred(store, tape, enc.pooled);
    Var target = tape.leaf(Tensor({grid.batch, kDescriptorCount}, batch.descriptor_targets));
    Var l_phys = mse(pred, target);
    return {l_mlm, l_phys, add(l_mlm, l_phys)};
}

}  // namespace

StepLosses pretrain_step(ParamStore& store, AdamState& adam, const MaskedBatch& batch,
                         Rng* dropout_rng, double lr_scale) {
    Tape tape(store.precision, /*training=*/true, dropout_rng);
    Losses losses = build_losses(store, tape, batch);
    zero_grads(store.params);
    tape.backward(losses.total);
    adam.step(store.params, store.precision, lr_scale);
    return {tape.value(losses.mlm).item(), tape.value(losses.physchem).item(),
            tape.value(losses.total).item()};
}

StepLosses pretrain_eval(ParamStore& store, const MaskedBatch& batch) {
    Tape tape(store.precision, /*training=*/false, nullptr, /*grad_enabled=*/false);
    Losses losses = build_losses(store, tape, batch);
    return {tape.value(losses.mlm).item(), tape.value(losses.physchem).item(),
            tape.value(losses.total).item()};
}

void PretrainReport::write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open metrics file for writing: " + path);
    out << "epoch,l_mlm,l_physchem,total,val_total,seconds\n";
    out.precision(17);
    for (const auto& e : epochs)
        out << e.epoch << ',' << e.l_mlm << ',' << e.l_physchem << ',' << e.total << ','
            << e.val_total << ',' << e.seconds << '\n';
}

PretrainResult pretrain_run(const model::ModelConfig& model_config, const PretrainConfig& config,
                            const std::vector<std::string>& corpus, const chem::Vocab& vocab,
                            std::uint64_t seed, const std::optional<std::string>& run_dir) {
    model::ModelConfig cfg = model_config;
    if (cfg.vocab_size == 0) cfg.vocab_size = vocab.size();
    if (cfg.vocab_size != vocab.size())
        throw config_error("model vocab_size " + std::to_string(cfg.vocab_size) +
                           " does not match vocab of size " + std::to_string(vocab.size()));
    cfg.validate();

    std::vector<chem::TokenSeq> seqs;
    std::vector<chem::DescriptorVector> raw_desc;
    seqs.reserve(corpus.size());
    raw_desc.reserve(corpus.size());
    for (const auto& smiles : corpus) {
        seqs.push_back(chem::tokenize(smiles, vocab, cfg.max_seq_len));
        raw_desc.push_back(chem::descriptors(chem::parse_smiles(smiles)));
    }

    const std::int64_t n = static_cast<std::int64_t>(corpus.size());
    Rng shuffle_rng(seed, Rng::kShuffle);
    std::vector<int> order(n);
    for (std::int64_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
    shuffle_rng.shuffle(order);
    std::int64_t val_count = std::max<std::int64_t>(1, n / 17);
    std::int64_t train_count = n - val_count;
    if (train_count < config.batch_size)
        throw data_error("corpus of " + std::to_string(n) + " molecules is smaller than one batch");
    std::vector<int> train_idx(order.begin(), order.begin() + train_count);
    std::vector<int> val_idx(order.begin() + train_count, order.end());

    std::vector<chem::DescriptorVector> train_desc;
    train_desc.reserve(train_idx.size());
    for (int i : train_idx) train_desc.push_back(raw_desc[i]);
    chem::NormStats norm = chem::fit_norm(train_desc);
    std::vector<chem::DescriptorVector> norm_desc(n);
    for (std::int64_t i = 0; i < n; ++i) norm_desc[i] = chem::apply_norm(raw_desc[i], norm);

    ParamStore store = model::init_params(cfg, seed, config.precision);
    AdamState adam(AdamConfig{config.lr, 0.9, 0.999, 1e-8});
    Rng mask_rng(seed, Rng::kMask);
    Rng dropout_rng(seed, Rng::kDropout);

    const std::int64_t steps_per_epoch =
        (train_count + config.batch_size - 1) / config.batch_size;
    const std::int64_t total_steps = steps_per_epoch * config.epochs;
    const std::int64_t warmup_steps =
        std::max<std::int64_t>(1, static_cast<std::int64_t>(std::llround(
                                      static_cast<double>(total_steps) * config.warmup_frac)));

    auto fill_targets = [&](MaskedBatch& batch, const std::vector<int>& indices) {
        batch.descriptor_targets.resize(indices.size() * kDescriptorCount);
        for (std::size_t b = 0; b < indices.size(); ++b)
            for (int k = 0; k < kDescriptorCount; ++k)
                batch.descriptor_targets[b * kDescriptorCount + k] = norm_desc[indices[b]][k];
    };

    PretrainResult result;
    result.report.train_count = train_count;
    result.report.val_count = val_count;
    ParamStore best_store = store;
    double best_val = std::numeric_limits<double>::infinity();
    std::int64_t step = 0;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        auto t0 = std::chrono::steady_clock::now();
        shuffle_rng.shuffle(train_idx);
        double sum_mlm = 0.0, sum_phys = 0.0, sum_total = 0.0;
        std::int64_t steps_this_epoch = 0;
        for (std::int64_t pos = 0; pos < train_count; pos += config.batch_size) {
            std::int64_t end = std::min<std::int64_t>(pos + config.batch_size, train_count);
            std::vector<int> chunk(train_idx.begin() + pos, train_idx.begin() + end);
            MaskedBatch batch = mask_batch(assemble_grid(seqs, chunk), vocab, mask_rng, config.mask_rate);
            fill_targets(batch, chunk);
            ++step;
            double lr_scale = std::min(1.0, static_cast<double>(step) / warmup_steps);
            StepLosses losses = pretrain_step(store, adam, batch, &dropout_rng, lr_scale);
            sum_mlm += losses.mlm;
            sum_phys += losses.physchem;
            sum_total += losses.total;
            ++steps_this_epoch;
        }

        // Fixed validation masking so epoch losses stay comparable.
        Rng val_rng(seed + 1, Rng::kMask);
        double val_total = 0.0;
        std::int64_t val_batches = 0;
        for (std::size_t pos = 0; pos < val_idx.size(); pos += config.batch_size) {
            std::size_t end = std::min(pos + config.batch_size, val_idx.size());
            std::vector<int> chunk(val_idx.begin() + pos, val_idx.begin() + end);
            MaskedBatch batch = mask_batch(assemble_grid(seqs, chunk), vocab, val_rng, config.mask_rate);
            fill_targets(batch, chunk);
            val_total += pretrain_eval(store, batch).total;
            ++val_batches;
        }
        val_total /= std::max<std::int64_t>(1, val_batches);

        auto t1 = std::chrono::steady_clock::now();
        EpochStats stats;
        stats.epoch = epoch;
        stats.l_mlm = sum_mlm / steps_this_epoch;
        stats.l_physchem = sum_phys / steps_this_epoch;
        stats.total = sum_total / steps_this_epoch;
        stats.val_total = val_total;
        stats.seconds = std::chrono::duration<double>(t1 - t0).count();
        result.report.epochs.push_back(stats);

        if (val_total < best_val) {
            best_val = val_total;
            result.report.best_epoch = epoch;
            best_store = store;
        }
    }

    result.final_store = std::move(store);
    result.best_store = std::move(best_store);

    if (run_dir) {
        namespace fs = std::filesystem;
        fs::create_directories(fs::path(*run_dir) / "metrics");
        fs::create_directories(fs::path(*run_dir) / "checkpoints");
        result.report.write_csv((fs::path(*run_dir) / "metrics" / "pretrain.csv").string());
        model::save_checkpoint(result.final_store,
                               (fs::path(*run_dir) / "checkpoints" / "final.ckpt").string());
        model::save_checkpoint(result.best_store,
                               (fs::path(*run_dir) / "checkpoints" / "best.ckpt").string());
    }
    return result;
}

}  // namespace delicate::pretrain
