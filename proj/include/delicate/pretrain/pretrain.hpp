#pragma once

#include <optional>
#include <string>
#include <vector>

#include "delicate/model/encoder.hpp"
#include "delicate/pretrain/masking.hpp"
#include "delicate/tensor/adam.hpp"

namespace delicate::pretrain {

struct PretrainConfig {
    int epochs = 20;
    int batch_size = 32;
    double lr = 1e-3;
    double mask_rate = 0.15;
    double warmup_frac = 0.05;   // linear warmup over this fraction of steps
    tensor::Precision precision = tensor::Precision::f32;
};

struct EpochStats {
    int epoch = 0;
    double l_mlm = 0.0;
    double l_physchem = 0.0;
    double total = 0.0;
    double val_total = 0.0;
    double seconds = 0.0;
};

struct PretrainReport {
    std::vector<EpochStats> epochs;
    int best_epoch = -1;         // lowest validation loss
    std::int64_t train_count = 0;
    std::int64_t val_count = 0;

    // One line per epoch: epoch,l_mlm,l_physchem,total,val_total,seconds
    void write_csv(const std::string& path) const;
};

struct StepLosses {
    double mlm = 0.0;
    double physchem = 0.0;
    double total = 0.0;
};

// One optimizer step on one batch: total = masked cross-entropy + descriptor
// MSE with equal weights, gradients applied via Adam.
StepLosses pretrain_step(model::ParamStore& store, tensor::AdamState& adam, const MaskedBatch& batch,
                         Rng* dropout_rng, double lr_scale = 1.0);

// Forward-only losses with dropout off (validation).
StepLosses pretrain_eval(model::ParamStore& store, const MaskedBatch& batch);

struct PretrainResult {
    model::ParamStore final_store;
    model::ParamStore best_store;
    PretrainReport report;
};

// Deterministic 16:1 train/validation split by seeded shuffle, per-epoch
// training plus validation losses, final and best-validation states. When
// `run_dir` is given, writes metrics/pretrain.csv and checkpoints/
// {final,best}.ckpt under it.
PretrainResult pretrain_run(const model::ModelConfig& model_config, const PretrainConfig& config,
                            const std::vector<std::string>& corpus, const chem::Vocab& vocab,
                            std::uint64_t seed, const std::optional<std::string>& run_dir = {});

}  // namespace delicate::pretrain
