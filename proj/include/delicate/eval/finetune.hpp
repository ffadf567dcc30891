#pragma once

#include <string>

#include "delicate/chem/vocab.hpp"
#include "delicate/eval/dataset.hpp"
#include "delicate/eval/split.hpp"
#include "delicate/model/params.hpp"

namespace delicate::eval {

struct FinetuneConfig {
    double lr = 3e-5;
    int batch_size = 16;
    int max_epochs = 50;
    int patience = 5;      // epochs without validation improvement
    int folds = kFoldCount;
};

// Per-fold and mean metric (ROC-AUC or r^2) with the standard error of the
// mean over folds.
struct MetricsReport {
    TaskKind kind = TaskKind::classification;
    std::vector<double> fold_metrics;
    double mean = 0.0;
    double sem = 0.0;

    // Rows `fold,metric` plus a summary line `mean,<m>,sem,<s>`.
    void write_csv(const std::string& path) const;
};

// Fine-tunes the full encoder plus a fresh affine head on the pooled output
// (sigmoid + binary cross-entropy for classification, identity + MSE for
// regression), with early stopping on the validation metric. The test
// metric of each fold is evaluated at the best-validation epoch.
MetricsReport finetune(const model::ParamStore& checkpoint, const chem::Vocab& vocab,
                       const TaskDataset& dataset, std::uint64_t seed, FinetuneConfig cfg = {});

// Linear model over the 16 normalized descriptors, same split/CV protocol
// and metrics as finetune.
MetricsReport baseline_descriptor_model(const TaskDataset& dataset, std::uint64_t seed,
                                        FinetuneConfig cfg = {});

}  // namespace delicate::eval
