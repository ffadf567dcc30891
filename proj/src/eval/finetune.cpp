#include "delicate/eval/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>

#include "delicate/chem/mol.hpp"
#include "delicate/eval/metrics.hpp"
#include "delicate/model/encoder.hpp"
#include "delicate/pretrain/masking.hpp"
#include "delicate/rng.hpp"
#include "delicate/tensor/adam.hpp"

namespace delicate::eval {

using namespace delicate::tensor;
using delicate::model::ParamStore;
using delicate::pretrain::assemble_grid;

namespace {

constexpr const char* kHeadWeight = "task.head.weight";
constexpr const char* kHeadBias = "task.head.bias";

double fold_metric(TaskKind kind, const std::vector<double>& scores,
                   const std::vector<double>& labels) {
    if (kind == TaskKind::classification) {
        std::vector<int> int_labels(labels.size());
        for (std::size_t i = 0; i < labels.size(); ++i) int_labels[i] = static_cast<int>(labels[i]);
        return roc_auc(scores, int_labels);
    }
    return r2(scores, labels);
}

std::vector<double> subset(const std::vector<double>& values, const std::vector<int>& idx) {
    std::vector<double> out;
    out.reserve(idx.size());
    for (int i : idx) out.push_back(values[i]);
    return out;
}

// ---- encoder-backed task model ------------------------------------------

struct EncoderTask {
    ParamStore store;  // encoder weights + task head
    const std::vector<chem::TokenSeq>* seqs = nullptr;

    Var forward(Tape& tape, const std::vector<int>& indices) {
        auto grid = assemble_grid(*seqs, indices);
        auto enc = model::encode(store, tape, grid.ids, grid.mask, grid.batch, grid.seq);
        Var logits = add_bias(matmul(enc.pooled, tape.param(store.at(kHeadWeight))),
                              tape.param(store.at(kHeadBias)));
        return reshape(logits, {grid.batch});
    }
};

// ---- descriptor-backed linear baseline -----------------------------------

struct DescriptorTask {
    ParamMap params;  // task head only
    const std::vector<chem::DescriptorVector>* features = nullptr;

    Var forward(Tape& tape, const std::vector<int>& indices) {
        std::int64_t b = static_cast<std::int64_t>(indices.size());
        Tensor x({b, chem::kDescriptorCount});
        for (std::int64_t i = 0; i < b; ++i)
            for (int k = 0; k < chem::kDescriptorCount; ++k)
                x.data()[i * chem::kDescriptorCount + k] = (*features)[indices[i]][k];
        Var logits = add_bias(matmul(tape.leaf(std::move(x)), tape.param(params.at(kHeadWeight))),
                              tape.param(params.at(kHeadBias)));
        return reshape(logits, {b});
    }
};

template <typename Model>
std::vector<double> predict(Model& task, Precision precision, const std::vector<int>& indices,
                            int batch_size) {
    std::vector<double> scores;
    scores.reserve(indices.size());
    for (std::size_t pos = 0; pos < indices.size(); pos += batch_size) {
        std::size_t end = std::min(pos + static_cast<std::size_t>(batch_size), indices.size());
        std::vector<int> chunk(indices.begin() + pos, indices.begin() + end);
        Tape tape(precision, /*training=*/false, nullptr, /*grad_enabled=*/false);
        Var out = task.forward(tape, chunk);
        const Tensor& v = tape.value(out);
        for (std::int64_t i = 0; i < v.numel(); ++i) scores.push_back(v.data()[i]);
    }
    return scores;
}

// Shared fold loop: trains `task` (whose trainable state lives in `params`)
// with early stopping on the validation metric, returns the test metric at
// the best epoch. Regression targets are standardized on the train split so
// the head starts at the right scale; r^2 is invariant under mapping the
// predictions back.
template <typename Model>
double run_fold(Model& task, ParamMap& params, Precision precision, const TaskDataset& dataset,
                const std::vector<double>& labels, const SplitPlan& plan, const FinetuneConfig& cfg,
                std::uint64_t fold_seed) {
    Rng shuffle_rng(fold_seed, Rng::kShuffle);
    Rng dropout_rng(fold_seed, Rng::kDropout);
    AdamState adam(AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});

    double target_mean = 0.0, target_std = 1.0;
    if (dataset.kind == TaskKind::regression) {
        std::vector<double> train_labels = subset(labels, plan.train);
        target_mean = mean(train_labels);
        double var = 0.0;
        for (double y : train_labels) var += (y - target_mean) * (y - target_mean);
        target_std = std::sqrt(var / static_cast<double>(train_labels.size()));
        if (target_std <= 0.0) target_std = 1.0;
    }
    auto standardized = [&](const std::vector<int>& idx) {
        std::vector<double> out = subset(labels, idx);
        for (double& y : out) y = (y - target_mean) / target_std;
        return out;
    };
    auto metric_on = [&](const std::vector<int>& idx) {
        std::vector<double> scores = predict(task, precision, idx, cfg.batch_size);
        if (dataset.kind == TaskKind::regression)
            for (double& s : scores) s = s * target_std + target_mean;
        return fold_metric(dataset.kind, scores, subset(labels, idx));
    };

    std::vector<int> train_order = plan.train;
    double best_val = -std::numeric_limits<double>::infinity();
    ParamMap best_params = params;
    int epochs_since_best = 0;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        shuffle_rng.shuffle(train_order);
        for (std::size_t pos = 0; pos < train_order.size(); pos += cfg.batch_size) {
            std::size_t end =
                std::min(pos + static_cast<std::size_t>(cfg.batch_size), train_order.size());
            std::vector<int> chunk(train_order.begin() + pos, train_order.begin() + end);
            Tape tape(precision, /*training=*/true, &dropout_rng);
            Var out = task.forward(tape, chunk);
            Var loss = dataset.kind == TaskKind::classification
                           ? bce_with_logits(out, subset(labels, chunk))
                           : mse(out, tape.leaf(Tensor({static_cast<std::int64_t>(chunk.size())},
                                                       standardized(chunk))));
            zero_grads(params);
            tape.backward(loss);
            adam.step(params, precision);
        }
        double val_metric = metric_on(plan.val);
        if (val_metric > best_val) {
            best_val = val_metric;
            best_params = params;
            epochs_since_best = 0;
        } else if (++epochs_since_best >= cfg.patience) {
            break;
        }
    }

    params = best_params;
    return metric_on(plan.test);
}

MetricsReport summarize(TaskKind kind, std::vector<double> fold_metrics) {
    MetricsReport report;
    report.kind = kind;
    report.fold_metrics = std::move(fold_metrics);
    report.mean = mean(report.fold_metrics);
    report.sem = sem(report.fold_metrics);
    return report;
}

}  // namespace

void MetricsReport::write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open report file for writing: " + path);
    out << "fold,metric\n";
    out.precision(17);
    for (std::size_t i = 0; i < fold_metrics.size(); ++i) out << i << ',' << fold_metrics[i] << '\n';
    out << "mean," << mean << ",sem," << sem << '\n';
}

MetricsReport finetune(const ParamStore& checkpoint, const chem::Vocab& vocab,
                       const TaskDataset& dataset, std::uint64_t seed, FinetuneConfig cfg) {
    dataset.validate();
    if (checkpoint.config.vocab_size != vocab.size())
        throw config_error("checkpoint vocab size " + std::to_string(checkpoint.config.vocab_size) +
                           " does not match tokenizer vocab of size " + std::to_string(vocab.size()));

    std::vector<chem::TokenSeq> seqs;
    std::vector<double> labels;
    seqs.reserve(dataset.records.size());
    labels.reserve(dataset.records.size());
    for (const auto& rec : dataset.records) {
        seqs.push_back(chem::tokenize(rec.smiles, vocab, checkpoint.config.max_seq_len));
        labels.push_back(rec.label);
    }

    std::vector<double> fold_metrics;
    for (int fold = 0; fold < cfg.folds; ++fold) {
        std::uint64_t fold_seed = seed + static_cast<std::uint64_t>(fold);
        SplitPlan plan = split(dataset, seed, fold);

        EncoderTask task;
        task.store = checkpoint;
        task.seqs = &seqs;
        Rng init_rng(fold_seed, Rng::kInit);
        Tensor head_w({checkpoint.config.hidden_size, 1});
        for (std::int64_t i = 0; i < head_w.numel(); ++i)
            head_w.data()[i] = init_rng.truncated_gaussian(0.02);
        head_w.round_to(checkpoint.precision);
        task.store.params.emplace(kHeadWeight, Param(std::move(head_w)));
        task.store.params.emplace(kHeadBias, Param(Tensor({1})));

        fold_metrics.push_back(run_fold(task, task.store.params, checkpoint.precision, dataset,
                                        labels, plan, cfg, fold_seed));
    }
    return summarize(dataset.kind, std::move(fold_metrics));
}

MetricsReport baseline_descriptor_model(const TaskDataset& dataset, std::uint64_t seed,
                                        FinetuneConfig cfg) {
    dataset.validate();
    std::vector<chem::DescriptorVector> raw;
    std::vector<double> labels;
    raw.reserve(dataset.records.size());
    for (const auto& rec : dataset.records) {
        raw.push_back(chem::descriptors(chem::parse_smiles(rec.smiles)));
        labels.push_back(rec.label);
    }

    // A linear probe trains fine with a larger step size than the encoder.
    if (cfg.lr == FinetuneConfig{}.lr) cfg.lr = 1e-2;

    std::vector<double> fold_metrics;
    for (int fold = 0; fold < cfg.folds; ++fold) {
        std::uint64_t fold_seed = seed + static_cast<std::uint64_t>(fold);
        SplitPlan plan = split(dataset, seed, fold);

        std::vector<chem::DescriptorVector> train_desc;
        for (int i : plan.train) train_desc.push_back(raw[i]);
        chem::NormStats norm = chem::fit_norm(train_desc);
        auto features = std::make_unique<std::vector<chem::DescriptorVector>>(raw.size());
        for (std::size_t i = 0; i < raw.size(); ++i) (*features)[i] = chem::apply_norm(raw[i], norm);

        DescriptorTask task;
        task.features = features.get();
        Rng init_rng(fold_seed, Rng::kInit);
        Tensor head_w({chem::kDescriptorCount, 1});
        for (std::int64_t i = 0; i < head_w.numel(); ++i)
            head_w.data()[i] = init_rng.truncated_gaussian(0.02);
        task.params.emplace(kHeadWeight, Param(std::move(head_w)));
        task.params.emplace(kHeadBias, Param(Tensor({1})));

        fold_metrics.push_back(run_fold(task, task.params, Precision::f64, dataset, labels, plan,
                                        cfg, fold_seed));
    }
    return summarize(dataset.kind, std::move(fold_metrics));
}

}  // namespace delicate::eval
