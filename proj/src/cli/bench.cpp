#include "delicate/cli/bench.hpp"

#include <algorithm>
#include <chrono>

#include "delicate/chem/descriptors.hpp"
#include "delicate/model/encoder.hpp"
#include "delicate/pretrain/pretrain.hpp"

namespace delicate::bench {

using namespace delicate::tensor;
using Clock = std::chrono::steady_clock;

namespace {

pretrain::MaskedBatch synthetic_batch(const model::ModelConfig& cfg, int batch, int seq,
                                      std::uint64_t seed) {
    Rng rng(seed, Rng::kData);
    pretrain::MaskedBatch b;
    b.grid.batch = batch;
    b.grid.seq = seq;
    b.grid.ids.resize(static_cast<std::size_t>(batch) * seq);
    b.grid.mask.assign(static_cast<std::size_t>(batch) * seq, 1);
    b.labels.assign(static_cast<std::size_t>(batch) * seq, -1);
    const int content = cfg.vocab_size - chem::Vocab::kNumSpecials;
    for (auto& id : b.grid.ids)
        id = chem::Vocab::kNumSpecials + static_cast<int>(rng.below(std::max(1, content)));
    for (int i = 0; i < batch; ++i) {
        b.grid.ids[static_cast<std::size_t>(i) * seq] = chem::Vocab::kCls;
        b.grid.ids[static_cast<std::size_t>(i) * seq + seq - 1] = chem::Vocab::kSep;
        // label ~15% of interior positions
        for (int s = 1; s + 1 < seq; ++s)
            if (rng.uniform() < 0.15) {
                std::size_t pos = static_cast<std::size_t>(i) * seq + s;
                b.labels[pos] = b.grid.ids[pos];
                b.grid.ids[pos] = chem::Vocab::kMask;
            }
        if (b.labels[static_cast<std::size_t>(i) * seq + 1] < 0) {
            std::size_t pos = static_cast<std::size_t>(i) * seq + 1;
            b.labels[pos] = b.grid.ids[pos];
            b.grid.ids[pos] = chem::Vocab::kMask;
        }
    }
    b.descriptor_targets.assign(static_cast<std::size_t>(batch) * chem::kDescriptorCount, 0.0);
    return b;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

}  // namespace

ThroughputReport run_benchmark(model::ParamStore& store, int batch, int seq,
                               const std::string& model_id, int windows, int forward_iters,
                               int train_iters) {
    if (batch < 1 || seq < 2) throw config_error("bench needs batch >= 1 and seq >= 2");
    auto batch_data = synthetic_batch(store.config, batch, seq, 99);
    const double tokens = static_cast<double>(batch) * seq;

    auto forward_once = [&]() {
        Tape tape(store.precision, /*training=*/false, nullptr, /*grad_enabled=*/false);
        model::encode(store, tape, batch_data.grid.ids, batch_data.grid.mask, batch, seq);
    };

    AdamState adam;
    Rng dropout_rng(99, Rng::kDropout);
    auto train_once = [&]() {
        pretrain::pretrain_step(store, adam, batch_data, &dropout_rng);
    };

    ThroughputReport report;
    report.model_id = model_id;
    report.batch = batch;
    report.seq = seq;

    std::vector<double> fwd_rates, train_rates;
    for (int w = 0; w <= windows; ++w) {   // window 0 is warmup
        auto t0 = Clock::now();
        for (int i = 0; i < forward_iters; ++i) forward_once();
        double secs = std::chrono::duration<double>(Clock::now() - t0).count();
        if (w > 0) fwd_rates.push_back(tokens * forward_iters / secs);
    }
    for (int w = 0; w <= windows; ++w) {
        auto t0 = Clock::now();
        for (int i = 0; i < train_iters; ++i) train_once();
        double secs = std::chrono::duration<double>(Clock::now() - t0).count();
        if (w > 0) train_rates.push_back(tokens * train_iters / secs);
    }
    report.forward_tokens_per_sec = median(fwd_rates);
    report.train_tokens_per_sec = median(train_rates);
    return report;
}

}  // namespace delicate::bench
