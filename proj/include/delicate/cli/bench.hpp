#pragma once

#include <string>

#include "delicate/model/params.hpp"

namespace delicate::bench {

struct ThroughputReport {
    std::string model_id;
    int batch = 0;
    int seq = 0;
    double forward_tokens_per_sec = 0.0;
    double train_tokens_per_sec = 0.0;
};

// Median of `windows` timed windows after one warmup window; each window
// runs a fixed number of iterations on a synthetic batch.
ThroughputReport run_benchmark(model::ParamStore& store, int batch, int seq,
                               const std::string& model_id = "", int windows = 5,
                               int forward_iters = 8, int train_iters = 3);

}  // namespace delicate::bench
