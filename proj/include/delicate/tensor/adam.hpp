#pragma once

#include <map>
#include <string>

#include "delicate/tensor/tensor.hpp"

namespace delicate::tensor {

using ParamMap = std::map<std::string, Param>;

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Bias-corrected Adam. Moment buffers are keyed by parameter name and
// created on first use; the step counter is shared across parameters.
class AdamState {
public:
    explicit AdamState(AdamConfig config = {}) : config_(config) {}

    const AdamConfig& config() const { return config_; }
    long step_count() const { return step_; }

    // Applies one update from the gradients currently held in `params`.
    // `lr_scale` multiplies the base learning rate (warmup schedules).
    void step(ParamMap& params, Precision precision = Precision::f64, double lr_scale = 1.0);

private:
    struct Moments {
        Tensor m;
        Tensor v;
    };

    AdamConfig config_;
    long step_ = 0;
    std::map<std::string, Moments> moments_;
};

void zero_grads(ParamMap& params);

}  // namespace delicate::tensor
