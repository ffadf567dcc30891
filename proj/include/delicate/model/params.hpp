#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "delicate/model/config.hpp"
#include "delicate/tensor/adam.hpp"
#include "delicate/tensor/tensor.hpp"

namespace delicate::model {

// Named parameter tensors for one encoder. With share_layers set there is
// exactly one physical copy of the per-layer tensors (prefix
// "layers.shared.") referenced at every depth; otherwise one copy per layer
// ("layers.<i>.").
struct ParamStore {
    ModelConfig config;
    tensor::Precision precision = tensor::Precision::f64;
    tensor::ParamMap params;

    tensor::Param& at(const std::string& name);
    const tensor::Param& at(const std::string& name) const;

    std::string layer_prefix(int layer) const {
        return config.share_layers ? "layers.shared." : "layers." + std::to_string(layer) + ".";
    }
};

// Name -> shape of every unique tensor, in checkpoint order.
std::vector<std::pair<std::string, tensor::Shape>> param_layout(const ModelConfig& config);

// Exact number of unique scalar parameters (tied layers counted once).
std::int64_t param_count(const ModelConfig& config);

// Truncated-normal(0, 0.02) weights, zero biases, unit layernorm gain.
// Deterministic for a fixed seed; tied configs draw one layer's worth of
// values.
ParamStore init_params(const ModelConfig& config, std::uint64_t seed,
                       tensor::Precision precision = tensor::Precision::f64);

}  // namespace delicate::model
