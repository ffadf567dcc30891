#include "delicate/model/params.hpp"

#include "delicate/chem/descriptors.hpp"
#include "delicate/rng.hpp"

namespace delicate::model {

using tensor::Param;
using tensor::Precision;
using tensor::Shape;
using tensor::Tensor;

tensor::Param& ParamStore::at(const std::string& name) {
    auto it = params.find(name);
    if (it == params.end()) throw config_error("no parameter named '" + name + "'");
    return it->second;
}

const tensor::Param& ParamStore::at(const std::string& name) const {
    auto it = params.find(name);
    if (it == params.end()) throw config_error("no parameter named '" + name + "'");
    return it->second;
}

std::vector<std::pair<std::string, Shape>> param_layout(const ModelConfig& config) {
    config.validate();
    const std::int64_t h = config.hidden_size;
    const std::int64_t f = config.ffn_size;
    const std::int64_t v = config.vocab_size;
    const std::int64_t s = config.max_seq_len;
    const std::int64_t d = chem::kDescriptorCount;

    std::vector<std::pair<std::string, Shape>> layout;
    layout.push_back({"embeddings.token", {v, h}});
    layout.push_back({"embeddings.position", {s, h}});
    layout.push_back({"embeddings.norm.gamma", {h}});
    layout.push_back({"embeddings.norm.beta", {h}});

    int physical_layers = config.share_layers ? 1 : config.num_layers;
    for (int i = 0; i < physical_layers; ++i) {
        std::string prefix =
            config.share_layers ? "layers.shared." : "layers." + std::to_string(i) + ".";
        layout.push_back({prefix + "attn.query.weight", {h, h}});
        layout.push_back({prefix + "attn.query.bias", {h}});
        layout.push_back({prefix + "attn.key.weight", {h, h}});
        layout.push_back({prefix + "attn.key.bias", {h}});
        layout.push_back({prefix + "attn.value.weight", {h, h}});
        layout.push_back({prefix + "attn.value.bias", {h}});
        layout.push_back({prefix + "attn.output.weight", {h, h}});
        layout.push_back({prefix + "attn.output.bias", {h}});
        layout.push_back({prefix + "attn.norm.gamma", {h}});
        layout.push_back({prefix + "attn.norm.beta", {h}});
        layout.push_back({prefix + "ffn.inner.weight", {h, f}});
        layout.push_back({prefix + "ffn.inner.bias", {f}});
        layout.push_back({prefix + "ffn.outer.weight", {f, h}});
        layout.push_back({prefix + "ffn.outer.bias", {h}});
        layout.push_back({prefix + "ffn.norm.gamma", {h}});
        layout.push_back({prefix + "ffn.norm.beta", {h}});
    }

    layout.push_back({"pooler.weight", {h, h}});
    layout.push_back({"pooler.bias", {h}});
    layout.push_back({"heads.mlm.weight", {h, v}});
    layout.push_back({"heads.mlm.bias", {v}});
    layout.push_back({"heads.physchem.weight", {h, d}});
    layout.push_back({"heads.physchem.bias", {d}});
    return layout;
}

std::int64_t param_count(const ModelConfig& config) {
    std::int64_t total = 0;
    for (const auto& [name, shape] : param_layout(config)) total += tensor::shape_numel(shape);
    return total;
}

namespace {

bool is_weight_matrix(const std::string& name, const Shape& shape) {
    if (shape.size() == 2) return true;  // embeddings and affine weights
    (void)name;
    return false;
}

bool is_norm_gain(const std::string& name) {
    return name.size() >= 5 && name.compare(name.size() - 5, 5, "gamma") == 0;
}

}  // namespace

ParamStore init_params(const ModelConfig& config, std::uint64_t seed, Precision precision) {
    ParamStore store;
    store.config = config;
    store.precision = precision;
    Rng rng(seed, Rng::kInit);
    for (const auto& [name, shape] : param_layout(config)) {
        Tensor value(shape);
        if (is_weight_matrix(name, shape)) {
            for (std::int64_t i = 0; i < value.numel(); ++i)
                value.data()[i] = rng.truncated_gaussian(0.02);
        } else if (is_norm_gain(name)) {
            value.fill(1.0);
        }  // biases and norm shifts stay zero
        value.round_to(precision);
        store.params.emplace(name, Param(std::move(value)));
    }
    return store;
}

}  // namespace delicate::model
