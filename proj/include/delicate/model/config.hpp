#pragma once

#include <cstdint>

#include "delicate/error.hpp"

namespace delicate::model {

struct ModelConfig {
    int hidden_size = 64;
    int num_layers = 4;
    int num_heads = 4;
    int ffn_size = 128;
    int max_seq_len = 128;
    int vocab_size = 0;
    bool share_layers = false;
    double dropout_p = 0.1;

    int head_dim() const { return hidden_size / num_heads; }

    void validate() const {
        if (num_layers < 1) throw config_error("num_layers must be >= 1");
        if (num_heads < 1 || hidden_size % num_heads != 0)
            throw config_error("hidden_size must be divisible by num_heads");
        if (vocab_size < 6) throw config_error("vocab_size must be >= 6 (5 specials + content)");
        if (ffn_size < 1 || max_seq_len < 1) throw config_error("ffn_size and max_seq_len must be >= 1");
        if (dropout_p < 0.0 || dropout_p >= 1.0) throw config_error("dropout_p must be in [0, 1)");
    }

    bool same_architecture(const ModelConfig& other) const {
        return hidden_size == other.hidden_size && num_layers == other.num_layers &&
               num_heads == other.num_heads && ffn_size == other.ffn_size &&
               max_seq_len == other.max_seq_len && vocab_size == other.vocab_size &&
               share_layers == other.share_layers;
    }
};

}  // namespace delicate::model
