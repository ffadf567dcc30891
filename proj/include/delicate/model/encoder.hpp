#pragma once

#include <cstdint>
#include <vector>

#include "delicate/model/params.hpp"
#include "delicate/tensor/tape.hpp"

namespace delicate::model {

// hidden_states has num_layers + 1 entries of shape [batch, seq, hidden];
// index 0 is the embedding output. pooled is tanh(affine(CLS state)),
// shape [batch, hidden].
struct EncoderOutput {
    std::vector<tensor::Var> hidden_states;
    tensor::Var pooled;
};

// Post-layernorm BERT blocks: multi-head self-attention with 1/sqrt(head
// dim) scaling and additive masking of PAD keys, residual + layernorm, gelu
// FFN, residual + layernorm. With share_layers the same tensors are applied
// at every depth. `token_ids` and `attention_mask` are row-major
// [batch, seq]; mask entries are 1 for real tokens, 0 for PAD.
EncoderOutput encode(ParamStore& store, tensor::Tape& tape, const std::vector<int>& token_ids,
                     const std::vector<std::uint8_t>& attention_mask, std::int64_t batch,
                     std::int64_t seq);

// Affine head over the last hidden state [batch, seq, hidden] -> vocab
// logits [batch, seq, vocab]. No softmax; the losses apply it.
tensor::Var mlm_logits(ParamStore& store, tensor::Tape& tape, tensor::Var hidden);

// Affine head over pooled output -> [batch, 16] descriptor predictions.
tensor::Var physchem_pred(ParamStore& store, tensor::Tape& tape, tensor::Var pooled);

}  // namespace delicate::model
