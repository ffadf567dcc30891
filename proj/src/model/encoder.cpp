#include "delicate/model/encoder.hpp"

#include <cmath>

#include "delicate/chem/descriptors.hpp"

namespace delicate::model {

using namespace delicate::tensor;

EncoderOutput encode(ParamStore& store, Tape& tape, const std::vector<int>& token_ids,
                     const std::vector<std::uint8_t>& attention_mask, std::int64_t batch,
                     std::int64_t seq) {
    const ModelConfig& cfg = store.config;
    if (seq > cfg.max_seq_len)
        throw data_error("sequence length " + std::to_string(seq) + " exceeds max_seq_len " +
                         std::to_string(cfg.max_seq_len));
    if (static_cast<std::int64_t>(token_ids.size()) != batch * seq ||
        static_cast<std::int64_t>(attention_mask.size()) != batch * seq)
        throw dimension_error("encode: token/mask buffers do not match batch*seq");

    const std::int64_t h = cfg.hidden_size;
    const std::int64_t heads = cfg.num_heads;
    const std::int64_t dh = cfg.head_dim();
    const double p = cfg.dropout_p;
    const std::int64_t rows = batch * seq;

    std::vector<int> pos_ids(rows);
    for (std::int64_t b = 0; b < batch; ++b)
        for (std::int64_t s = 0; s < seq; ++s) pos_ids[b * seq + s] = static_cast<int>(s);

    Var tok = embedding(tape.param(store.at("embeddings.token")), token_ids, {rows});
    Var pos = embedding(tape.param(store.at("embeddings.position")), pos_ids, {rows});
    Var x = add(tok, pos);
    x = layer_norm(x, tape.param(store.at("embeddings.norm.gamma")),
                   tape.param(store.at("embeddings.norm.beta")));
    x = dropout(x, p);

    EncoderOutput out;
    out.hidden_states.reserve(cfg.num_layers + 1);
    out.hidden_states.push_back(reshape(x, {batch, seq, h}));

    for (int layer = 0; layer < cfg.num_layers; ++layer) {
        const std::string prefix = store.layer_prefix(layer);
        auto lp = [&](const char* name) -> Var { return tape.param(store.at(prefix + name)); };

        Var q = add_bias(matmul(x, lp("attn.query.weight")), lp("attn.query.bias"));
        Var k = add_bias(matmul(x, lp("attn.key.weight")), lp("attn.key.bias"));
        Var v = add_bias(matmul(x, lp("attn.value.weight")), lp("attn.value.bias"));
        Var q4 = permute(reshape(q, {batch, seq, heads, dh}), {0, 2, 1, 3});
        Var k4 = permute(reshape(k, {batch, seq, heads, dh}), {0, 2, 1, 3});
        Var v4 = permute(reshape(v, {batch, seq, heads, dh}), {0, 2, 1, 3});

        Var scores = scale(matmul(q4, transpose_last2(k4)), 1.0 / std::sqrt(static_cast<double>(dh)));
        scores = mask_attention_scores(scores, attention_mask);
        Var attn = dropout(softmax(scores, -1), p);

        Var ctx = reshape(permute(matmul(attn, v4), {0, 2, 1, 3}), {rows, h});
        Var attn_out = dropout(add_bias(matmul(ctx, lp("attn.output.weight")),
                                        lp("attn.output.bias")), p);
        x = layer_norm(add(x, attn_out), lp("attn.norm.gamma"), lp("attn.norm.beta"));

        Var inner = gelu(add_bias(matmul(x, lp("ffn.inner.weight")), lp("ffn.inner.bias")));
        Var ffn_out = dropout(add_bias(matmul(inner, lp("ffn.outer.weight")),
                                       lp("ffn.outer.bias")), p);
        x = layer_norm(add(x, ffn_out), lp("ffn.norm.gamma"), lp("ffn.norm.beta"));

        out.hidden_states.push_back(reshape(x, {batch, seq, h}));
    }

    std::vector<std::int64_t> cls_rows(batch);
    for (std::int64_t b = 0; b < batch; ++b) cls_rows[b] = b * seq;
    Var cls = gather_rows(x, cls_rows);
    out.pooled = tanh_act(add_bias(matmul(cls, tape.param(store.at("pooler.weight"))),
                                   tape.param(store.at("pooler.bias"))));
    return out;
}

tensor::Var mlm_logits(ParamStore& store, Tape& tape, Var hidden) {
    const Tensor& th = tape.value(hidden);
    if (th.rank() != 3) throw dimension_error("mlm_logits: hidden state must be [batch, seq, hidden]");
    std::int64_t batch = th.dim(0), seq = th.dim(1), h = th.dim(2);
    Var flat = reshape(hidden, {batch * seq, h});
    Var logits = add_bias(matmul(flat, tape.param(store.at("heads.mlm.weight"))),
                          tape.param(store.at("heads.mlm.bias")));
    return reshape(logits, {batch, seq, store.config.vocab_size});
}

tensor::Var physchem_pred(ParamStore& store, Tape& tape, Var pooled) {
    return add_bias(matmul(pooled, tape.param(store.at("heads.physchem.weight"))),
                    tape.param(store.at("heads.physchem.bias")));
}

}  // namespace delicate::model
