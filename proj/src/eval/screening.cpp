#include "delicate/eval/screening.hpp"

#include <algorithm>
#include <cmath>

#include "delicate/eval/metrics.hpp"
#include "delicate/model/encoder.hpp"
#include "delicate/pretrain/masking.hpp"
#include "delicate/tensor/tape.hpp"

namespace delicate::eval {

using namespace delicate::tensor;

Tensor embed(const model::ParamStore& checkpoint, const chem::Vocab& vocab,
             const std::vector<std::string>& smiles, int batch_size) {
    if (smiles.empty()) throw data_error("embed: no molecules");
    std::vector<chem::TokenSeq> seqs;
    seqs.reserve(smiles.size());
    for (std::size_t i = 0; i < smiles.size(); ++i) {
        try {
            seqs.push_back(chem::tokenize(smiles[i], vocab, checkpoint.config.max_seq_len));
        } catch (const Error& e) {
            throw data_error("molecule " + std::to_string(i) + " failed to tokenize: " + e.what());
        }
    }
    const std::int64_t h = checkpoint.config.hidden_size;
    Tensor out({static_cast<std::int64_t>(smiles.size()), h});
    model::ParamStore store = checkpoint;  // encode() leases params mutably
    for (std::size_t pos = 0; pos < seqs.size(); pos += batch_size) {
        std::size_t end = std::min(pos + static_cast<std::size_t>(batch_size), seqs.size());
        std::vector<int> chunk;
        for (std::size_t i = pos; i < end; ++i) chunk.push_back(static_cast<int>(i));
        auto grid = pretrain::assemble_grid(seqs, chunk);
        Tape tape(store.precision, /*training=*/false, nullptr, /*grad_enabled=*/false);
        auto enc = model::encode(store, tape, grid.ids, grid.mask, grid.batch, grid.seq);
        const Tensor& pooled = tape.value(enc.pooled);
        std::copy_n(pooled.data(), pooled.numel(), out.data() + static_cast<std::int64_t>(pos) * h);
    }
    return out;
}

double cosine_similarity(const double* a, const double* b, std::int64_t n) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) throw data_error("cosine similarity of a zero vector");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

double mean_pairwise_cosine(const Tensor& matrix) {
    if (matrix.rank() != 2) throw dimension_error("mean_pairwise_cosine: matrix must be rank 2");
    const std::int64_t n = matrix.dim(0), d = matrix.dim(1);
    if (n < 2) throw data_error("mean_pairwise_cosine: needs at least 2 rows");
    for (std::int64_t i = 0; i < n; ++i) {
        double norm = 0.0;
        for (std::int64_t k = 0; k < d; ++k)
            norm += matrix.data()[i * d + k] * matrix.data()[i * d + k];
        if (norm == 0.0) throw data_error("mean_pairwise_cosine: row " + std::to_string(i) + " is zero");
    }
    double sum = 0.0;
    std::int64_t pairs = 0;
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = i + 1; j < n; ++j) {
            sum += cosine_similarity(matrix.data() + i * d, matrix.data() + j * d, d);
            ++pairs;
        }
    return sum / static_cast<double>(pairs);
}

double vs_rank(const Tensor& query_actives, const Tensor& library,
               const std::vector<int>& library_active) {
    if (query_actives.rank() != 2 || library.rank() != 2 ||
        query_actives.dim(1) != library.dim(1))
        throw dimension_error("vs_rank: query and library widths differ");
    if (static_cast<std::int64_t>(library_active.size()) != library.dim(0))
        throw dimension_error("vs_rank: active flags do not match library size");
    const std::int64_t nq = query_actives.dim(0), nl = library.dim(0), d = library.dim(1);
    if (nq == 0) throw data_error("vs_rank: no query actives");
    std::vector<double> scores(nl);
    for (std::int64_t i = 0; i < nl; ++i) {
        double best = -2.0;
        for (std::int64_t q = 0; q < nq; ++q)
            best = std::max(best, cosine_similarity(library.data() + i * d,
                                                    query_actives.data() + q * d, d));
        scores[i] = best;
    }
    return roc_auc(scores, library_active);
}

double vs_rank(const std::vector<chem::Fingerprint>& query_actives,
               const std::vector<chem::Fingerprint>& library,
               const std::vector<int>& library_active) {
    if (library_active.size() != library.size())
        throw dimension_error("vs_rank: active flags do not match library size");
    if (query_actives.empty()) throw data_error("vs_rank: no query actives");
    std::vector<double> scores(library.size());
    for (std::size_t i = 0; i < library.size(); ++i) {
        double best = 0.0;
        for (const auto& q : query_actives)
            best = std::max(best, chem::tanimoto(library[i], q));
        scores[i] = best;
    }
    return roc_auc(scores, library_active);
}

}  // namespace delicate::eval
