#pragma once

#include <string>
#include <vector>

#include "delicate/chem/fingerprint.hpp"
#include "delicate/chem/vocab.hpp"
#include "delicate/model/params.hpp"
#include "delicate/tensor/tensor.hpp"

namespace delicate::eval {

// Pooled outputs in evaluation mode, one row per molecule: [n, hidden].
// A molecule that fails to tokenize is reported with its index.
tensor::Tensor embed(const model::ParamStore& checkpoint, const chem::Vocab& vocab,
                     const std::vector<std::string>& smiles, int batch_size = 32);

double cosine_similarity(const double* a, const double* b, std::int64_t n);

// Mean cosine similarity over all unordered row pairs of an [n, d] matrix.
double mean_pairwise_cosine(const tensor::Tensor& matrix);

// Nearest-active ranking: each library row is scored by its maximum
// similarity to the query actives, and the ranking is summarized as
// ROC-AUC over the library's active flags.
double vs_rank(const tensor::Tensor& query_actives, const tensor::Tensor& library,
               const std::vector<int>& library_active);

double vs_rank(const std::vector<chem::Fingerprint>& query_actives,
               const std::vector<chem::Fingerprint>& library,
               const std::vector<int>& library_active);

}  // namespace delicate::eval
