#pragma once

#include <optional>
#include <string>
#include <vector>

#include "delicate/model/encoder.hpp"
#include "delicate/pretrain/masking.hpp"
#include "delicate/tensor/adam.hpp"

namespace delicate::distill {

// Knowledge-distillation settings. The total loss is the sum of the enabled
// components:
//   l_mlm    - masked cross-entropy of the student's vocab logits vs the
//              true tokens,
//   l_hidn   - MSE between mapped student/teacher hidden states over
//              non-PAD positions, averaged over mapped pairs,
//   l_logits - MSE between the temperature-softened probability vectors of
//              student and teacher at labeled positions (all non-PAD
//              positions when logits_all_positions is set).
struct DistillConfig {
    double temperature = 8.0;
    bool use_mlm = true;
    bool use_hidn = true;
    bool use_logits = true;
    bool logits_all_positions = false;
    tensor::AdamConfig adam;
    bool lr_linear_decay = false;   // anneal the step size to 0 over the run

    void validate() const {
        if (temperature <= 0.0) throw config_error("distillation temperature must be > 0");
    }
};

// Per-step loss values; total is exactly the sum of the enabled components.
struct DistillLossReport {
    double l_mlm = 0.0;
    double l_hidn = 0.0;
    double l_logits = 0.0;
    double total = 0.0;
};

// Student state s (0 = embedding output .. student_layers) maps to teacher
// state s * (teacher_layers / student_layers). Requires divisible depths.
std::vector<int> uniform_layer_map(int teacher_layers, int student_layers);

// Teacher-side values consumed by the loss (computed with gradients
// disabled and re-used as constants on the student tape).
struct TeacherSignals {
    std::vector<tensor::Tensor> hidden_states;  // [B, S, H] per state
    tensor::Tensor logits;                      // [B, S, V]
};

TeacherSignals teacher_forward(model::ParamStore& teacher, const pretrain::MaskedBatch& batch);

struct DistillLossVars {
    tensor::Var total;
    DistillLossReport report;
};

// Builds the enabled loss components on the student tape. Disabled
// components contribute exactly 0 and their teacher inputs are not read.
DistillLossVars distill_losses(tensor::Tape& tape, const TeacherSignals& teacher,
                               const model::EncoderOutput& student_out, tensor::Var student_logits,
                               const pretrain::MaskedBatch& batch, const DistillConfig& cfg,
                               const std::vector<int>& layer_map);

struct DistillResult {
    model::ParamStore student;
    std::vector<DistillLossReport> trace;   // one entry per step

    // One line per step: step,l_mlm,l_hidn,l_logits,total
    void write_trace(const std::string& path) const;
};

// General distillation: frozen teacher, randomly initialized student,
// masked batches drawn from the corpus, Adam on the triple loss. Works for
// any tied/untied teacher-student combination with equal hidden sizes.
DistillResult distill_run(model::ParamStore& teacher, const model::ModelConfig& student_config,
                          const std::vector<std::string>& corpus, const chem::Vocab& vocab,
                          const DistillConfig& cfg, int steps, int batch_size, std::uint64_t seed,
                          const std::optional<std::string>& run_dir = {});

}  // namespace delicate::distill
