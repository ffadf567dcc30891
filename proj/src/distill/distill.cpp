#include "delicate/distill/distill.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "delicate/model/checkpoint.hpp"

namespace delicate::distill {

using namespace delicate::tensor;
using delicate::model::ParamStore;
using delicate::pretrain::MaskedBatch;

std::vector<int> uniform_layer_map(int teacher_layers, int student_layers) {
    if (student_layers < 1 || teacher_layers < 1)
        throw config_error("layer counts must be >= 1");
    if (teacher_layers % student_layers != 0)
        throw config_error("teacher depth " + std::to_string(teacher_layers) +
                           " is not divisible by student depth " + std::to_string(student_layers));
    int stride = teacher_layers / student_layers;
    std::vector<int> map(student_layers + 1);
    for (int s = 0; s <= student_layers; ++s) map[s] = s * stride;
    return map;
}

TeacherSignals teacher_forward(ParamStore& teacher, const MaskedBatch& batch) {
    Tape tape(teacher.precision, /*training=*/false, nullptr, /*grad_enabled=*/false);
    const auto& grid = batch.grid;
    auto out = model::encode(teacher, tape, grid.ids, grid.mask, grid.batch, grid.seq);
    TeacherSignals signals;
    signals.hidden_states.reserve(out.hidden_states.size());
    for (Var state : out.hidden_states) signals.hidden_states.push_back(tape.value(state));
    signals.logits = tape.value(model::mlm_logits(teacher, tape, out.hidden_states.back()));
    return signals;
}

namespace {

// Rows (into the flattened [B*S, .] layout) of all non-PAD positions.
std::vector<std::int64_t> real_rows(const pretrain::TokenGrid& grid) {
    std::vector<std::int64_t> rows;
    for (std::size_t i = 0; i < grid.mask.size(); ++i)
        if (grid.mask[i]) rows.push_back(static_cast<std::int64_t>(i));
    return rows;
}

// Softened probabilities of selected logit rows, computed off-tape.
Tensor soften_rows(const Tensor& logits_flat, const std::vector<std::int64_t>& rows, double temp) {
    const std::int64_t v = logits_flat.dim(1);
    Tensor out({static_cast<std::int64_t>(rows.size()), v});
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const double* src = logits_flat.data() + rows[r] * v;
        double* dst = out.data() + static_cast<std::int64_t>(r) * v;
        double mx = src[0] / temp;
        for (std::int64_t j = 1; j < v; ++j) mx = std::max(mx, src[j] / temp);
        double z = 0.0;
        for (std::int64_t j = 0; j < v; ++j) {
            dst[j] = std::exp(src[j] / temp - mx);
            z += dst[j];
        }
        for (std::int64_t j = 0; j < v; ++j) dst[j] /= z;
    }
    return out;
}

Tensor flatten2(const Tensor& t) {
    std::int64_t last = t.dim(t.rank() - 1);
    return Tensor({t.numel() / last, last}, t.vec());
}

}  // namespace

DistillLossVars distill_losses(Tape& tape, const TeacherSignals& teacher,
                               const model::EncoderOutput& student_out, Var student_logits,
                               const MaskedBatch& batch, const DistillConfig& cfg,
                               const std::vector<int>& layer_map) {
    cfg.validate();
    const auto& grid = batch.grid;
    const std::int64_t h = tape.value(student_out.hidden_states[0]).dim(2);
    if (!teacher.hidden_states.empty() && teacher.hidden_states[0].dim(2) != h)
        throw config_error("teacher hidden size " + std::to_string(teacher.hidden_states[0].dim(2)) +
                           " does not match student hidden size " + std::to_string(h));
    if (static_cast<int>(layer_map.size()) != static_cast<int>(student_out.hidden_states.size()))
        throw config_error("layer map covers " + std::to_string(layer_map.size()) +
                           " states, student has " + std::to_string(student_out.hidden_states.size()));

    DistillLossVars out;
    Var total = tape.leaf(Tensor::scalar(0.0));

    if (cfg.use_mlm) {
        Var flat = reshape(student_logits, tensor::Shape{grid.batch * grid.seq,
                                                         tape.value(student_logits).dim(2)});
        Var l_mlm = masked_cross_entropy(flat, batch.labels);
        out.report.l_mlm = tape.value(l_mlm).item();
        total = add(total, l_mlm);
    }

    if (cfg.use_hidn) {
        auto rows = real_rows(grid);
        Var sum = tape.leaf(Tensor::scalar(0.0));
        for (std::size_t s = 0; s < layer_map.size(); ++s) {
            int t_state = layer_map[s];
            if (t_state < 0 || t_state >= static_cast<int>(teacher.hidden_states.size()))
                throw config_error("layer map targets teacher state " + std::to_string(t_state) +
                                   " of " + std::to_string(teacher.hidden_states.size()));
            Var student_flat = reshape(student_out.hidden_states[s], {grid.batch * grid.seq, h});
            Var student_rows = gather_rows(student_flat, rows);
            Tensor teacher_flat = flatten2(teacher.hidden_states[t_state]);
            Tensor teacher_rows({static_cast<std::int64_t>(rows.size()), h});
            for (std::size_t r = 0; r < rows.size(); ++r)
                std::copy_n(teacher_flat.data() + rows[r] * h, h,
                            teacher_rows.data() + static_cast<std::int64_t>(r) * h);
            sum = add(sum, mse(student_rows, tape.leaf(std::move(teacher_rows))));
        }
        Var l_hidn = scale(sum, 1.0 / static_cast<double>(layer_map.size()));
        out.report.l_hidn = tape.value(l_hidn).item();
        total = add(total, l_hidn);
    }

    if (cfg.use_logits) {
        std::vector<std::int64_t> rows =
            cfg.logits_all_positions ? real_rows(grid) : batch.labeled_rows();
        if (rows.empty()) throw data_error("logit distillation has no labeled positions");
        const std::int64_t v = tape.value(student_logits).dim(2);
        Var student_flat = reshape(student_logits, {grid.batch * grid.seq, v});
        Var student_soft = softmax(scale(gather_rows(student_flat, rows), 1.0 / cfg.temperature), -1);
        Tensor teacher_soft = soften_rows(flatten2(teacher.logits), rows, cfg.temperature);
        Var l_logits = mse(student_soft, tape.leaf(std::move(teacher_soft)));
        out.report.l_logits = tape.value(l_logits).item();
        total = add(total, l_logits);
    }

    out.total = total;
    out.report.total = tape.value(total).item();
    return out;
}

void DistillResult::write_trace(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open trace file for writing: " + path);
    out << "step,l_mlm,l_hidn,l_logits,total\n";
    out.precision(17);
    for (std::size_t i = 0; i < trace.size(); ++i)
        out << i << ',' << trace[i].l_mlm << ',' << trace[i].l_hidn << ',' << trace[i].l_logits
            << ',' << trace[i].total << '\n';
}

DistillResult distill_run(ParamStore& teacher, const model::ModelConfig& student_config,
                          const std::vector<std::string>& corpus, const chem::Vocab& vocab,
                          const DistillConfig& cfg, int steps, int batch_size, std::uint64_t seed,
                          const std::optional<std::string>& run_dir) {
    cfg.validate();
    model::ModelConfig scfg = student_config;
    if (scfg.vocab_size == 0) scfg.vocab_size = vocab.size();
    scfg.validate();
    if (scfg.hidden_size != teacher.config.hidden_size)
        throw config_error("student hidden size " + std::to_string(scfg.hidden_size) +
                           " does not match teacher hidden size " +
                           std::to_string(teacher.config.hidden_size));
    if (scfg.vocab_size != teacher.config.vocab_size)
        throw config_error("student and teacher vocab sizes differ");

    auto layer_map = uniform_layer_map(teacher.config.num_layers, scfg.num_layers);

    std::vector<chem::TokenSeq> seqs;
    seqs.reserve(corpus.size());
    for (const auto& smiles : corpus)
        seqs.push_back(chem::tokenize(smiles, vocab, scfg.max_seq_len));
    if (static_cast<int>(seqs.size()) < batch_size)
        throw data_error("corpus is smaller than one batch");

    DistillResult result;
    // distinct init stream: a teacher trained from the same root seed must
    // not hand the student its own starting weights
    std::uint64_t student_seed = seed * 0x9E3779B97F4A7C15ULL + 0x1D;
    result.student = model::init_params(scfg, student_seed, teacher.precision);
    AdamState adam(cfg.adam);
    Rng shuffle_rng(seed, Rng::kShuffle);
    Rng mask_rng(seed, Rng::kMask);
    Rng dropout_rng(seed, Rng::kDropout);

    std::vector<int> order(seqs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    shuffle_rng.shuffle(order);
    std::size_t cursor = 0;

    for (int step = 0; step < steps; ++step) {
        std::vector<int> chunk;
        chunk.reserve(batch_size);
        for (int k = 0; k < batch_size; ++k) {
            if (cursor == order.size()) {
                shuffle_rng.shuffle(order);
                cursor = 0;
            }
            chunk.push_back(order[cursor++]);
        }
        MaskedBatch batch =
            pretrain::mask_batch(pretrain::assemble_grid(seqs, chunk), vocab, mask_rng);

        TeacherSignals signals = teacher_forward(teacher, batch);

        Tape tape(result.student.precision, /*training=*/true, &dropout_rng);
        auto student_out = model::encode(result.student, tape, batch.grid.ids, batch.grid.mask,
                                         batch.grid.batch, batch.grid.seq);
        Var student_logits = model::mlm_logits(result.student, tape, student_out.hidden_states.back());
        DistillLossVars losses =
            distill_losses(tape, signals, student_out, student_logits, batch, cfg, layer_map);
        zero_grads(result.student.params);
        tape.backward(losses.total);
        double lr_scale =
            cfg.lr_linear_decay ? 1.0 - static_cast<double>(step) / static_cast<double>(steps) : 1.0;
        adam.step(result.student.params, result.student.precision, lr_scale);
        result.trace.push_back(losses.report);
    }

    if (run_dir) {
        namespace fs = std::filesystem;
        fs::create_directories(fs::path(*run_dir) / "metrics");
        fs::create_directories(fs::path(*run_dir) / "checkpoints");
        result.write_trace((fs::path(*run_dir) / "metrics" / "distill.csv").string());
        model::save_checkpoint(result.student,
                               (fs::path(*run_dir) / "checkpoints" / "student.ckpt").string());
    }
    return result;
}

}  // namespace delicate::distill
