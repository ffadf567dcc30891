#pragma once

#include <map>
#include <string>

#include "delicate/distill/distill.hpp"
#include "delicate/eval/finetune.hpp"
#include "delicate/model/config.hpp"
#include "delicate/pretrain/pretrain.hpp"

namespace delicate::config {

// Flat INI-style run configuration: `[section]` headers and `key = value`
// lines, `#`/`;` comments. Every key must be in the known schema; unknown
// keys are rejected. Values resolve in order: defaults < file < CLI
// overrides < DELICATE_SEED (seed only).
class RunConfig {
public:
    RunConfig();  // schema defaults

    static RunConfig load(const std::string& path);

    // `dotted` is "section.key" ("seed" for the top-level seed).
    void set(const std::string& dotted, const std::string& value);
    void apply_env();

    std::uint64_t seed() const;
    model::ModelConfig model() const;            // [model]
    model::ModelConfig student_model() const;    // [model] overlaid with [distill] student_*
    pretrain::PretrainConfig pretrain() const;   // [pretrain]
    distill::DistillConfig distill() const;      // [distill]
    int distill_steps() const;
    int distill_batch_size() const;
    eval::FinetuneConfig finetune() const;       // [eval]
    eval::TaskKind task_kind() const;
    tensor::Precision precision() const;         // [pretrain] precision governs runs

    std::string path(const std::string& key) const;        // [paths], "" if unset
    std::string require_path(const std::string& key) const;

    // Exact effective configuration, diff-friendly.
    void write_snapshot(const std::string& file_path) const;

private:
    const std::string& raw(const std::string& dotted) const;
    bool raw_bool(const std::string& dotted) const;
    int raw_int(const std::string& dotted) const;
    double raw_double(const std::string& dotted) const;

    std::map<std::string, std::string> values_;
};

}  // namespace delicate::config
