#include "delicate/cli/run_config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>

namespace delicate::config {

namespace {

const std::map<std::string, std::string>& schema_defaults() {
    static const std::map<std::string, std::string> defaults = {
        {"seed", "7"},
        {"model.hidden_size", "64"},
        {"model.num_layers", "4"},
        {"model.num_heads", "4"},
        {"model.ffn_size", "128"},
        {"model.max_seq_len", "128"},
        {"model.vocab_size", "0"},          // 0 = take the tokenizer vocab size
        {"model.share_layers", "false"},
        {"model.dropout_p", "0.1"},
        {"pretrain.epochs", "20"},
        {"pretrain.batch_size", "32"},
        {"pretrain.lr", "0.001"},
        {"pretrain.mask_rate", "0.15"},
        {"pretrain.warmup_frac", "0.05"},
        {"pretrain.precision", "f32"},
        {"distill.temperature", "8"},
        {"distill.steps", "1000"},
        {"distill.batch_size", "32"},
        {"distill.lr", "0.001"},
        {"distill.use_mlm", "true"},
        {"distill.use_hidn", "true"},
        {"distill.use_logits", "true"},
        {"distill.logits_all_positions", "false"},
        {"distill.student_layers", "2"},
        {"distill.student_share_layers", "false"},
        {"eval.folds", "3"},
        {"eval.batch_size", "16"},
        {"eval.lr", "0.00003"},
        {"eval.max_epochs", "50"},
        {"eval.patience", "5"},
        {"eval.task_kind", "classification"},
        {"paths.corpus", ""},
        {"paths.vocab", ""},
        {"paths.teacher", ""},
        {"paths.checkpoint", ""},
        {"paths.task", ""},
        {"paths.queries", ""},
        {"paths.library", ""},
    };
    return defaults;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

}  // namespace

RunConfig::RunConfig() : values_(schema_defaults()) {}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open config file: " + path);
    RunConfig cfg;
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto comment = line.find_first_of("#;");
        if (comment != std::string::npos) line.erase(comment);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw config_error("malformed section header at line " + std::to_string(lineno));
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error("expected 'key = value' at line " + std::to_string(lineno));
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        cfg.set(section.empty() ? key : section + "." + key, value);
    }
    return cfg;
}

void RunConfig::set(const std::string& dotted, const std::string& value) {
    if (values_.find(dotted) == values_.end())
        throw config_error("unknown config key '" + dotted + "'");
    values_[dotted] = value;
}

void RunConfig::apply_env() {
    if (const char* env = std::getenv("DELICATE_SEED")) set("seed", env);
}

const std::string& RunConfig::raw(const std::string& dotted) const {
    auto it = values_.find(dotted);
    if (it == values_.end()) throw config_error("unknown config key '" + dotted + "'");
    return it->second;
}

bool RunConfig::raw_bool(const std::string& dotted) const {
    std::string v = raw(dotted);
    std::transform(v.begin(), v.end(), v.begin(), ::tolower);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw config_error("config key '" + dotted + "' expects a boolean, got '" + raw(dotted) + "'");
}

int RunConfig::raw_int(const std::string& dotted) const {
    try {
        std::size_t used = 0;
        int v = std::stoi(raw(dotted), &used);
        if (used != raw(dotted).size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw config_error("config key '" + dotted + "' expects an integer, got '" + raw(dotted) + "'");
    }
}

double RunConfig::raw_double(const std::string& dotted) const {
    try {
        std::size_t used = 0;
        double v = std::stod(raw(dotted), &used);
        if (used != raw(dotted).size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw config_error("config key '" + dotted + "' expects a number, got '" + raw(dotted) + "'");
    }
}

std::uint64_t RunConfig::seed() const {
    try {
        return std::stoull(raw("seed"));
    } catch (const std::exception&) {
        throw config_error("seed must be a non-negative integer, got '" + raw("seed") + "'");
    }
}

model::ModelConfig RunConfig::model() const {
    model::ModelConfig cfg;
    cfg.hidden_size = raw_int("model.hidden_size");
    cfg.num_layers = raw_int("model.num_layers");
    cfg.num_heads = raw_int("model.num_heads");
    cfg.ffn_size = raw_int("model.ffn_size");
    cfg.max_seq_len = raw_int("model.max_seq_len");
    cfg.vocab_size = raw_int("model.vocab_size");
    cfg.share_layers = raw_bool("model.share_layers");
    cfg.dropout_p = raw_double("model.dropout_p");
    return cfg;
}

model::ModelConfig RunConfig::student_model() const {
    model::ModelConfig cfg = model();
    cfg.num_layers = raw_int("distill.student_layers");
    cfg.share_layers = raw_bool("distill.student_share_layers");
    return cfg;
}

pretrain::PretrainConfig RunConfig::pretrain() const {
    pretrain::PretrainConfig cfg;
    cfg.epochs = raw_int("pretrain.epochs");
    cfg.batch_size = raw_int("pretrain.batch_size");
    cfg.lr = raw_double("pretrain.lr");
    cfg.mask_rate = raw_double("pretrain.mask_rate");
    cfg.warmup_frac = raw_double("pretrain.warmup_frac");
    cfg.precision = precision();
    return cfg;
}

tensor::Precision RunConfig::precision() const {
    const std::string& v = raw("pretrain.precision");
    if (v == "f32") return tensor::Precision::f32;
    if (v == "f64") return tensor::Precision::f64;
    throw config_error("pretrain.precision must be f32 or f64, got '" + v + "'");
}

distill::DistillConfig RunConfig::distill() const {
    distill::DistillConfig cfg;
    cfg.temperature = raw_double("distill.temperature");
    cfg.use_mlm = raw_bool("distill.use_mlm");
    cfg.use_hidn = raw_bool("distill.use_hidn");
    cfg.use_logits = raw_bool("distill.use_logits");
    cfg.logits_all_positions = raw_bool("distill.logits_all_positions");
    cfg.adam.lr = raw_double("distill.lr");
    return cfg;
}

int RunConfig::distill_steps() const { return raw_int("distill.steps"); }
int RunConfig::distill_batch_size() const { return raw_int("distill.batch_size"); }

eval::FinetuneConfig RunConfig::finetune() const {
    eval::FinetuneConfig cfg;
    cfg.folds = raw_int("eval.folds");
    cfg.batch_size = raw_int("eval.batch_size");
    cfg.lr = raw_double("eval.lr");
    cfg.max_epochs = raw_int("eval.max_epochs");
    cfg.patience = raw_int("eval.patience");
    return cfg;
}

eval::TaskKind RunConfig::task_kind() const {
    const std::string& v = raw("eval.task_kind");
    if (v == "classification") return eval::TaskKind::classification;
    if (v == "regression") return eval::TaskKind::regression;
    throw config_error("eval.task_kind must be classification or regression, got '" + v + "'");
}

std::string RunConfig::path(const std::string& key) const { return raw("paths." + key); }

std::string RunConfig::require_path(const std::string& key) const {
    std::string p = path(key);
    if (p.empty()) throw config_error("required path 'paths." + key + "' is not set");
    return p;
}

void RunConfig::write_snapshot(const std::string& file_path) const {
    std::ofstream out(file_path);
    if (!out) throw io_error("cannot write config snapshot: " + file_path);
    for (const auto& [dotted, value] : values_)
        if (dotted.find('.') == std::string::npos) out << dotted << " = " << value << '\n';
    std::string section;
    for (const auto& [dotted, value] : values_) {
        auto dot = dotted.find('.');
        if (dot == std::string::npos) continue;
        std::string sec = dotted.substr(0, dot);
        if (sec != section) {
            out << '[' << sec << "]\n";
            section = sec;
        }
        out << dotted.substr(dot + 1) << " = " << value << '\n';
    }
}

}  // namespace delicate::config
