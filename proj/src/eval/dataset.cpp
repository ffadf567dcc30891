#include "delicate/eval/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "delicate/error.hpp"

namespace delicate::eval {

void TaskDataset::validate() const {
    if (records.empty()) throw data_error("task dataset '" + name + "' is empty");
    if (kind == TaskKind::classification) {
        int pos = 0, neg = 0;
        for (const auto& rec : records) {
            if (rec.label == 1.0) ++pos;
            else if (rec.label == 0.0) ++neg;
            else
                throw data_error("classification label must be 0 or 1, got " +
                                 std::to_string(rec.label));
        }
        if (pos < 10 || neg < 10)
            throw data_error("classification task '" + name + "' needs >= 10 records per class, has " +
                             std::to_string(pos) + " positive / " + std::to_string(neg) + " negative");
    } else {
        for (const auto& rec : records)
            if (!std::isfinite(rec.label)) throw data_error("non-finite regression label");
    }
}

TaskDataset load_task_csv(const std::string& path, TaskKind kind, const std::string& name) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open task file: " + path);
    TaskDataset ds;
    ds.kind = kind;
    ds.name = name.empty() ? path : name;
    std::string line;
    if (!std::getline(in, line)) throw data_error("task file is empty: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "smiles,label")
        throw data_error("task file must start with header 'smiles,label': " + path);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto comma = line.rfind(',');
        if (comma == std::string::npos || comma == 0)
            throw data_error("malformed task row at line " + std::to_string(lineno));
        TaskRecord rec;
        rec.smiles = line.substr(0, comma);
        try {
            rec.label = std::stod(line.substr(comma + 1));
        } catch (const std::exception&) {
            throw data_error("bad label at line " + std::to_string(lineno));
        }
        ds.records.push_back(std::move(rec));
    }
    ds.validate();
    return ds;
}

void save_task_csv(const TaskDataset& dataset, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open task file for writing: " + path);
    out << "smiles,label\n";
    out.precision(17);
    for (const auto& rec : dataset.records) out << rec.smiles << ',' << rec.label << '\n';
}

}  // namespace delicate::eval
