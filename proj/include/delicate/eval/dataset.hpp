#pragma once

#include <string>
#include <vector>

namespace delicate::eval {

enum class TaskKind { classification, regression };

struct TaskRecord {
    std::string smiles;
    double label = 0.0;
};

// Labeled SMILES records. Classification labels are 0/1 with at least 10
// records per class; regression labels are finite reals.
struct TaskDataset {
    std::string name;
    TaskKind kind = TaskKind::classification;
    std::vector<TaskRecord> records;

    int size() const { return static_cast<int>(records.size()); }
    void validate() const;
};

// CSV with header `smiles,label`.
TaskDataset load_task_csv(const std::string& path, TaskKind kind, const std::string& name = "");
void save_task_csv(const TaskDataset& dataset, const std::string& path);

}  // namespace delicate::eval
