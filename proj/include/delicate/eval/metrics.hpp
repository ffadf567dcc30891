#pragma once

#include <vector>

namespace delicate::eval {

// Mann-Whitney ROC-AUC: over all (positive, negative) pairs, credit 1 when
// the positive scores higher, 0.5 on ties. Labels are 0/1; needs at least
// one of each.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Coefficient of determination 1 - SS_res / SS_tot, SS_tot about the target
// mean. Needs >= 2 targets with nonzero variance.
double r2(const std::vector<double>& predictions, const std::vector<double>& targets);

double mean(const std::vector<double>& values);

// Standard error of the mean with the population standard deviation
// (divide by n, not n-1).
double sem(const std::vector<double>& values);

}  // namespace delicate::eval
