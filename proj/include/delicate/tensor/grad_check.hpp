#pragma once

#include <functional>
#include <string>
#include <vector>

#include "delicate/tensor/adam.hpp"
#include "delicate/tensor/tape.hpp"

namespace delicate::tensor {

// Builds a scalar loss from named parameters already registered on `tape`.
using LossFn = std::function<Var(Tape& tape, ParamMap& params)>;

// Central finite differences vs reverse-mode gradients, in 64-bit with
// dropout off. Returns the worst relative error over every element of every
// parameter, with |.| + 1e-8 denominators.
double grad_check(const LossFn& f, ParamMap params, double eps = 1e-5);

}  // namespace delicate::tensor
