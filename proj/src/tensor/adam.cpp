#include "delicate/tensor/adam.hpp"

#include <cmath>

#include "delicate/error.hpp"

namespace delicate::tensor {

void AdamState::step(ParamMap& params, Precision precision, double lr_scale) {
    ++step_;
    double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
    double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
    double lr = config_.lr * lr_scale;
    for (auto& [name, param] : params) {
        auto it = moments_.find(name);
        if (it == moments_.end()) {
            it = moments_.emplace(name, Moments{Tensor::zeros(param.value.shape()),
                                                Tensor::zeros(param.value.shape())}).first;
        }
        Moments& mom = it->second;
        if (!mom.m.same_shape(param.value))
            throw dimension_error("adam: moment shape " + shape_str(mom.m.shape()) +
                                  " does not match parameter '" + name + "' " +
                                  shape_str(param.value.shape()));
        double* w = param.value.data();
        const double* g = param.grad.data();
        double* m = mom.m.data();
        double* v = mom.v.data();
        for (std::int64_t i = 0; i < param.value.numel(); ++i) {
            m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
            v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            w[i] -= lr * mhat / (std::sqrt(vhat) + config_.eps);
        }
        param.value.round_to(precision);
        mom.m.round_to(precision);
        mom.v.round_to(precision);
        if (!param.value.all_finite())
            throw numeric_error("adam produced a non-finite value in parameter '" + name + "'");
    }
}

void zero_grads(ParamMap& params) {
    for (auto& [name, param] : params) param.grad.fill(0.0);
}

}  // namespace delicate::tensor
