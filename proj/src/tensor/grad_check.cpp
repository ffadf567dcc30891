#include "delicate/tensor/grad_check.hpp"

#include <cmath>

#include "delicate/error.hpp"

namespace delicate::tensor {

namespace {

double eval_loss(const LossFn& f, ParamMap& params) {
    Tape tape(Precision::f64, /*training=*/false, nullptr, /*grad_enabled=*/false);
    Var loss = f(tape, params);
    double v = tape.value(loss).item();
    if (!std::isfinite(v)) throw numeric_error("grad_check: loss is not finite");
    return v;
}

}  // namespace

double grad_check(const LossFn& f, ParamMap params, double eps) {
    zero_grads(params);
    {
        Tape tape(Precision::f64, /*training=*/false);
        Var loss = f(tape, params);
        tape.backward(loss);
    }
    double worst = 0.0;
    for (auto& [name, param] : params) {
        for (std::int64_t i = 0; i < param.value.numel(); ++i) {
            double saved = param.value.data()[i];
            param.value.data()[i] = saved + eps;
            double up = eval_loss(f, params);
            param.value.data()[i] = saved - eps;
            double down = eval_loss(f, params);
            param.value.data()[i] = saved;
            double numeric = (up - down) / (2.0 * eps);
            double analytic = param.grad.data()[i];
            // The finite difference cannot resolve anything below a few ulps
            // of the function value divided by the step; differences under
            // that floor are indistinguishable from an exact match. Without
            // this, directions whose true gradient is identically zero (an
            // attention key bias, for example) report pure rounding noise.
            double noise_floor =
                8.0 * (std::fabs(up) + std::fabs(down)) * 2.220446049250313e-16 / (2.0 * eps);
            double diff = std::fabs(analytic - numeric);
            if (diff <= noise_floor) continue;
            double rel = diff / (std::max(std::fabs(analytic), std::fabs(numeric)) + 1e-8);
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

}  // namespace delicate::tensor
