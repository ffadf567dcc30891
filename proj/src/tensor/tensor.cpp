#include "delicate/tensor/tensor.hpp"

#include <cmath>
#include <sstream>

#include "delicate/error.hpp"

namespace delicate::tensor {

std::int64_t shape_numel(const Shape& shape) {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
    for (auto d : shape_)
        if (d <= 0) throw dimension_error("non-positive dimension in shape " + shape_str(shape_));
    data_.assign(shape_numel(shape_), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_numel(shape_) != static_cast<std::int64_t>(data_.size()))
        throw dimension_error("data length " + std::to_string(data_.size()) +
                              " does not match shape " + shape_str(shape_));
}

Tensor Tensor::full(Shape shape, double value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
}

double Tensor::item() const {
    if (numel() != 1)
        throw dimension_error("item() on tensor of shape " + shape_str(shape_));
    return data_[0];
}

void Tensor::fill(double value) {
    for (auto& x : data_) x = value;
}

void Tensor::round_to(Precision p) {
    if (p == Precision::f64) return;
    for (auto& x : data_) x = static_cast<double>(static_cast<float>(x));
}

bool Tensor::all_finite() const {
    for (double x : data_)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace delicate::tensor
