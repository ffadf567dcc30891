#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace delicate::tensor {

using Shape = std::vector<std::int64_t>;

enum class Precision : std::uint8_t { f32 = 4, f64 = 8 };

// Dense row-major tensor. Data is held as double; in f32 mode every op
// output (and every optimizer write) is rounded to the nearest float, so
// values are exactly representable in 32 bits and checkpoints written with
// the f32 payload tag round-trip bit-exactly.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
    static Tensor full(Shape shape, double value);
    static Tensor scalar(double value) { return Tensor({1}, {value}); }

    const Shape& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    std::int64_t dim(int axis) const { return shape_[axis]; }
    std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double item() const;  // value of a 1-element tensor

    void fill(double value);
    void round_to(Precision p);
    bool all_finite() const;

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

private:
    Shape shape_;
    std::vector<double> data_;
};

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Trainable parameter: value plus a persistent gradient buffer that
// backward passes accumulate into.
struct Param {
    Tensor value;
    Tensor grad;

    Param() = default;
    explicit Param(Tensor v) : value(std::move(v)), grad(Tensor::zeros(value.shape())) {}
};

}  // namespace delicate::tensor
