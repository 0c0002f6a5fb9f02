#include "nilm/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace nilm::nn {

std::string shape_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

ShapeError::ShapeError(const std::string& what, const Shape& lhs, const Shape& rhs)
    : std::invalid_argument(what + ": " + shape_string(lhs) + " vs " + shape_string(rhs)) {}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
    if (shape_.empty()) throw std::invalid_argument("tensor shape must have at least one dimension");
    for (auto d : shape_)
        if (d == 0) throw std::invalid_argument("tensor dimensions must be positive, got " + shape_string(shape_));
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_.empty()) throw std::invalid_argument("tensor shape must have at least one dimension");
    for (auto d : shape_)
        if (d == 0) throw std::invalid_argument("tensor dimensions must be positive, got " + shape_string(shape_));
    if (shape_size(shape_) != data_.size())
        throw ShapeError("tensor data length does not match shape", shape_, Shape{data_.size()});
}

Tensor Tensor::vector(std::vector<double> v) {
    const std::size_t n = v.size();
    return Tensor({n}, std::move(v));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
    return Tensor({rows, cols}, std::move(data));
}

Tensor Tensor::reshaped(Shape shape) const {
    if (shape_size(shape) != data_.size()) throw ShapeError("reshape changes element count", shape_, shape);
    return Tensor(std::move(shape), data_);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace nilm::nn
