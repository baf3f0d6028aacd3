#include "nilm/core/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "nilm/error.hpp"

namespace nilm {

std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

std::string shape_str(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), values_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(std::move(values)) {
    if (shape_size(shape_) != values_.size()) {
        throw Error("tensor shape " + shape_str(shape_) + " does not match " + std::to_string(values_.size()) +
                    " values");
    }
}

std::span<double> Tensor::ensure_grad() {
    if (grad_.size() != values_.size()) grad_.assign(values_.size(), 0.0);
    grad_present_ = true;
    return grad_;
}

std::span<double> Tensor::grad() {
    if (!grad_present_) throw Error("tensor " + shape_str(shape_) + " has no gradient");
    return grad_;
}

std::span<const double> Tensor::grad() const {
    if (!grad_present_) throw Error("tensor " + shape_str(shape_) + " has no gradient");
    return grad_;
}

void Tensor::clear_grad() {
    std::fill(grad_.begin(), grad_.end(), 0.0);
    grad_present_ = false;
}

void Tensor::reshape(Shape shape) {
    if (shape_size(shape) != values_.size()) {
        throw Error("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    }
    shape_ = std::move(shape);
}

bool Tensor::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace nilm
