#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace nilm {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major tensor of doubles with an optional gradient buffer.
//
// The gradient storage is kept allocated once created; `clear_grad` zeroes it
// and marks it absent so the optimizer can detect parameters that did not
// take part in a backward pass.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const { return values_.size(); }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }
    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }
    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    // Row-major 2-D access.
    double& at(std::size_t row, std::size_t col) { return values_[row * shape_.back() + col]; }
    double at(std::size_t row, std::size_t col) const { return values_[row * shape_.back() + col]; }

    bool has_grad() const { return grad_present_; }
    // Allocates (zeroed) on first use and marks the gradient present.
    std::span<double> ensure_grad();
    std::span<double> grad();
    std::span<const double> grad() const;
    void clear_grad();

    // Same element count required.
    void reshape(Shape shape);

    bool all_finite() const;

private:
    Shape shape_;
    std::vector<double> values_;
    std::vector<double> grad_;
    bool grad_present_ = false;
};

struct Parameter {
    Tensor tensor;
    std::string name;
    bool trainable = true;
};

}  // namespace nilm
