#pragma once

// Differentiable tensor operations used by both subnetworks.
//
// Forward functions validate shapes and return fresh tensors. Backward
// functions take the forward inputs plus the upstream gradient; parameter
// gradients are accumulated into the parameter tensors' gradient buffers and
// the gradient with respect to the data input is returned.

#include <cstddef>

#include "nilm/core/tensor.hpp"

namespace nilm::ops {

// input [in_channels, length] or [batch, in_channels, length];
// kernels [out_channels, in_channels, k]; bias [out_channels]. No padding.
Tensor conv1d(const Tensor& input, const Tensor& kernels, const Tensor& bias, std::size_t stride);
Tensor conv1d_backward(const Tensor& input, Tensor& kernels, Tensor& bias, std::size_t stride,
                       const Tensor& grad_output);

// input [n] or [batch, n]; weights [m, n]; bias [m].
Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias);
Tensor dense_backward(const Tensor& input, Tensor& weights, Tensor& bias, const Tensor& grad_output);

enum class Activation { relu, sigmoid, softmax };

// softmax normalizes along the last axis.
Tensor activation(const Tensor& input, Activation kind);
// Uses the forward *output*, which all three rules can be written in terms of.
Tensor activation_backward(const Tensor& output, Activation kind, const Tensor& grad_output);

struct LossValue {
    double value = 0.0;
    Tensor grad;  // d(value)/d(prediction)
};

LossValue mse_loss(const Tensor& prediction, const Tensor& target);

inline constexpr double kLogClip = 1e-12;

// probabilities and one_hot_targets are [rows, classes]; averaged over rows.
LossValue cross_entropy_loss(const Tensor& probabilities, const Tensor& one_hot_targets);

}  // namespace nilm::ops
