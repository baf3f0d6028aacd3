#include "nilm/core/ops.hpp"

#include <algorithm>
#include <cmath>

#include "nilm/core/kernels.hpp"
#include "nilm/error.hpp"

namespace nilm::ops {

namespace {

void require_finite(const Tensor& t, const char* what) {
    if (!t.all_finite()) throw Error(std::string(what) + ": non-finite input");
}

kernels::Conv1dShape conv_shape(const Tensor& input, const Tensor& kernels, const Tensor& bias, std::size_t stride) {
    if (kernels.rank() != 3) throw Error("conv1d: kernels must be rank 3, got " + shape_str(kernels.shape()));
    if (input.rank() != 2 && input.rank() != 3) {
        throw Error("conv1d: input must be [channels, length] or [batch, channels, length], got " +
                    shape_str(input.shape()));
    }
    if (stride == 0) throw Error("conv1d: stride must be >= 1");
    kernels::Conv1dShape s;
    const bool batched = input.rank() == 3;
    s.batch = batched ? input.extent(0) : 1;
    s.in_channels = input.extent(batched ? 1 : 0);
    s.in_length = input.extent(batched ? 2 : 1);
    s.out_channels = kernels.extent(0);
    s.kernel = kernels.extent(2);
    s.stride = stride;
    if (kernels.extent(1) != s.in_channels) {
        throw Error("conv1d: input " + shape_str(input.shape()) + " does not match kernels " +
                    shape_str(kernels.shape()));
    }
    if (bias.rank() != 1 || bias.extent(0) != s.out_channels) {
        throw Error("conv1d: bias " + shape_str(bias.shape()) + " does not match kernels " +
                    shape_str(kernels.shape()));
    }
    if (s.kernel == 0 || s.kernel > s.in_length) {
        throw Error("conv1d: kernel size " + std::to_string(s.kernel) + " exceeds input length " +
                    std::to_string(s.in_length));
    }
    return s;
}

Shape conv_out_shape(const Tensor& input, const kernels::Conv1dShape& s) {
    if (input.rank() == 3) return {s.batch, s.out_channels, s.out_length()};
    return {s.out_channels, s.out_length()};
}

struct DenseDims {
    std::size_t batch, in, out;
};

DenseDims dense_dims(const Tensor& input, const Tensor& weights, const Tensor& bias) {
    if (weights.rank() != 2) throw Error("dense: weights must be rank 2, got " + shape_str(weights.shape()));
    if (input.rank() != 1 && input.rank() != 2) {
        throw Error("dense: input must be [n] or [batch, n], got " + shape_str(input.shape()));
    }
    DenseDims d{input.rank() == 2 ? input.extent(0) : 1, input.shape().back(), weights.extent(0)};
    if (weights.extent(1) != d.in) {
        throw Error("dense: input " + shape_str(input.shape()) + " does not match weights " +
                    shape_str(weights.shape()));
    }
    if (bias.rank() != 1 || bias.extent(0) != d.out) {
        throw Error("dense: bias " + shape_str(bias.shape()) + " does not match weights " +
                    shape_str(weights.shape()));
    }
    return d;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw Error(std::string(what) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
}

}  // namespace

Tensor conv1d(const Tensor& input, const Tensor& kernels, const Tensor& bias, std::size_t stride) {
    const auto s = conv_shape(input, kernels, bias, stride);
    Tensor out(conv_out_shape(input, s));
    kernels::conv1d_forward(s, input.data(), kernels.data(), bias.data(), out.data());
    return out;
}

Tensor conv1d_backward(const Tensor& input, Tensor& kernels, Tensor& bias, std::size_t stride,
                       const Tensor& grad_output) {
    const auto s = conv_shape(input, kernels, bias, stride);
    if (grad_output.shape() != conv_out_shape(input, s)) {
        throw Error("conv1d_backward: gradient " + shape_str(grad_output.shape()) + " does not match output " +
                    shape_str(conv_out_shape(input, s)));
    }
    Tensor grad_input(input.shape());
    kernels::conv1d_backward(s, input.data(), kernels.data(), grad_output.data(), grad_input.data(),
                             kernels.ensure_grad().data(), bias.ensure_grad().data());
    return grad_input;
}

Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias) {
    const auto d = dense_dims(input, weights, bias);
    Tensor out(input.rank() == 2 ? Shape{d.batch, d.out} : Shape{d.out});
    kernels::dense_forward(d.batch, d.in, d.out, input.data(), weights.data(), bias.data(), out.data());
    return out;
}

Tensor dense_backward(const Tensor& input, Tensor& weights, Tensor& bias, const Tensor& grad_output) {
    const auto d = dense_dims(input, weights, bias);
    if (grad_output.size() != d.batch * d.out) {
        throw Error("dense_backward: gradient " + shape_str(grad_output.shape()) + " does not match output width " +
                    std::to_string(d.out));
    }
    Tensor grad_input(input.shape());
    kernels::dense_backward(d.batch, d.in, d.out, input.data(), weights.data(), grad_output.data(),
                            grad_input.data(), weights.ensure_grad().data(), bias.ensure_grad().data());
    return grad_input;
}

Tensor activation(const Tensor& input, Activation kind) {
    require_finite(input, "activation");
    Tensor out(input.shape());
    auto x = input.values();
    auto y = out.values();
    switch (kind) {
        case Activation::relu:
            for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
            break;
        case Activation::sigmoid:
            for (std::size_t i = 0; i < x.size(); ++i) {
                // Split by sign so exp never overflows.
                if (x[i] >= 0.0) {
                    y[i] = 1.0 / (1.0 + std::exp(-x[i]));
                } else {
                    const double e = std::exp(x[i]);
                    y[i] = e / (1.0 + e);
                }
            }
            break;
        case Activation::softmax: {
            if (input.rank() == 0 || input.shape().back() == 0) throw Error("softmax: empty axis");
            const std::size_t width = input.shape().back();
            for (std::size_t row = 0; row < x.size() / width; ++row) {
                const double* xr = x.data() + row * width;
                double* yr = y.data() + row * width;
                const double peak = *std::max_element(xr, xr + width);
                double sum = 0.0;
                for (std::size_t j = 0; j < width; ++j) sum += (yr[j] = std::exp(xr[j] - peak));
                for (std::size_t j = 0; j < width; ++j) yr[j] /= sum;
            }
            break;
        }
    }
    return out;
}

Tensor activation_backward(const Tensor& output, Activation kind, const Tensor& grad_output) {
    require_same_shape(output, grad_output, "activation_backward");
    Tensor grad(output.shape());
    auto y = output.values();
    auto g = grad_output.values();
    auto gx = grad.values();
    switch (kind) {
        case Activation::relu:
            for (std::size_t i = 0; i < y.size(); ++i) gx[i] = y[i] > 0.0 ? g[i] : 0.0;
            break;
        case Activation::sigmoid:
            for (std::size_t i = 0; i < y.size(); ++i) gx[i] = g[i] * y[i] * (1.0 - y[i]);
            break;
        case Activation::softmax: {
            const std::size_t width = output.shape().back();
            for (std::size_t row = 0; row < y.size() / width; ++row) {
                const std::size_t base = row * width;
                double dot = 0.0;
                for (std::size_t j = 0; j < width; ++j) dot += g[base + j] * y[base + j];
                for (std::size_t j = 0; j < width; ++j) gx[base + j] = y[base + j] * (g[base + j] - dot);
            }
            break;
        }
    }
    return grad;
}

LossValue mse_loss(const Tensor& prediction, const Tensor& target) {
    require_same_shape(prediction, target, "mse_loss");
    if (prediction.size() == 0) throw Error("mse_loss: empty input");
    const double n = static_cast<double>(prediction.size());
    LossValue out{0.0, Tensor(prediction.shape())};
    for (std::size_t i = 0; i < prediction.size(); ++i) {
        const double diff = prediction[i] - target[i];
        out.value += diff * diff;
        out.grad[i] = 2.0 * diff / n;
    }
    out.value /= n;
    return out;
}

LossValue cross_entropy_loss(const Tensor& probabilities, const Tensor& one_hot_targets) {
    require_same_shape(probabilities, one_hot_targets, "cross_entropy_loss");
    if (probabilities.rank() != 2 || probabilities.size() == 0) {
        throw Error("cross_entropy_loss: expected non-empty [rows, classes], got " +
                    shape_str(probabilities.shape()));
    }
    const std::size_t rows = probabilities.extent(0);
    const std::size_t width = probabilities.extent(1);
    LossValue out{0.0, Tensor(probabilities.shape())};
    for (std::size_t r = 0; r < rows; ++r) {
        std::size_t ones = 0;
        double prob_sum = 0.0;
        for (std::size_t j = 0; j < width; ++j) {
            const double t = one_hot_targets.at(r, j);
            if (t == 1.0) {
                ++ones;
            } else if (t != 0.0) {
                ones = 2;
            }
            prob_sum += probabilities.at(r, j);
        }
        if (ones != 1) throw Error("cross_entropy_loss: target row " + std::to_string(r) + " is not one-hot");
        if (std::abs(prob_sum - 1.0) > 1e-6) {
            throw Error("cross_entropy_loss: probability row " + std::to_string(r) + " sums to " +
                        std::to_string(prob_sum));
        }
        for (std::size_t j = 0; j < width; ++j) {
            const double t = one_hot_targets.at(r, j);
            if (t == 0.0) continue;
            const double p = probabilities.at(r, j);
            out.value -= std::log(std::max(p, kLogClip));
            out.grad.at(r, j) = p > kLogClip ? -1.0 / (p * static_cast<double>(rows)) : 0.0;
        }
    }
    out.value /= static_cast<double>(rows);
    return out;
}

}  // namespace nilm::ops
