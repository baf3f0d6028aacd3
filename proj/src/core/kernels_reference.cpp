#include "nilm/core/kernels.hpp"

namespace nilm::kernels::reference {

namespace {

inline double elem(const double* p, std::size_t ld, Trans t, std::size_t row, std::size_t col) {
    return t == Trans::no ? p[row * ld + col] : p[col * ld + row];
}

}  // namespace

void gemm(Trans trans_a, Trans trans_b, std::size_t m, std::size_t n, std::size_t k, double alpha,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double beta, double* c,
          std::size_t ldc) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double sum = 0.0;
            for (std::size_t p = 0; p < k; ++p) sum += elem(a, lda, trans_a, i, p) * elem(b, ldb, trans_b, p, j);
            double& out = c[i * ldc + j];
            out = alpha * sum + (beta == 0.0 ? 0.0 : beta * out);
        }
    }
}

void conv1d_forward(const Conv1dShape& s, const double* input, const double* weights, const double* bias,
                    double* output) {
    const std::size_t out_len = s.out_length();
    for (std::size_t b = 0; b < s.batch; ++b) {
        for (std::size_t co = 0; co < s.out_channels; ++co) {
            for (std::size_t t = 0; t < out_len; ++t) {
                double sum = bias[co];
                for (std::size_t ci = 0; ci < s.in_channels; ++ci) {
                    const double* x = input + (b * s.in_channels + ci) * s.in_length + t * s.stride;
                    const double* w = weights + (co * s.in_channels + ci) * s.kernel;
                    for (std::size_t j = 0; j < s.kernel; ++j) sum += w[j] * x[j];
                }
                output[(b * s.out_channels + co) * out_len + t] = sum;
            }
        }
    }
}

void conv1d_backward(const Conv1dShape& s, const double* input, const double* weights, const double* grad_output,
                     double* grad_input, double* grad_weights, double* grad_bias) {
    const std::size_t out_len = s.out_length();
    if (grad_input) {
        for (std::size_t i = 0; i < s.batch * s.in_channels * s.in_length; ++i) grad_input[i] = 0.0;
    }
    for (std::size_t b = 0; b < s.batch; ++b) {
        for (std::size_t co = 0; co < s.out_channels; ++co) {
            for (std::size_t t = 0; t < out_len; ++t) {
                const double g = grad_output[(b * s.out_channels + co) * out_len + t];
                grad_bias[co] += g;
                for (std::size_t ci = 0; ci < s.in_channels; ++ci) {
                    const std::size_t x_off = (b * s.in_channels + ci) * s.in_length + t * s.stride;
                    const std::size_t w_off = (co * s.in_channels + ci) * s.kernel;
                    for (std::size_t j = 0; j < s.kernel; ++j) {
                        grad_weights[w_off + j] += g * input[x_off + j];
                        if (grad_input) grad_input[x_off + j] += g * weights[w_off + j];
                    }
                }
            }
        }
    }
}

void dense_forward(std::size_t batch, std::size_t in, std::size_t out, const double* x, const double* w,
                   const double* bias, double* y) {
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t o = 0; o < out; ++o) {
            double sum = bias[o];
            for (std::size_t i = 0; i < in; ++i) sum += w[o * in + i] * x[b * in + i];
            y[b * out + o] = sum;
        }
    }
}

void dense_backward(std::size_t batch, std::size_t in, std::size_t out, const double* x, const double* w,
                    const double* grad_y, double* grad_x, double* grad_w, double* grad_bias) {
    if (grad_x) {
        for (std::size_t i = 0; i < batch * in; ++i) grad_x[i] = 0.0;
    }
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t o = 0; o < out; ++o) {
            const double g = grad_y[b * out + o];
            grad_bias[o] += g;
            for (std::size_t i = 0; i < in; ++i) {
                grad_w[o * in + i] += g * x[b * in + i];
                if (grad_x) grad_x[b * in + i] += g * w[o * in + i];
            }
        }
    }
}

}  // namespace nilm::kernels::reference
