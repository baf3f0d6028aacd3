#pragma once

// Numeric kernels behind the differentiable ops.
//
// Two implementations share one interface: `nilm::kernels` holds the
// cache-blocked, OpenMP-parallel versions used for training, and
// `nilm::kernels::reference` holds straightforward serial loops kept as the
// test oracle and benchmark baseline. All matrices are row-major.
//
// Every parallel kernel partitions work by output element, so results do not
// depend on the thread count.

#include <cstddef>
#include <vector>

namespace nilm::kernels {

enum class Trans { no, yes };

// C = alpha * op(A) * op(B) + beta * C, op(A) is m x k, op(B) is k x n.
void gemm(Trans trans_a, Trans trans_b, std::size_t m, std::size_t n, std::size_t k, double alpha,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double beta, double* c,
          std::size_t ldc);

struct Conv1dShape {
    std::size_t batch = 1;
    std::size_t in_channels = 1;
    std::size_t in_length = 1;
    std::size_t out_channels = 1;
    std::size_t kernel = 1;
    std::size_t stride = 1;

    std::size_t out_length() const { return (in_length - kernel) / stride + 1; }
};

// input [batch, in_channels, in_length], weights [out_channels, in_channels, kernel],
// output [batch, out_channels, out_length].
void conv1d_forward(const Conv1dShape& s, const double* input, const double* weights, const double* bias,
                    double* output);

// Accumulates into grad_weights / grad_bias; overwrites grad_input when non-null.
void conv1d_backward(const Conv1dShape& s, const double* input, const double* weights, const double* grad_output,
                     double* grad_input, double* grad_weights, double* grad_bias);

// x [batch, in], w [out, in], y [batch, out].
void dense_forward(std::size_t batch, std::size_t in, std::size_t out, const double* x, const double* w,
                   const double* bias, double* y);

void dense_backward(std::size_t batch, std::size_t in, std::size_t out, const double* x, const double* w,
                    const double* grad_y, double* grad_x, double* grad_w, double* grad_bias);

namespace reference {

void gemm(Trans trans_a, Trans trans_b, std::size_t m, std::size_t n, std::size_t k, double alpha,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double beta, double* c,
          std::size_t ldc);

void conv1d_forward(const Conv1dShape& s, const double* input, const double* weights, const double* bias,
                    double* output);

void conv1d_backward(const Conv1dShape& s, const double* input, const double* weights, const double* grad_output,
                     double* grad_input, double* grad_weights, double* grad_bias);

void dense_forward(std::size_t batch, std::size_t in, std::size_t out, const double* x, const double* w,
                   const double* bias, double* y);

void dense_backward(std::size_t batch, std::size_t in, std::size_t out, const double* x, const double* w,
                    const double* grad_y, double* grad_x, double* grad_w, double* grad_bias);

}  // namespace reference

}  // namespace nilm::kernels
