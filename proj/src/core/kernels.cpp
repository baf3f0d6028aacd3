#include "nilm/core/kernels.hpp"

#include <algorithm>
#include <cstring>
#include <vector>

namespace nilm::kernels {

namespace {

// Register tile is kMr rows by kNr columns; kNr is two 8-wide double vectors.
constexpr std::size_t kMr = 4;
constexpr std::size_t kNr = 16;
constexpr std::size_t kKc = 256;
constexpr std::size_t kMc = 128;
constexpr std::size_t kNc = 2048;

typedef double vec8 __attribute__((vector_size(64)));

inline vec8 load8(const double* p) {
    vec8 v;
    std::memcpy(&v, p, sizeof(v));
    return v;
}

// op(A)[i0:i0+mc, p0:p0+kc] -> panels of kMr rows, k-major, zero padded.
void pack_a(Trans t, const double* a, std::size_t lda, std::size_t i0, std::size_t mc, std::size_t p0,
            std::size_t kc, double* dst) {
    for (std::size_t ip = 0; ip < mc; ip += kMr) {
        const std::size_t rows = std::min(kMr, mc - ip);
        if (t == Trans::no) {
            for (std::size_t r = 0; r < kMr; ++r) {
                if (r < rows) {
                    const double* src = a + (i0 + ip + r) * lda + p0;
                    for (std::size_t p = 0; p < kc; ++p) dst[p * kMr + r] = src[p];
                } else {
                    for (std::size_t p = 0; p < kc; ++p) dst[p * kMr + r] = 0.0;
                }
            }
        } else {
            for (std::size_t p = 0; p < kc; ++p) {
                const double* src = a + (p0 + p) * lda + i0 + ip;
                for (std::size_t r = 0; r < kMr; ++r) dst[p * kMr + r] = r < rows ? src[r] : 0.0;
            }
        }
        dst += kMr * kc;
    }
}

// op(B)[p0:p0+kc, j0:j0+nc] -> panels of kNr columns, k-major, zero padded.
void pack_b(Trans t, const double* b, std::size_t ldb, std::size_t p0, std::size_t kc, std::size_t j0,
            std::size_t nc, double* dst) {
    for (std::size_t jp = 0; jp < nc; jp += kNr) {
        const std::size_t cols = std::min(kNr, nc - jp);
        if (t == Trans::no) {
            for (std::size_t p = 0; p < kc; ++p) {
                double* row = dst + p * kNr;
                const double* src = b + (p0 + p) * ldb + j0 + jp;
                std::size_t c = 0;
                for (; c < cols; ++c) row[c] = src[c];
                for (; c < kNr; ++c) row[c] = 0.0;
            }
        } else {
            for (std::size_t c = 0; c < kNr; ++c) {
                if (c < cols) {
                    const double* src = b + (j0 + jp + c) * ldb + p0;
                    for (std::size_t p = 0; p < kc; ++p) dst[p * kNr + c] = src[p];
                } else {
                    for (std::size_t p = 0; p < kc; ++p) dst[p * kNr + c] = 0.0;
                }
            }
        }
        dst += kNr * kc;
    }
}

void micro_kernel(std::size_t kc, const double* pa, const double* pb, double alpha, double* c, std::size_t ldc,
                  std::size_t rows, std::size_t cols) {
    vec8 acc[kMr][2] = {};
    for (std::size_t p = 0; p < kc; ++p) {
        const vec8 b0 = load8(pb + p * kNr);
        const vec8 b1 = load8(pb + p * kNr + 8);
        const double* ap = pa + p * kMr;
        for (std::size_t r = 0; r < kMr; ++r) {
            acc[r][0] += ap[r] * b0;
            acc[r][1] += ap[r] * b1;
        }
    }
    for (std::size_t r = 0; r < rows; ++r) {
        double tile[kNr];
        std::memcpy(tile, &acc[r][0], sizeof(vec8));
        std::memcpy(tile + 8, &acc[r][1], sizeof(vec8));
        double* out = c + r * ldc;
        for (std::size_t col = 0; col < cols; ++col) out[col] += alpha * tile[col];
    }
}

std::vector<double>& scratch(int slot) {
    thread_local std::vector<double> buffers[3];
    return buffers[slot];
}

void im2col(const Conv1dShape& s, const double* input, double* col) {
    // col [(ci * kernel + j), (b * out_len + t)]
    const std::size_t out_len = s.out_length();
    const std::size_t cols = s.batch * out_len;
    const std::size_t rows = s.in_channels * s.kernel;
#pragma omp parallel for schedule(static)
    for (std::size_t row = 0; row < rows; ++row) {
        const std::size_t ci = row / s.kernel;
        const std::size_t j = row % s.kernel;
        double* dst = col + row * cols;
        for (std::size_t b = 0; b < s.batch; ++b) {
            const double* x = input + (b * s.in_channels + ci) * s.in_length + j;
            double* d = dst + b * out_len;
            for (std::size_t t = 0; t < out_len; ++t) d[t] = x[t * s.stride];
        }
    }
}

void col2im(const Conv1dShape& s, const double* col, double* grad_input) {
    const std::size_t out_len = s.out_length();
    const std::size_t cols = s.batch * out_len;
    std::fill(grad_input, grad_input + s.batch * s.in_channels * s.in_length, 0.0);
    // Each (b, ci) input row is owned by one iteration; kernel taps are summed in fixed order.
#pragma omp parallel for collapse(2) schedule(static)
    for (std::size_t b = 0; b < s.batch; ++b) {
        for (std::size_t ci = 0; ci < s.in_channels; ++ci) {
            double* gx = grad_input + (b * s.in_channels + ci) * s.in_length;
            for (std::size_t j = 0; j < s.kernel; ++j) {
                const double* src = col + (ci * s.kernel + j) * cols + b * out_len;
                for (std::size_t t = 0; t < out_len; ++t) gx[t * s.stride + j] += src[t];
            }
        }
    }
}

}  // namespace

void gemm(Trans trans_a, Trans trans_b, std::size_t m, std::size_t n, std::size_t k, double alpha,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double beta, double* c,
          std::size_t ldc) {
    if (m == 0 || n == 0) return;
    for (std::size_t i = 0; i < m; ++i) {
        double* row = c + i * ldc;
        if (beta == 0.0) {
            std::fill(row, row + n, 0.0);
        } else if (beta != 1.0) {
            for (std::size_t j = 0; j < n; ++j) row[j] *= beta;
        }
    }
    if (k == 0 || alpha == 0.0) return;

    std::vector<double>& packed_a = scratch(0);
    std::vector<double>& packed_b = scratch(1);

    for (std::size_t jc = 0; jc < n; jc += kNc) {
        const std::size_t nc = std::min(kNc, n - jc);
        const std::size_t n_panels = (nc + kNr - 1) / kNr;
        for (std::size_t pc = 0; pc < k; pc += kKc) {
            const std::size_t kc = std::min(kKc, k - pc);
            packed_b.resize(n_panels * kNr * kc);
            pack_b(trans_b, b, ldb, pc, kc, jc, nc, packed_b.data());
            for (std::size_t ic = 0; ic < m; ic += kMc) {
                const std::size_t mc = std::min(kMc, m - ic);
                const std::size_t m_panels = (mc + kMr - 1) / kMr;
                packed_a.resize(m_panels * kMr * kc);
                pack_a(trans_a, a, lda, ic, mc, pc, kc, packed_a.data());
                const double* pa_base = packed_a.data();
                const double* pb_base = packed_b.data();
#pragma omp parallel for schedule(static)
                for (std::size_t jr = 0; jr < n_panels; ++jr) {
                    const std::size_t cols = std::min(kNr, nc - jr * kNr);
                    for (std::size_t ir = 0; ir < m_panels; ++ir) {
                        const std::size_t rows = std::min(kMr, mc - ir * kMr);
                        micro_kernel(kc, pa_base + ir * kMr * kc, pb_base + jr * kNr * kc, alpha,
                                     c + (ic + ir * kMr) * ldc + jc + jr * kNr, ldc, rows, cols);
                    }
                }
            }
        }
    }
}

void conv1d_forward(const Conv1dShape& s, const double* input, const double* weights, const double* bias,
                    double* output) {
    const std::size_t out_len = s.out_length();
    const std::size_t patch = s.in_channels * s.kernel;
    std::vector<double>& col = scratch(2);
    col.resize(patch * s.batch * out_len);
    im2col(s, input, col.data());
    for (std::size_t b = 0; b < s.batch; ++b) {
        double* out = output + b * s.out_channels * out_len;
        for (std::size_t co = 0; co < s.out_channels; ++co) std::fill(out + co * out_len, out + (co + 1) * out_len, bias[co]);
        gemm(Trans::no, Trans::no, s.out_channels, out_len, patch, 1.0, weights, patch, col.data() + b * out_len,
             s.batch * out_len, 1.0, out, out_len);
    }
}

void conv1d_backward(const Conv1dShape& s, const double* input, const double* weights, const double* grad_output,
                     double* grad_input, double* grad_weights, double* grad_bias) {
    const std::size_t out_len = s.out_length();
    const std::size_t patch = s.in_channels * s.kernel;
    const std::size_t cols = s.batch * out_len;
    std::vector<double> col(patch * cols);
    im2col(s, input, col.data());

    for (std::size_t b = 0; b < s.batch; ++b) {
        const double* g = grad_output + b * s.out_channels * out_len;
        for (std::size_t co = 0; co < s.out_channels; ++co) {
            double sum = 0.0;
            for (std::size_t t = 0; t < out_len; ++t) sum += g[co * out_len + t];
            grad_bias[co] += sum;
        }
        gemm(Trans::no, Trans::yes, s.out_channels, patch, out_len, 1.0, g, out_len, col.data() + b * out_len, cols,
             1.0, grad_weights, patch);
    }
    if (!grad_input) return;
    // Reuse col as d(col).
    for (std::size_t b = 0; b < s.batch; ++b) {
        gemm(Trans::yes, Trans::no, patch, out_len, s.out_channels, 1.0, weights, patch,
             grad_output + b * s.out_channels * out_len, out_len, 0.0, col.data() + b * out_len, cols);
    }
    col2im(s, col.data(), grad_input);
}

void dense_forward(std::size_t batch, std::size_t in, std::size_t out, const double* x, const double* w,
                   const double* bias, double* y) {
    for (std::size_t b = 0; b < batch; ++b) std::copy(bias, bias + out, y + b * out);
    gemm(Trans::no, Trans::yes, batch, out, in, 1.0, x, in, w, in, 1.0, y, out);
}

void dense_backward(std::size_t batch, std::size_t in, std::size_t out, const double* x, const double* w,
                    const double* grad_y, double* grad_x, double* grad_w, double* grad_bias) {
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t o = 0; o < out; ++o) grad_bias[o] += grad_y[b * out + o];
    }
    gemm(Trans::yes, Trans::no, out, in, batch, 1.0, grad_y, out, x, in, 1.0, grad_w, in);
    if (grad_x) gemm(Trans::no, Trans::no, batch, in, out, 1.0, grad_y, out, w, in, 0.0, grad_x, in);
}

}  // namespace nilm::kernels
