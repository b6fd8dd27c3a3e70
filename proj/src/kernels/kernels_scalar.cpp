#include "llfl/kernels.hpp"

// Scalar reference kernels.  These define the semantics the AVX2 variants
// are tested against; keep them simple and obviously correct.

namespace llfl::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double sum_scalar(const double* a, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i];
    return acc;
}

double sqnorm_scalar(const double* a, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * a[i];
    return acc;
}

double sqdist_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scal_scalar(double alpha, double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void add_scalar(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_scalar(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_scalar(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void matmul_nn_scalar(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    if (!accumulate) {
        for (std::size_t i = 0; i < m * n; ++i) c[i] = 0.0;
    }
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t l = 0; l < k; ++l) {
            const double av = a[i * k + l];
            const double* brow = b + l * n;
            double* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void matmul_nt_scalar(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double v = dot_scalar(a + i * k, b + j * k, k);
            if (accumulate) {
                c[i * n + j] += v;
            } else {
                c[i * n + j] = v;
            }
        }
    }
}

void matmul_tn_scalar(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    if (!accumulate) {
        for (std::size_t i = 0; i < m * n; ++i) c[i] = 0.0;
    }
    for (std::size_t l = 0; l < k; ++l) {
        const double* arow = a + l * m;
        const double* brow = b + l * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = arow[i];
            double* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

} // namespace

namespace detail {

const KernelTable& scalar_table() {
    static const KernelTable table = {
        dot_scalar,    sum_scalar, sqnorm_scalar, sqdist_scalar,
        axpy_scalar,   scal_scalar, add_scalar,    sub_scalar,     mul_scalar,
        matmul_nn_scalar, matmul_nt_scalar, matmul_tn_scalar,
    };
    return table;
}

} // namespace detail
} // namespace llfl::kernels
