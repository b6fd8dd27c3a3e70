#include "llfl/kernels.hpp"

#include <immintrin.h>

// AVX2 + FMA kernels.  This is the only translation unit built with
// -mavx2 -mfma; nothing here runs unless dispatch confirmed CPU support.
// Each kernel processes 4 doubles per lane with a scalar remainder loop,
// and reduces vector accumulators in a fixed lane order so repeated runs
// produce identical bits.

namespace llfl::kernels {
namespace {

double hsum(__m256d v) {
    alignas(32) double lane[4];
    _mm256_store_pd(lane, v);
    return ((lane[0] + lane[1]) + lane[2]) + lane[3];
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
    }
    double r = hsum(acc);
    for (; i < n; ++i) r += a[i] * b[i];
    return r;
}

double sum_avx2(const double* a, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
    }
    double r = hsum(acc);
    for (; i < n; ++i) r += a[i];
    return r;
}

double sqnorm_avx2(const double* a, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d v = _mm256_loadu_pd(a + i);
        acc = _mm256_fmadd_pd(v, v, acc);
    }
    double r = hsum(acc);
    for (; i < n; ++i) r += a[i] * a[i];
    return r;
}

double sqdist_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc = _mm256_fmadd_pd(d, d, acc);
    }
    double r = hsum(acc);
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        r += d * d;
    }
    return r;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d r = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
        _mm256_storeu_pd(y + i, r);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void scal_avx2(double alpha, double* x, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    }
    for (; i < n; ++i) x[i] *= alpha;
}

void add_avx2(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_avx2(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_avx2(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void matmul_nn_avx2(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    if (!accumulate) {
        for (std::size_t i = 0; i < m * n; ++i) c[i] = 0.0;
    }
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        for (std::size_t l = 0; l < k; ++l) {
            const __m256d av = _mm256_set1_pd(a[i * k + l]);
            const double* brow = b + l * n;
            std::size_t j = 0;
            for (; j + 4 <= n; j += 4) {
                const __m256d r =
                    _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j), _mm256_loadu_pd(crow + j));
                _mm256_storeu_pd(crow + j, r);
            }
            const double as = a[i * k + l];
            for (; j < n; ++j) crow[j] += as * brow[j];
        }
    }
}

void matmul_nt_avx2(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double v = dot_avx2(a + i * k, b + j * k, k);
            if (accumulate) {
                c[i * n + j] += v;
            } else {
                c[i * n + j] = v;
            }
        }
    }
}

void matmul_tn_avx2(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    if (!accumulate) {
        for (std::size_t i = 0; i < m * n; ++i) c[i] = 0.0;
    }
    for (std::size_t l = 0; l < k; ++l) {
        const double* arow = a + l * m;
        const double* brow = b + l * n;
        for (std::size_t i = 0; i < m; ++i) {
            const __m256d av = _mm256_set1_pd(arow[i]);
            double* crow = c + i * n;
            std::size_t j = 0;
            for (; j + 4 <= n; j += 4) {
                const __m256d r =
                    _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j), _mm256_loadu_pd(crow + j));
                _mm256_storeu_pd(crow + j, r);
            }
            for (; j < n; ++j) crow[j] += arow[i] * brow[j];
        }
    }
}

} // namespace

namespace detail {

const KernelTable& avx2_table() {
    static const KernelTable table = {
        dot_avx2,    sum_avx2, sqnorm_avx2, sqdist_avx2,
        axpy_avx2,   scal_avx2, add_avx2,    sub_avx2,     mul_avx2,
        matmul_nn_avx2, matmul_nt_avx2, matmul_tn_avx2,
    };
    return table;
}

} // namespace detail
} // namespace llfl::kernels
