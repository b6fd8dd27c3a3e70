#pragma once

#include <cstddef>

// Data-parallel f64 primitives underlying training and evaluation.
//
// Every kernel has a scalar reference implementation and an AVX2 variant;
// dispatch picks the widest supported set at startup.  The two variants may
// differ by rounding (FMA, reassociated sums) but are equivalence-tested to
// tight relative tolerance.  Within one variant results are deterministic:
// summation order is fixed and never depends on thread count.

namespace llfl::kernels {

enum class Isa { Scalar, Avx2 };

// Instruction set currently in use.
Isa active();
// Name for logs and the CLI banner.
const char* isa_name(Isa isa);
// True if the CPU can run the AVX2 variants.
bool avx2_supported();
// Pin the implementation (tests, or the LLFL_SIMD=scalar|avx2 override).
// Requesting an unsupported set is an error.
void force(Isa isa);

double dot(const double* a, const double* b, std::size_t n);
double sum(const double* a, std::size_t n);
double sqnorm(const double* a, std::size_t n);
double sqdist(const double* a, const double* b, std::size_t n);

// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t n);
// x *= alpha
void scal(double alpha, double* x, std::size_t n);
void add(const double* a, const double* b, double* out, std::size_t n);
void sub(const double* a, const double* b, double* out, std::size_t n);
void mul(const double* a, const double* b, double* out, std::size_t n);

// Row-major matrix products.  When accumulate is false, C is overwritten.
// C(m x n) = A(m x k) * B(k x n)
void matmul_nn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate);
// C(m x n) = A(m x k) * B^T, B stored (n x k)
void matmul_nt(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate);
// C(m x n) = A^T * B, A stored (k x m), B stored (k x n)
void matmul_tn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate);

namespace detail {

struct KernelTable {
    double (*dot)(const double*, const double*, std::size_t);
    double (*sum)(const double*, std::size_t);
    double (*sqnorm)(const double*, std::size_t);
    double (*sqdist)(const double*, const double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    void (*scal)(double, double*, std::size_t);
    void (*add)(const double*, const double*, double*, std::size_t);
    void (*sub)(const double*, const double*, double*, std::size_t);
    void (*mul)(const double*, const double*, double*, std::size_t);
    void (*matmul_nn)(const double*, const double*, double*,
                      std::size_t, std::size_t, std::size_t, bool);
    void (*matmul_nt)(const double*, const double*, double*,
                      std::size_t, std::size_t, std::size_t, bool);
    void (*matmul_tn)(const double*, const double*, double*,
                      std::size_t, std::size_t, std::size_t, bool);
};

const KernelTable& scalar_table();
const KernelTable& avx2_table();

} // namespace detail

} // namespace llfl::kernels
