#include "llfl/kernels.hpp"

#include "llfl/error.hpp"

#include <cstdlib>
#include <string>

namespace llfl::kernels {
namespace {

const detail::KernelTable* g_table = nullptr;
Isa g_isa = Isa::Scalar;

void select(Isa isa) {
    g_isa = isa;
    g_table = (isa == Isa::Avx2) ? &detail::avx2_table() : &detail::scalar_table();
}

// One-time selection: widest supported set, unless LLFL_SIMD pins one.
void init_once() {
    if (g_table) return;
    const char* env = std::getenv("LLFL_SIMD");
    if (env) {
        const std::string want(env);
        if (want == "scalar") {
            select(Isa::Scalar);
            return;
        }
        if (want == "avx2") {
            require(avx2_supported(), "LLFL_SIMD=avx2 requested but CPU lacks AVX2");
            select(Isa::Avx2);
            return;
        }
        fail("LLFL_SIMD must be 'scalar' or 'avx2', got '", want, "'");
    }
    select(avx2_supported() ? Isa::Avx2 : Isa::Scalar);
}

const detail::KernelTable& table() {
    init_once();
    return *g_table;
}

} // namespace

bool avx2_supported() {
#if defined(__x86_64__) || defined(__i386__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Isa active() {
    init_once();
    return g_isa;
}

const char* isa_name(Isa isa) {
    return isa == Isa::Avx2 ? "avx2" : "scalar";
}

void force(Isa isa) {
    if (isa == Isa::Avx2) {
        require(avx2_supported(), "cannot force AVX2 kernels: CPU lacks AVX2/FMA");
    }
    select(isa);
}

double dot(const double* a, const double* b, std::size_t n) { return table().dot(a, b, n); }
double sum(const double* a, std::size_t n) { return table().sum(a, n); }
double sqnorm(const double* a, std::size_t n) { return table().sqnorm(a, n); }
double sqdist(const double* a, const double* b, std::size_t n) { return table().sqdist(a, b, n); }

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    table().axpy(alpha, x, y, n);
}
void scal(double alpha, double* x, std::size_t n) { table().scal(alpha, x, n); }
void add(const double* a, const double* b, double* out, std::size_t n) {
    table().add(a, b, out, n);
}
void sub(const double* a, const double* b, double* out, std::size_t n) {
    table().sub(a, b, out, n);
}
void mul(const double* a, const double* b, double* out, std::size_t n) {
    table().mul(a, b, out, n);
}

void matmul_nn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    table().matmul_nn(a, b, c, m, k, n, accumulate);
}
void matmul_nt(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    table().matmul_nt(a, b, c, m, k, n, accumulate);
}
void matmul_tn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    table().matmul_tn(a, b, c, m, k, n, accumulate);
}

} // namespace llfl::kernels
