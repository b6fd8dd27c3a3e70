#include "llfl/kernels.hpp"

#include "llfl/error.hpp"
#include "llfl/rng.hpp"

#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

using namespace llfl;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-2.0, 2.0);
    return v;
}

double rel_diff(double a, double b) {
    const double scale = std::max({std::fabs(a), std::fabs(b), 1.0});
    return std::fabs(a - b) / scale;
}

} // namespace

TEST_CASE("scalar and avx2 reductions agree to tight relative tolerance") {
    if (!kernels::avx2_supported()) return;
    const auto& s = kernels::detail::scalar_table();
    const auto& v = kernels::detail::avx2_table();
    Rng rng(11);
    // Sizes straddle the 4-lane width: remainders of every length.
    for (const std::size_t n : {1, 2, 3, 4, 5, 7, 8, 15, 16, 33, 100, 1023}) {
        const auto a = random_vec(n, rng);
        const auto b = random_vec(n, rng);
        CHECK(rel_diff(s.dot(a.data(), b.data(), n), v.dot(a.data(), b.data(), n)) < 1e-13);
        CHECK(rel_diff(s.sum(a.data(), n), v.sum(a.data(), n)) < 1e-13);
        CHECK(rel_diff(s.sqnorm(a.data(), n), v.sqnorm(a.data(), n)) < 1e-13);
        CHECK(rel_diff(s.sqdist(a.data(), b.data(), n), v.sqdist(a.data(), b.data(), n)) <
              1e-13);
    }
}

TEST_CASE("scalar and avx2 elementwise kernels agree exactly") {
    if (!kernels::avx2_supported()) return;
    const auto& s = kernels::detail::scalar_table();
    const auto& v = kernels::detail::avx2_table();
    Rng rng(12);
    for (const std::size_t n : {1, 3, 4, 9, 64, 130}) {
        const auto a = random_vec(n, rng);
        const auto b = random_vec(n, rng);
        std::vector<double> out_s(n), out_v(n);

        s.add(a.data(), b.data(), out_s.data(), n);
        v.add(a.data(), b.data(), out_v.data(), n);
        CHECK(out_s == out_v);

        s.sub(a.data(), b.data(), out_s.data(), n);
        v.sub(a.data(), b.data(), out_v.data(), n);
        CHECK(out_s == out_v);

        s.mul(a.data(), b.data(), out_s.data(), n);
        v.mul(a.data(), b.data(), out_v.data(), n);
        CHECK(out_s == out_v);

        auto y_s = b, y_v = b;
        s.axpy(0.3, a.data(), y_s.data(), n);
        v.axpy(0.3, a.data(), y_v.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(rel_diff(y_s[i], y_v[i]) < 1e-15);

        auto x_s = a, x_v = a;
        s.scal(-1.7, x_s.data(), n);
        v.scal(-1.7, x_v.data(), n);
        CHECK(x_s == x_v);
    }
}

TEST_CASE("matmul variants match a naive triple loop") {
    Rng rng(13);
    const auto& s = kernels::detail::scalar_table();
    const bool have_avx2 = kernels::avx2_supported();
    const auto& v = have_avx2 ? kernels::detail::avx2_table() : s;

    const std::vector<std::array<std::size_t, 3>> shapes = {
        {1, 1, 1}, {2, 3, 4}, {3, 5, 2}, {7, 9, 11}, {8, 16, 4}};
    for (const auto [m, k, n] : shapes) {
        const auto a = random_vec(m * k, rng);
        const auto b = random_vec(k * n, rng);
        std::vector<double> naive(m * n, 0.0);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p)
                for (std::size_t j = 0; j < n; ++j) naive[i * n + j] += a[i * k + p] * b[p * n + j];

        std::vector<double> c(m * n, 7.0);
        s.matmul_nn(a.data(), b.data(), c.data(), m, k, n, false);
        for (std::size_t i = 0; i < m * n; ++i) CHECK(rel_diff(c[i], naive[i]) < 1e-13);
        if (have_avx2) {
            std::vector<double> cv(m * n, 7.0);
            v.matmul_nn(a.data(), b.data(), cv.data(), m, k, n, false);
            for (std::size_t i = 0; i < m * n; ++i) CHECK(rel_diff(cv[i], naive[i]) < 1e-13);
        }

        // B^T stored (n x k): b_t[j*k+p] = b[p*n+j]
        std::vector<double> b_t(n * k);
        for (std::size_t p = 0; p < k; ++p)
            for (std::size_t j = 0; j < n; ++j) b_t[j * k + p] = b[p * n + j];
        s.matmul_nt(a.data(), b_t.data(), c.data(), m, k, n, false);
        for (std::size_t i = 0; i < m * n; ++i) CHECK(rel_diff(c[i], naive[i]) < 1e-13);
        if (have_avx2) {
            std::vector<double> cv(m * n, 0.0);
            v.matmul_nt(a.data(), b_t.data(), cv.data(), m, k, n, false);
            for (std::size_t i = 0; i < m * n; ++i) CHECK(rel_diff(cv[i], naive[i]) < 1e-13);
        }

        // A^T stored (k x m): a_t[p*m+i] = a[i*k+p]
        std::vector<double> a_t(k * m);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) a_t[p * m + i] = a[i * k + p];
        s.matmul_tn(a_t.data(), b.data(), c.data(), m, k, n, false);
        for (std::size_t i = 0; i < m * n; ++i) CHECK(rel_diff(c[i], naive[i]) < 1e-13);
        if (have_avx2) {
            std::vector<double> cv(m * n, 0.0);
            v.matmul_tn(a_t.data(), b.data(), cv.data(), m, k, n, false);
            for (std::size_t i = 0; i < m * n; ++i) CHECK(rel_diff(cv[i], naive[i]) < 1e-13);
        }
    }
}

TEST_CASE("matmul accumulate adds into the output") {
    const auto& s = kernels::detail::scalar_table();
    const double a[4] = {1, 2, 3, 4};  // 2x2
    const double b[4] = {5, 6, 7, 8};
    std::vector<double> c = {100, 100, 100, 100};
    s.matmul_nn(a, b, c.data(), 2, 2, 2, true);
    CHECK(c[0] == doctest::Approx(100 + 19));
    CHECK(c[3] == doctest::Approx(100 + 50));
}

TEST_CASE("force pins the active implementation") {
    const kernels::Isa before = kernels::active();
    kernels::force(kernels::Isa::Scalar);
    CHECK(kernels::active() == kernels::Isa::Scalar);
    const double a[3] = {1, 2, 3};
    CHECK(kernels::sum(a, 3) == 6.0);
    if (kernels::avx2_supported()) {
        kernels::force(kernels::Isa::Avx2);
        CHECK(kernels::active() == kernels::Isa::Avx2);
        CHECK(kernels::sum(a, 3) == 6.0);
    } else {
        CHECK_THROWS_AS(kernels::force(kernels::Isa::Avx2), Error);
    }
    kernels::force(before);
}
