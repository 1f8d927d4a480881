#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "rocbf/kernels.hpp"
#include "rocbf/rng.hpp"

using rocbf::Rng;
namespace k = rocbf::kernels;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double lo, double hi) {
    std::vector<double> v(n);
    for (auto& e : v) e = rng.uniform(lo, hi);
    return v;
}

bool bits_equal(double a, double b) {
    return std::memcmp(&a, &b, sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("sincos matches libm on the working range") {
    Rng rng(1234);
    const auto& ops = k::scalar_ops();
    std::vector<double> z(4096), s(z.size()), c(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        // Mix of small and large magnitudes, plus exact multiples of pi/2.
        const double pick = rng.uniform();
        if (pick < 0.5)
            z[i] = rng.uniform(-20.0, 20.0);
        else if (pick < 0.9)
            z[i] = rng.uniform(-1e4, 1e4);
        else
            z[i] = std::round(rng.uniform(-100.0, 100.0)) * 1.57079632679489662;
    }
    z[0] = 0.0;
    z[1] = 1.0;
    z[2] = -1.0;
    ops.sincos(z.data(), s.data(), c.data(), z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        CHECK(std::fabs(s[i] - std::sin(z[i])) <= 1e-13);
        CHECK(std::fabs(c[i] - std::cos(z[i])) <= 1e-13);
    }
}

TEST_CASE("sincos falls back to libm outside the reduction range") {
    const auto& ops = k::scalar_ops();
    std::vector<double> z = {2.0e5, -3.7e9, std::nan(""), 1e300};
    std::vector<double> s(z.size()), c(z.size());
    ops.sincos(z.data(), s.data(), c.data(), z.size());
    CHECK(s[0] == doctest::Approx(std::sin(z[0])).epsilon(1e-12));
    CHECK(c[1] == doctest::Approx(std::cos(z[1])).epsilon(1e-12));
    CHECK(std::isnan(s[2]));
    CHECK(std::isnan(c[2]));
}

TEST_CASE("avx2 kernels are bit-identical to the scalar reference") {
    if (!k::avx2_available()) return;  // nothing to compare on this host
    const auto& sc = k::scalar_ops();
    const auto& vx = k::avx2_ops();
    Rng rng(99);

    for (std::size_t n : {std::size_t(1), std::size_t(3), std::size_t(4),
                          std::size_t(7), std::size_t(64), std::size_t(1001)}) {
        auto a = random_vec(rng, n, -30.0, 30.0);
        auto b = random_vec(rng, n, -2.0, 2.0);

        // sincos
        std::vector<double> s1(n), c1(n), s2(n), c2(n);
        sc.sincos(a.data(), s1.data(), c1.data(), n);
        vx.sincos(a.data(), s2.data(), c2.data(), n);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(bits_equal(s1[i], s2[i]));
            CHECK(bits_equal(c1[i], c2[i]));
        }

        // dot
        CHECK(bits_equal(sc.dot(a.data(), b.data(), n),
                         vx.dot(a.data(), b.data(), n)));

        // axpy
        auto y1 = b, y2 = b;
        sc.axpy(0.37, a.data(), y1.data(), n);
        vx.axpy(0.37, a.data(), y2.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(bits_equal(y1[i], y2[i]));
    }

    // sq_dists over a dim-major point block
    const std::size_t npts = 143, dim = 4;
    auto pts = random_vec(rng, npts * dim, -5.0, 5.0);
    auto q = random_vec(rng, dim, -5.0, 5.0);
    std::vector<double> d1(npts), d2(npts);
    sc.sq_dists(pts.data(), npts, dim, q.data(), d1.data());
    vx.sq_dists(pts.data(), npts, dim, q.data(), d2.data());
    for (std::size_t i = 0; i < npts; ++i) CHECK(bits_equal(d1[i], d2[i]));

    // large-argument lanes force the shared libm fallback inside a vector
    std::vector<double> mixed = {1.0, 2.0e5, 0.5, -3.0e7, 2.0, 3.0, 4.0, 5.0};
    std::vector<double> ms1(8), mc1(8), ms2(8), mc2(8);
    sc.sincos(mixed.data(), ms1.data(), mc1.data(), 8);
    vx.sincos(mixed.data(), ms2.data(), mc2.data(), 8);
    for (std::size_t i = 0; i < 8; ++i) {
        CHECK(bits_equal(ms1[i], ms2[i]));
        CHECK(bits_equal(mc1[i], mc2[i]));
    }
}

TEST_CASE("dot and sq_dists agree with naive formulas") {
    Rng rng(7);
    const auto& ops = k::active();
    auto a = random_vec(rng, 257, -1.0, 1.0);
    auto b = random_vec(rng, 257, -1.0, 1.0);
    double naive = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) naive += a[i] * b[i];
    CHECK(ops.dot(a.data(), b.data(), a.size()) ==
          doctest::Approx(naive).epsilon(1e-12));

    const std::size_t npts = 31, dim = 3;
    auto pts = random_vec(rng, npts * dim, -2.0, 2.0);
    auto q = random_vec(rng, dim, -2.0, 2.0);
    std::vector<double> out(npts);
    ops.sq_dists(pts.data(), npts, dim, q.data(), out.data());
    for (std::size_t j = 0; j < npts; ++j) {
        double acc = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            const double t = pts[d * npts + j] - q[d];
            acc += t * t;
        }
        CHECK(out[j] == doctest::Approx(acc).epsilon(1e-12));
    }
}

TEST_CASE("dispatch honors force()") {
    const auto before = k::active_isa();
    k::force(k::Isa::scalar);
    CHECK(std::strcmp(k::active().name, "scalar") == 0);
    if (k::avx2_available()) {
        k::force(k::Isa::avx2);
        CHECK(std::strcmp(k::active().name, "avx2") == 0);
    }
    k::force(before);
}
