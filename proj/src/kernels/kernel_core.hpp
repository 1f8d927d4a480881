#pragma once
// Shared per-element core for the trig kernels. Included by both the scalar
// and AVX2 translation units; everything here uses explicit std::fma so the
// element-wise results do not depend on compiler contraction settings.

#include <cmath>
#include <cstdint>

namespace rocbf::kernels::detail {

constexpr double kTwoOverPi = 6.36619772367581343076e-01;
constexpr double kPio2A = 1.57079632673412561417e+00;
constexpr double kPio2B = 6.07710050630396597660e-11;
constexpr double kPio2C = 2.02226624879595063154e-21;
constexpr double kReductionLimit = 1.0e5;

constexpr double kSin1 = -1.0 / 6.0;
constexpr double kSin2 = 1.0 / 120.0;
constexpr double kSin3 = -1.0 / 5040.0;
constexpr double kSin4 = 1.0 / 362880.0;
constexpr double kSin5 = -1.0 / 39916800.0;
constexpr double kSin6 = 1.0 / 6227020800.0;
constexpr double kSin7 = -1.0 / 1307674368000.0;

constexpr double kCos0 = 1.0;
constexpr double kCos1 = -1.0 / 2.0;
constexpr double kCos2 = 1.0 / 24.0;
constexpr double kCos3 = -1.0 / 720.0;
constexpr double kCos4 = 1.0 / 40320.0;
constexpr double kCos5 = -1.0 / 3628800.0;
constexpr double kCos6 = 1.0 / 479001600.0;
constexpr double kCos7 = -1.0 / 87178291200.0;
constexpr double kCos8 = 1.0 / 20922789888000.0;

inline double sin_poly(double r, double u) {
    double p = kSin7;
    p = std::fma(p, u, kSin6);
    p = std::fma(p, u, kSin5);
    p = std::fma(p, u, kSin4);
    p = std::fma(p, u, kSin3);
    p = std::fma(p, u, kSin2);
    p = std::fma(p, u, kSin1);
    const double ru = u * r;
    return std::fma(p, ru, r);
}

inline double cos_poly(double u) {
    double p = kCos8;
    p = std::fma(p, u, kCos7);
    p = std::fma(p, u, kCos6);
    p = std::fma(p, u, kCos5);
    p = std::fma(p, u, kCos4);
    p = std::fma(p, u, kCos3);
    p = std::fma(p, u, kCos2);
    p = std::fma(p, u, kCos1);
    return std::fma(p, u, kCos0);
}

inline void sincos_one(double z, double* s, double* c) {
    if (!(std::fabs(z) <= kReductionLimit)) {  // also catches NaN/Inf
        *s = std::sin(z);
        *c = std::cos(z);
        return;
    }
    const double qf = std::nearbyint(z * kTwoOverPi);
    const auto qi = static_cast<std::int64_t>(qf);
    double r = std::fma(-qf, kPio2A, z);
    r = std::fma(-qf, kPio2B, r);
    r = std::fma(-qf, kPio2C, r);
    const double u = r * r;
    const double ps = sin_poly(r, u);
    const double pc = cos_poly(u);
    const bool swap = (qi & 1) != 0;
    double sv = swap ? pc : ps;
    double cv = swap ? ps : pc;
    if (qi & 2) sv = -sv;
    if ((qi + 1) & 2) cv = -cv;
    *s = sv;
    *c = cv;
}

}  // namespace rocbf::kernels::detail
