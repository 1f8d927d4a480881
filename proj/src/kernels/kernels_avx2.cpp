// AVX2+FMA kernel variants. This translation unit is the only one compiled
// with -mavx2 -mfma; callers must check avx2_available() before using it.
//
// Each kernel mirrors the scalar reference exactly: same constants, same FMA
// sequence per element, same 4-lane accumulator layout and combine order in
// reductions. Equivalence tests assert bitwise equality against the scalar
// lane.

#include "rocbf/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define ROCBF_HAVE_AVX2_BUILD 1
#else
#define ROCBF_HAVE_AVX2_BUILD 0
#endif

#if ROCBF_HAVE_AVX2_BUILD

#include <immintrin.h>

#include <cmath>

#include "kernel_core.hpp"

namespace rocbf::kernels {
namespace {

using namespace detail;

void sincos_avx2(const double* z, double* s, double* c, std::size_t n) {
    const __m256d sign_mask = _mm256_set1_pd(-0.0);
    const __m256d limit = _mm256_set1_pd(kReductionLimit);
    const __m256d two_over_pi = _mm256_set1_pd(kTwoOverPi);
    const __m256d pio2_a = _mm256_set1_pd(kPio2A);
    const __m256d pio2_b = _mm256_set1_pd(kPio2B);
    const __m256d pio2_c = _mm256_set1_pd(kPio2C);
    const __m256i one64 = _mm256_set1_epi64x(1);
    const __m256i two64 = _mm256_set1_epi64x(2);

    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vz = _mm256_loadu_pd(z + i);
        const __m256d vabs = _mm256_andnot_pd(sign_mask, vz);
        // NLE_UQ is true for |z| > limit and for NaN; those lanes take the
        // scalar path (which matches bitwise anyway).
        const __m256d oob = _mm256_cmp_pd(vabs, limit, _CMP_NLE_UQ);
        if (_mm256_movemask_pd(oob) != 0) {
            for (std::size_t k = 0; k < 4; ++k)
                sincos_one(z[i + k], &s[i + k], &c[i + k]);
            continue;
        }

        const __m128i qi32 = _mm256_cvtpd_epi32(_mm256_mul_pd(vz, two_over_pi));
        const __m256d qf = _mm256_cvtepi32_pd(qi32);
        __m256d r = _mm256_fnmadd_pd(qf, pio2_a, vz);
        r = _mm256_fnmadd_pd(qf, pio2_b, r);
        r = _mm256_fnmadd_pd(qf, pio2_c, r);
        const __m256d u = _mm256_mul_pd(r, r);

        __m256d ps = _mm256_set1_pd(kSin7);
        ps = _mm256_fmadd_pd(ps, u, _mm256_set1_pd(kSin6));
        ps = _mm256_fmadd_pd(ps, u, _mm256_set1_pd(kSin5));
        ps = _mm256_fmadd_pd(ps, u, _mm256_set1_pd(kSin4));
        ps = _mm256_fmadd_pd(ps, u, _mm256_set1_pd(kSin3));
        ps = _mm256_fmadd_pd(ps, u, _mm256_set1_pd(kSin2));
        ps = _mm256_fmadd_pd(ps, u, _mm256_set1_pd(kSin1));
        const __m256d ru = _mm256_mul_pd(u, r);
        ps = _mm256_fmadd_pd(ps, ru, r);

        __m256d pc = _mm256_set1_pd(kCos8);
        pc = _mm256_fmadd_pd(pc, u, _mm256_set1_pd(kCos7));
        pc = _mm256_fmadd_pd(pc, u, _mm256_set1_pd(kCos6));
        pc = _mm256_fmadd_pd(pc, u, _mm256_set1_pd(kCos5));
        pc = _mm256_fmadd_pd(pc, u, _mm256_set1_pd(kCos4));
        pc = _mm256_fmadd_pd(pc, u, _mm256_set1_pd(kCos3));
        pc = _mm256_fmadd_pd(pc, u, _mm256_set1_pd(kCos2));
        pc = _mm256_fmadd_pd(pc, u, _mm256_set1_pd(kCos1));
        pc = _mm256_fmadd_pd(pc, u, _mm256_set1_pd(kCos0));

        const __m256i qi64 = _mm256_cvtepi32_epi64(qi32);
        const __m256d swap = _mm256_castsi256_pd(
            _mm256_cmpeq_epi64(_mm256_and_si256(qi64, one64), one64));
        __m256d sv = _mm256_blendv_pd(ps, pc, swap);
        __m256d cv = _mm256_blendv_pd(pc, ps, swap);
        const __m256i sbit =
            _mm256_slli_epi64(_mm256_and_si256(qi64, two64), 62);
        const __m256i cbit = _mm256_slli_epi64(
            _mm256_and_si256(_mm256_add_epi64(qi64, one64), two64), 62);
        sv = _mm256_xor_pd(sv, _mm256_castsi256_pd(sbit));
        cv = _mm256_xor_pd(cv, _mm256_castsi256_pd(cbit));

        _mm256_storeu_pd(s + i, sv);
        _mm256_storeu_pd(c + i, cv);
    }
    for (; i < n; ++i) sincos_one(z[i], &s[i], &c[i]);
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d vacc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        vacc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                               vacc);
    }
    // Combine as (lane0 + lane2) + (lane1 + lane3), matching the scalar lane.
    const __m128d lo = _mm256_castpd256_pd128(vacc);
    const __m128d hi = _mm256_extractf128_pd(vacc, 1);
    const __m128d pair = _mm_add_pd(lo, hi);
    double acc =
        _mm_cvtsd_f64(pair) + _mm_cvtsd_f64(_mm_unpackhi_pd(pair, pair));
    for (; i < n; ++i) acc = std::fma(a[i], b[i], acc);
    return acc;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i),
                                           _mm256_loadu_pd(y + i));
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i) y[i] = std::fma(a, x[i], y[i]);
}

void sq_dists_avx2(const double* pts, std::size_t n_points, std::size_t dim,
                   const double* x, double* out) {
    std::size_t j = 0;
    for (; j + 4 <= n_points; j += 4) {
        __m256d acc = _mm256_setzero_pd();
        for (std::size_t d = 0; d < dim; ++d) {
            const __m256d p = _mm256_loadu_pd(pts + d * n_points + j);
            const __m256d diff = _mm256_sub_pd(p, _mm256_set1_pd(x[d]));
            acc = _mm256_fmadd_pd(diff, diff, acc);
        }
        _mm256_storeu_pd(out + j, acc);
    }
    for (; j < n_points; ++j) {
        double acc = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            const double t = pts[d * n_points + j] - x[d];
            acc = std::fma(t, t, acc);
        }
        out[j] = acc;
    }
}

}  // namespace

const Ops& avx2_ops() {
    static const Ops ops{"avx2", sincos_avx2, dot_avx2, axpy_avx2,
                         sq_dists_avx2};
    return ops;
}

}  // namespace rocbf::kernels

#else  // !ROCBF_HAVE_AVX2_BUILD

namespace rocbf::kernels {

const Ops& avx2_ops() { return scalar_ops(); }

}  // namespace rocbf::kernels

#endif
