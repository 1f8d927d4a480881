#pragma once
// Data-parallel inner-loop kernels with runtime ISA dispatch.
//
// Every kernel has a scalar reference implementation and, on x86-64, an AVX2+FMA
// variant. Both lanes follow the same per-element FMA sequence and the same
// 4-lane reduction tree, so their results are bit-identical; the equivalence
// tests assert exact equality, not a tolerance.

#include <cstddef>

namespace rocbf::kernels {

enum class Isa { scalar, avx2 };

struct Ops {
    const char* name;
    // s[i] = sin(z[i]), c[i] = cos(z[i]). Cody-Waite reduction valid for
    // |z| <= 1e5; larger or non-finite inputs fall back to libm in both lanes.
    void (*sincos)(const double* z, double* s, double* c, std::size_t n);
    // 4-accumulator FMA dot product, fixed combine order.
    double (*dot)(const double* a, const double* b, std::size_t n);
    // y[i] = fma(a, x[i], y[i])
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    // Squared Euclidean distances from query x to n_points points stored
    // dim-major (pts[d * n_points + j] is coordinate d of point j).
    void (*sq_dists)(const double* pts, std::size_t n_points, std::size_t dim,
                     const double* x, double* out);
};

const Ops& scalar_ops();
const Ops& avx2_ops();  // only valid when avx2_available()
bool avx2_available();

// Active table: resolved once from ROCBF_ISA env var ("scalar"/"avx2") or CPU
// detection. force() overrides it, for tests and the CLI --isa flag.
const Ops& active();
Isa active_isa();
void force(Isa isa);

}  // namespace rocbf::kernels
