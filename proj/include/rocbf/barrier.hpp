#pragma once
// Random-Fourier-feature barrier h(x) = <phi(x), theta> with
// phi_i(x) = sqrt(2/ell) * cos(<x, w_i> + b_i), plus the robust barrier
// derivative terms B = B1 + <B2, u> + B3*||u|| and the measurement-robust
// constraint function q. The extended class-K function is linear,
// alpha(r) = alpha_slope * r, which keeps training convex in theta.

#include <cstdint>
#include <string>
#include <utility>

#include "rocbf/linalg.hpp"
#include "rocbf/model.hpp"

namespace rocbf {

struct RffBarrier {
    std::size_t n = 0;    // input dimension
    std::size_t ell = 0;  // feature count
    double sigma2 = 1.0;  // frequency variance, w_i ~ N(0, sigma2 * I)
    double alpha_slope = 1.0;
    Vec w_cols;  // ell x n frequency matrix, stored column-major
    Vec phases;  // b, length ell, in [0, 2*pi)
    Vec theta;   // weights, length ell

    // Frozen (W, b) from a seeded draw; theta starts at zero.
    static RffBarrier sample(std::size_t n, std::size_t ell, double sigma2,
                             double alpha_slope, std::uint64_t seed);

    double scale() const;  // sqrt(2/ell)
    double w_at(std::size_t i, std::size_t d) const {
        return w_cols[d * ell + i];
    }
    const double* col(std::size_t d) const { return w_cols.data() + d * ell; }
};

// Reusable ell-length buffers so the hot paths do not allocate.
struct RffScratch {
    Vec z, s, c, t1, t2;
};

struct RobustnessConsts {
    double lbar1 = 1.0;
    double lbar2 = 0.5;
    double lbar3 = 0.5;
};

struct BTerms {
    double b1 = 0.0;
    Vec b2;           // length m
    double b3 = 0.0;  // always <= 0
};

// z = W x + b and its sin/cos, the shared front end of every evaluation.
void rff_trig(const RffBarrier& bar, const Vec& x, RffScratch& ws);

Vec features(const RffBarrier& bar, const Vec& x);
double eval_h(const RffBarrier& bar, const Vec& x);
Vec grad_h(const RffBarrier& bar, const Vec& x);
// One-pass h and gradient off a filled scratch.
void eval_h_grad(const RffBarrier& bar, RffScratch& ws, double* h, Vec* grad);

BTerms compute_b_terms(const RffBarrier& bar, const Vec& x, double t,
                       const SystemModel& sys);
BTerms compute_b_terms(const RffBarrier& bar, const Vec& x, double t,
                       const SystemModel& sys, RffScratch& ws);

double eval_q(const RffBarrier& bar, const Vec& u, const Vec& y, double t,
              const SystemModel& sys, const MeasurementModel& meas,
              const RobustnessConsts& consts);
double eval_q(const RffBarrier& bar, const Vec& u, const Vec& y, double t,
              const SystemModel& sys, const MeasurementModel& meas,
              const RobustnessConsts& consts, RffScratch& ws);

// Subgradient of q in theta. The norm terms use grad_h/||grad_h|| and the
// zero vector at the kink ||grad_h|| = 0.
Vec grad_q_theta(const RffBarrier& bar, const Vec& u, const Vec& y, double t,
                 const SystemModel& sys, const MeasurementModel& meas,
                 const RobustnessConsts& consts);

// Self-describing flat text file; doubles are written as hex floats so the
// round trip is bit-exact.
void save_barrier(const RffBarrier& bar, const RobustnessConsts& consts,
                  const std::string& path);
std::pair<RffBarrier, RobustnessConsts> load_barrier(const std::string& path);

}  // namespace rocbf
