#pragma once
// Min-norm safety filter: min ||u|| subject to q(u, y, t) >= 0. With
// Euclidean norms q(u) = A + <b, u> - kappa*||u|| with kappa >= 0, which has
// a closed-form minimizer; a grid-search oracle cross-checks it at desk
// scale.

#include "rocbf/barrier.hpp"
#include "rocbf/linalg.hpp"
#include "rocbf/model.hpp"

namespace rocbf {

struct InputSet {
    enum class Kind { unbounded, ball, box };
    Kind kind = Kind::unbounded;
    double radius = 0.0;  // ball
    Vec lo, hi;           // box, per coordinate

    static InputSet unbounded() { return {}; }
    static InputSet ball(double r);
    static InputSet box(Vec lo, Vec hi);

    bool contains(const Vec& u) const;
    Vec clamp(const Vec& u) const;
};

struct SafeControlResult {
    Vec u;
    double q_value = 0.0;
    bool feasible = false;
    bool clamped = false;
};

// Coefficients of q(u) = A + <b,u> - kappa*||u|| at a fixed (y, t).
struct QCoeffs {
    double a = 0.0;
    Vec b;
    double kappa = 0.0;  // always >= 0
};

QCoeffs q_coeffs(const RffBarrier& bar, const SystemModel& sys,
                 const MeasurementModel& meas, const RobustnessConsts& consts,
                 const Vec& y, double t);

// Closed form: u = 0 when A >= 0; otherwise u = -A/(||b||-kappa) * b/||b||
// when ||b|| > kappa, else infeasible. Bounded sets clamp and re-check
// (exact for scalar input; a declared heuristic for m > 1 boxes).
SafeControlResult safe_control(const RffBarrier& bar, const SystemModel& sys,
                               const MeasurementModel& meas,
                               const RobustnessConsts& consts, const Vec& y,
                               double t, const InputSet& uset);

// Exhaustive search over a grid, m <= 2 only. Returns the minimum-norm
// feasible grid point.
SafeControlResult grid_oracle(const RffBarrier& bar, const SystemModel& sys,
                              const MeasurementModel& meas,
                              const RobustnessConsts& consts, const Vec& y,
                              double t, const InputSet& uset,
                              double resolution);

// Shared analytic core so controller variants can be tested without models.
SafeControlResult solve_min_norm(const QCoeffs& qc, const InputSet& uset);
SafeControlResult grid_min_norm(const QCoeffs& qc, const InputSet& uset,
                                double resolution, std::size_t m);

}  // namespace rocbf
