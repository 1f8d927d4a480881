#include "rocbf/controller.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "rocbf/errors.hpp"

namespace rocbf {
namespace {

constexpr double kFeasSlack = 1e-9;

double eval_qc(const QCoeffs& qc, const Vec& u) {
    return qc.a + dot(qc.b, u) - qc.kappa * norm2(u);
}

}  // namespace

InputSet InputSet::ball(double r) {
    if (r <= 0.0) throw std::invalid_argument("ball radius must be positive");
    InputSet s;
    s.kind = Kind::ball;
    s.radius = r;
    return s;
}

InputSet InputSet::box(Vec lo, Vec hi) {
    if (lo.size() != hi.size())
        throw std::invalid_argument("box bounds must have matching sizes");
    for (std::size_t i = 0; i < lo.size(); ++i)
        if (!(lo[i] < hi[i]))
            throw std::invalid_argument("box needs lo < hi componentwise");
    InputSet s;
    s.kind = Kind::box;
    s.lo = std::move(lo);
    s.hi = std::move(hi);
    return s;
}

bool InputSet::contains(const Vec& u) const {
    switch (kind) {
        case Kind::unbounded:
            return true;
        case Kind::ball:
            return norm2(u) <= radius * (1.0 + 1e-12);
        case Kind::box:
            for (std::size_t i = 0; i < u.size(); ++i)
                if (u[i] < lo[i] || u[i] > hi[i]) return false;
            return true;
    }
    return false;
}

Vec InputSet::clamp(const Vec& u) const {
    switch (kind) {
        case Kind::unbounded:
            return u;
        case Kind::ball: {
            const double n = norm2(u);
            if (n <= radius) return u;
            Vec out = u;
            for (auto& v : out) v *= radius / n;
            return out;
        }
        case Kind::box: {
            Vec out = u;
            for (std::size_t i = 0; i < out.size(); ++i)
                out[i] = std::min(hi[i], std::max(lo[i], out[i]));
            return out;
        }
    }
    return u;
}

QCoeffs q_coeffs(const RffBarrier& bar, const SystemModel& sys,
                 const MeasurementModel& meas, const RobustnessConsts& consts,
                 const Vec& y, double t) {
    const Vec xh = meas.xhat(y);
    const BTerms bt = compute_b_terms(bar, xh, t, sys);
    const double dx = meas.delta_x(y);
    QCoeffs qc;
    qc.a = bt.b1 - consts.lbar1 * dx;
    qc.b = bt.b2;
    qc.kappa = -bt.b3 + (consts.lbar2 + consts.lbar3) * dx;
    if (!std::isfinite(qc.a) || !std::isfinite(qc.kappa) || !all_finite(qc.b))
        throw NumericalError("non-finite model output in safe_control", 0);
    return qc;
}

SafeControlResult solve_min_norm(const QCoeffs& qc, const InputSet& uset) {
    const std::size_t m = qc.b.size();
    SafeControlResult res;

    if (qc.a >= 0.0) {
        // Interior of the safe set: the expert is not overridden.
        Vec u0(m, 0.0);
        Vec u = uset.clamp(u0);
        res.clamped = u != u0;
        res.u = std::move(u);
        res.q_value = eval_qc(qc, res.u);
        res.feasible = res.q_value >= -kFeasSlack;
        return res;
    }

    const double nb = norm2(qc.b);
    if (nb > qc.kappa) {
        const double tau = -qc.a / (nb - qc.kappa);
        Vec u(m);
        for (std::size_t i = 0; i < m; ++i) u[i] = tau * qc.b[i] / nb;
        if (!uset.contains(u)) {
            res.u = uset.clamp(u);
            res.clamped = true;
        } else {
            res.u = std::move(u);
        }
        res.q_value = eval_qc(qc, res.u);
        res.feasible = res.q_value >= -kFeasSlack;
        return res;
    }

    // ||b|| <= kappa with a < 0: q(u) <= a + (||b||-kappa)||u|| < 0 for all u.
    res.u.assign(m, 0.0);
    res.q_value = qc.a;
    res.feasible = false;
    return res;
}

SafeControlResult grid_min_norm(const QCoeffs& qc, const InputSet& uset,
                                double resolution, std::size_t m) {
    if (m > 2)
        throw std::invalid_argument("grid oracle supports m <= 2 only");
    if (resolution <= 0.0)
        throw std::invalid_argument("resolution must be positive");

    // Span for unbounded sets, wide enough to contain the analytic solution
    // when one exists. In the infeasible regime no finite u works, so the
    // scan range only bounds the search effort.
    const double nb = norm2(qc.b);
    double span = 1.0;
    if (qc.a < 0.0)
        span = nb > qc.kappa ? 2.0 * (-qc.a) / (nb - qc.kappa) + 1.0 : 50.0;

    std::vector<Vec> candidates;
    if (m == 1) {
        double lo = -span, hi = span;
        if (uset.kind == InputSet::Kind::box) {
            lo = uset.lo[0];
            hi = uset.hi[0];
        } else if (uset.kind == InputSet::Kind::ball) {
            lo = -uset.radius;
            hi = uset.radius;
        }
        for (double u = std::ceil(lo / resolution) * resolution; u <= hi;
             u += resolution)
            candidates.push_back({u});
        candidates.push_back({lo});
        candidates.push_back({hi});
    } else {
        Vec lo(2, -span), hi(2, span);
        if (uset.kind == InputSet::Kind::box) {
            lo = uset.lo;
            hi = uset.hi;
        } else if (uset.kind == InputSet::Kind::ball) {
            lo.assign(2, -uset.radius);
            hi.assign(2, uset.radius);
        }
        for (double u0 = lo[0]; u0 <= hi[0]; u0 += resolution)
            for (double u1 = lo[1]; u1 <= hi[1]; u1 += resolution)
                candidates.push_back({u0, u1});
    }

    SafeControlResult res;
    res.u.assign(m, 0.0);
    res.q_value = eval_qc(qc, res.u);
    res.feasible = false;
    double best_norm = std::numeric_limits<double>::infinity();
    for (const auto& u : candidates) {
        if (!uset.contains(u)) continue;
        const double q = eval_qc(qc, u);
        if (q < 0.0) continue;
        const double n = norm2(u);
        if (n < best_norm - 1e-15) {
            best_norm = n;
            res.u = u;
            res.q_value = q;
            res.feasible = true;
        }
    }
    return res;
}

SafeControlResult safe_control(const RffBarrier& bar, const SystemModel& sys,
                               const MeasurementModel& meas,
                               const RobustnessConsts& consts, const Vec& y,
                               double t, const InputSet& uset) {
    return solve_min_norm(q_coeffs(bar, sys, meas, consts, y, t), uset);
}

SafeControlResult grid_oracle(const RffBarrier& bar, const SystemModel& sys,
                              const MeasurementModel& meas,
                              const RobustnessConsts& consts, const Vec& y,
                              double t, const InputSet& uset,
                              double resolution) {
    return grid_min_norm(q_coeffs(bar, sys, meas, consts, y, t), uset,
                         resolution, sys.m);
}

}  // namespace rocbf
