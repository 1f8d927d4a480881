#include "rocbf/model.hpp"

#include <cmath>
#include <stdexcept>

#include "rocbf/errors.hpp"

namespace rocbf {
namespace {

void require_lane_state(const Vec& x) {
    if (x.size() != kLaneStateDim)
        throw std::invalid_argument("lane state must have 4 entries");
}

}  // namespace

VehicleParams VehicleParams::from_config(const Config& cfg) {
    VehicleParams p;
    p.wheelbase = cfg.get_double("vehicle.wheelbase");
    p.a1 = cfg.get_double("vehicle.a1");
    p.a2 = cfg.get_double("vehicle.a2");
    p.a3 = cfg.get_double("vehicle.a3");
    p.a4 = cfg.get_double("vehicle.a4");
    p.b1 = cfg.get_double("vehicle.b1");
    p.b2 = cfg.get_double("vehicle.b2");
    p.pid_kp = cfg.get_double("vehicle.pid_kp");
    p.pid_ktheta = cfg.get_double("vehicle.pid_ktheta");
    p.pid_kd = cfg.get_double("vehicle.pid_kd");
    p.input_clamp = cfg.get_double("vehicle.input_clamp");
    if (p.wheelbase <= 0.0)
        throw std::invalid_argument("wheelbase must be positive");
    return p;
}

Vec eval_fhat_lane(const Vec& x, double /*t*/, const VehicleParams& params,
                   double theta_dot_t) {
    require_lane_state(x);
    const double v = x[0], d = x[1], theta_e = x[3];
    return {
        -params.a1 * v - params.a2 * v * v - params.a3 * d + params.a4,
        params.b1 * v - params.b2,
        v * std::sin(theta_e),
        -theta_dot_t,
    };
}

Mat eval_ghat_lane(const Vec& x, const VehicleParams& params) {
    require_lane_state(x);
    Mat g(kLaneStateDim, 1);
    g.at(3, 0) = x[0] / params.wheelbase;
    return g;
}

PoseDeriv eval_global_bicycle(const std::array<double, 3>& pose, double v,
                              double u, double wheelbase) {
    if (wheelbase <= 0.0)
        throw std::invalid_argument("wheelbase must be positive");
    const double theta = pose[2];
    return {v * std::cos(theta), v * std::sin(theta), v * u / wheelbase};
}

std::pair<double, double> cross_track_error(const std::array<double, 3>& pose,
                                            const std::array<double, 2>& wp1,
                                            const std::array<double, 2>& wp2) {
    const double sx = wp2[0] - wp1[0];
    const double sy = wp2[1] - wp1[1];
    const double seg_len = std::hypot(sx, sy);
    if (seg_len == 0.0)
        throw std::invalid_argument("cross_track_error: coincident waypoints");
    const double wx = pose[0] - wp1[0];
    const double wy = pose[1] - wp1[1];
    // ||w|| sin(theta_w), signed by the 2D cross product of the unit segment
    // direction with w: positive when the car is left of the direction.
    const double c_e = (sx * wy - sy * wx) / seg_len;
    const double theta_t = std::atan2(sy, sx);
    const double theta_e = wrap_angle(pose[2] - theta_t);
    return {c_e, theta_e};
}

SystemModel make_lane_system(const VehicleParams& params, double delta_f,
                             double delta_g, double curvature) {
    if (delta_f < 0.0 || delta_g < 0.0)
        throw std::invalid_argument("error bounds must be nonnegative");
    SystemModel sys;
    sys.n = kLaneStateDim;
    sys.m = 1;
    sys.fhat = [params, curvature](const Vec& x, double t) {
        require_lane_state(x);
        return eval_fhat_lane(x, t, params, x[0] * curvature);
    };
    sys.ghat = [params](const Vec& x, double) {
        return eval_ghat_lane(x, params);
    };
    sys.delta_f = [delta_f](const Vec&, double) { return delta_f; };
    sys.delta_g = [delta_g](const Vec&, double) { return delta_g; };
    sys.time_invariant = true;
    return sys;
}

SystemModel make_lane_system_exogenous(
    const VehicleParams& params, double delta_f, double delta_g,
    std::function<double(double)> theta_dot_t) {
    SystemModel sys = make_lane_system(params, delta_f, delta_g, 0.0);
    sys.exogenous = theta_dot_t;
    sys.fhat = [params, theta_dot_t](const Vec& x, double t) {
        return eval_fhat_lane(x, t, params, theta_dot_t(t));
    };
    sys.time_invariant = false;
    return sys;
}

MeasurementModel make_exact_measurement(std::size_t n) {
    MeasurementModel m;
    m.n = n;
    m.p = n;
    m.xhat = [n](const Vec& y) {
        if (y.size() != n)
            throw std::invalid_argument("measurement dimension mismatch");
        return y;
    };
    m.delta_x = [](const Vec&) { return 0.0; };
    m.y_true = [n](const Vec& x) {
        if (x.size() != n)
            throw std::invalid_argument("state dimension mismatch");
        return x;
    };
    m.lip_y_bound = 1.0;
    return m;
}

MeasurementModel make_synthetic_measurement(double delta_meas, double delta_x,
                                            double lip_y_bound) {
    if (delta_x < 0.0 || delta_meas < 0.0)
        throw std::invalid_argument("error bounds must be nonnegative");
    if (delta_meas > delta_x)
        throw std::invalid_argument(
            "delta_meas must not exceed delta_x, otherwise the estimator "
            "error bound fails");
    MeasurementModel m;
    m.n = kLaneStateDim;
    m.p = 6;
    m.y_true = [delta_meas](const Vec& x) {
        require_lane_state(x);
        // Deterministic bounded perturbations on the two c_e reads.
        const double s1 =
            std::sin(0.9 * x[0] + 0.5 * x[1] + 1.7 * x[2] + 1.3 * x[3]);
        const double s2 =
            std::cos(1.1 * x[0] - 0.4 * x[1] - 0.8 * x[2] + 2.3 * x[3]);
        return Vec{x[0],
                   x[1],
                   x[2] + delta_meas * s1,
                   x[3],
                   x[2] + delta_meas * s2,
                   x[3]};
    };
    m.xhat = [](const Vec& y) {
        if (y.size() != 6)
            throw std::invalid_argument("measurement dimension mismatch");
        return Vec{y[0], y[1], 0.5 * (y[2] + y[4]), 0.5 * (y[3] + y[5])};
    };
    m.delta_x = [delta_x](const Vec&) { return delta_x; };
    m.lip_y_bound = lip_y_bound;
    return m;
}

SystemModel system_from_config(const Config& cfg, double curvature) {
    return make_lane_system(VehicleParams::from_config(cfg),
                            cfg.get_double("system.delta_f"),
                            cfg.get_double("system.delta_g"), curvature);
}

MeasurementModel measurement_from_config(const Config& cfg) {
    const std::string mode = cfg.get_string("measurement.mode");
    if (mode == "exact") return make_exact_measurement(kLaneStateDim);
    if (mode == "synthetic")
        return make_synthetic_measurement(
            cfg.get_double("measurement.delta_meas"),
            cfg.get_double("measurement.delta_x"),
            cfg.get_double("measurement.lip_y_bound"));
    throw ConfigError("measurement.mode must be 'exact' or 'synthetic'");
}

}  // namespace rocbf
