#pragma once
// Domain types: uncertainty-bounded system and measurement models, and the
// lane-keeping vehicle models (identified longitudinal dynamics, kinematic
// bicycle, local path-frame model).

#include <array>
#include <functional>

#include "rocbf/config.hpp"
#include "rocbf/linalg.hpp"

namespace rocbf {

// State layout for the lane instance: [v m/s, d (PID integrator), c_e m,
// theta_e rad].
inline constexpr std::size_t kLaneStateDim = 4;

struct VehicleParams {
    double wheelbase = 2.51;
    // vdot = -a1*v - a2*v^2 - a3*d + a4,  ddot = b1*v - b2
    double a1 = 1.095;
    double a2 = 0.007;
    double a3 = 0.152;
    double a4 = 3.74;
    double b1 = 3.6;
    double b2 = 20.0;
    // Expert PID: u = clamp(-(kp*c_e + ktheta*theta_e + kd*v*sin(theta_e)))
    double pid_kp = 0.5;
    double pid_ktheta = 1.2;
    double pid_kd = 0.25;
    double input_clamp = 0.7;

    static VehicleParams from_config(const Config& cfg);
};

// Model tuple (F_hat, G_hat, Delta_F, Delta_G) with dimensions. Evaluation
// maps are pure; instances are immutable after construction.
struct SystemModel {
    std::size_t n = 0;
    std::size_t m = 0;
    std::function<Vec(const Vec&, double)> fhat;
    std::function<Mat(const Vec&, double)> ghat;
    std::function<double(const Vec&, double)> delta_f;
    std::function<double(const Vec&, double)> delta_g;
    // Optional external theta_t-rate channel; when set the model is treated
    // as time-varying.
    std::function<double(double)> exogenous;
    bool time_invariant = true;
};

// Model tuple (X_hat, Delta_X) plus the true forward map Y, which only the
// simulator may evaluate.
struct MeasurementModel {
    std::size_t n = 0;
    std::size_t p = 0;
    std::function<Vec(const Vec&)> xhat;     // R^p -> R^n
    std::function<double(const Vec&)> delta_x;
    std::function<Vec(const Vec&)> y_true;   // R^n -> R^p (simulator only)
    double lip_y_bound = 1.0;
};

// Local lane model: returns [vdot, ddot, v*sin(theta_e), -theta_dot_t].
Vec eval_fhat_lane(const Vec& x, double t, const VehicleParams& params,
                   double theta_dot_t);

// Input column [0, 0, 0, v/L]^T.
Mat eval_ghat_lane(const Vec& x, const VehicleParams& params);

struct PoseDeriv {
    double px_dot, py_dot, theta_dot;
};

// Kinematic bicycle in the global frame; u = tan(steering angle).
PoseDeriv eval_global_bicycle(const std::array<double, 3>& pose, double v,
                              double u, double wheelbase);

// Signed cross-track and heading error of a pose relative to the segment
// wp1 -> wp2. c_e is positive when the car is left of the segment direction;
// theta_e is wrapped to (-pi, pi].
std::pair<double, double> cross_track_error(const std::array<double, 3>& pose,
                                            const std::array<double, 2>& wp1,
                                            const std::array<double, 2>& wp2);

// Lane system with theta_dot_t = v * curvature folded into F_hat; the result
// is time-invariant.
SystemModel make_lane_system(const VehicleParams& params, double delta_f,
                             double delta_g, double curvature);

// Lane system driven by an external theta_dot_t(t) signal (time-varying).
SystemModel make_lane_system_exogenous(const VehicleParams& params,
                                       double delta_f, double delta_g,
                                       std::function<double(double)> theta_dot_t);

// Identity measurement (p = n, Delta_X = 0), the state-feedback baseline.
MeasurementModel make_exact_measurement(std::size_t n);

// Synthetic lane measurement map (p = 6): the state plus redundant re-reads
// of c_e and theta_e, with a deterministic bounded perturbation of magnitude
// <= delta_meas on the c_e reads. X_hat averages the redundant reads, so its
// error stays within delta_meas <= delta_x.
MeasurementModel make_synthetic_measurement(double delta_meas, double delta_x,
                                            double lip_y_bound);

SystemModel system_from_config(const Config& cfg, double curvature);
MeasurementModel measurement_from_config(const Config& cfg);

}  // namespace rocbf
