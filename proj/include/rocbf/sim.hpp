#pragma once
// Track generation, the expert PID, closed-loop rollouts of the true plant
// (global bicycle + identified longitudinal model, with bounded injected
// perturbations), demonstration collection, and the max|c_e| comparison
// metric.

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "rocbf/barrier.hpp"
#include "rocbf/controller.hpp"
#include "rocbf/datasets.hpp"
#include "rocbf/model.hpp"

namespace rocbf {

struct SegmentSpec {
    enum class Kind { straight, arc };
    Kind kind = Kind::straight;
    double length = 0.0;  // straight
    double radius = 0.0;  // arc
    double angle = 0.0;   // arc, radians; positive turns left
};

// "straight:20;arc:50:1.5708" -> segment list.
std::vector<SegmentSpec> parse_segments(const std::string& text);

struct Track {
    std::vector<std::array<double, 2>> waypoints;
    std::vector<double> curvature;  // per waypoint, of its segment
    bool closed = false;
    double spacing = 1.0;
};

Track make_track(const std::vector<SegmentSpec>& segments,
                 double spacing = 1.0);

struct RolloutConfig {
    double dt = 0.02;
    double horizon = 30.0;
    bool rk4 = true;  // false = explicit Euler
    double v0 = 0.0, d0 = 0.0, ce0 = 0.0, theta0 = 0.0;
    std::uint64_t seed = 0;
    // Plant perturbation: fraction of the declared (delta_f, delta_g) bounds.
    double perturb_frac = 0.5;
    double delta_f = 0.1;
    double delta_g = 0.1;
    double safe_ce_bound = 1.0;
    // Smooth exploratory steering added to the expert during collection, so
    // the demonstrations cover a band around the nominal path instead of
    // collapsing onto it. Zero disables it.
    double dither_amp = 0.0;
    // Pulse mode: isolated outward maneuvers instead of interior wandering.
    bool dither_pulse = false;

    static RolloutConfig from_config(const Config& cfg);
};

enum class ControlMode { none, expert, rocbf };

struct ControllerSpec {
    ControlMode mode = ControlMode::expert;
    const RffBarrier* bar = nullptr;  // rocbf mode
    RobustnessConsts consts;
    InputSet uset;
};

struct RolloutStep {
    double t = 0.0;
    Vec x;  // true local state [v, d, c_e, theta_e]
    Vec y;
    Vec u;
    double h = 0.0;  // NaN when no barrier is attached
    double q = 0.0;  // NaN except under rocbf control
    bool feasible = true;
};

struct RolloutTrace {
    std::vector<RolloutStep> steps;
    double max_abs_ce = 0.0;
    double min_h = 0.0;
    int infeasible_steps = 0;
};

struct SimulationDivergedError : std::runtime_error {
    RolloutTrace partial;
    SimulationDivergedError(const std::string& msg, RolloutTrace trace)
        : std::runtime_error(msg), partial(std::move(trace)) {}
};

// u = clamp(-(kp*c_e + ktheta*theta_e + kd*v*sin(theta_e))).
Vec expert_pid(const Vec& x, const VehicleParams& params);

// Integrates the true plant; the controller sees only the measurement y.
// `monitor` lets expert/none rollouts record h along the trajectory.
RolloutTrace rollout(const Track& track, const RolloutConfig& cfg,
                     const ControllerSpec& controller,
                     const VehicleParams& params, const SystemModel& sys,
                     const MeasurementModel& meas,
                     const RffBarrier* monitor = nullptr);

// Expert rollouts from randomized initial conditions; rollouts that leave
// |c_e| <= safe_ce_bound are kept, the rest are rejected whole.
std::vector<DemoRecord> collect_demos(const Track& track,
                                      const RolloutConfig& base,
                                      const VehicleParams& params,
                                      const MeasurementModel& meas,
                                      int n_rollouts, double ic_ce_max,
                                      double ic_theta_max, std::uint64_t seed);

// Longitudinal equilibrium (v*, d*) of the identified model.
std::pair<double, double> longitudinal_equilibrium(const VehicleParams& p);

// Two-cohort collection: `n_cruise` rollouts start at the longitudinal
// equilibrium and explore the lateral band for `horizon_cruise` seconds;
// `n_approach` rollouts start from standstill and cover the approach
// corridor for `horizon_approach` seconds.
std::vector<DemoRecord> collect_demos_cohorts(
    const Track& track, const RolloutConfig& base, const VehicleParams& params,
    const MeasurementModel& meas, int n_cruise, double horizon_cruise,
    int n_excursion, double horizon_excursion, double excursion_amp,
    int n_approach, double horizon_approach, double ic_ce_max,
    double ic_theta_max, std::uint64_t seed);

// max_t |c_e| difference, rocbf minus expert.
double compare_metric(const RolloutTrace& rocbf_trace,
                      const RolloutTrace& expert_trace);

void save_trace(const RolloutTrace& trace, const std::string& path);

}  // namespace rocbf
