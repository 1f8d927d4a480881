#include "rocbf/sim.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "rocbf/errors.hpp"
#include "rocbf/rng.hpp"

namespace rocbf {
namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
constexpr double kPi = 3.14159265358979323846;

// Plant state in the global frame: [px, py, theta, v, d].
using Plant = std::array<double, 5>;

// Smooth bounded perturbation signals, fixed per rollout.
struct Perturbation {
    double scale_f = 0.0;  // ||delta_f vector|| bound
    double scale_g = 0.0;
    std::array<double, 4> omega{};
    std::array<double, 4> phase{};
    double omega_g = 0.0, phase_g = 0.0;

    static Perturbation make(const RolloutConfig& cfg, Rng& rng) {
        Perturbation p;
        p.scale_f = cfg.perturb_frac * cfg.delta_f;
        p.scale_g = cfg.perturb_frac * cfg.delta_g;
        const double base[4] = {0.7, 1.1, 1.7, 2.3};
        for (int j = 0; j < 4; ++j) {
            p.omega[j] = base[j] * rng.uniform(0.8, 1.2);
            p.phase[j] = rng.uniform(0.0, 2.0 * kPi);
        }
        p.omega_g = 1.3 * rng.uniform(0.8, 1.2);
        p.phase_g = rng.uniform(0.0, 2.0 * kPi);
        return p;
    }

    // Component j of the additive state-rate perturbation; the raw vector
    // of four unit sinusoids has norm <= 2, hence the /2.
    double df(int j, double t) const {
        return 0.5 * scale_f * std::sin(omega[j] * t + phase[j]);
    }
    double dg(double t) const {
        return scale_g * std::sin(omega_g * t + phase_g);
    }
};

// Exploratory lateral reference. Two modes:
//  - wander: three incommensurate sines fill the interior band in
//    (c_e, theta_e) instead of tracing repeated curves;
//  - pulse: isolated lane-change-and-return maneuvers that sweep the outer
//    annulus briskly, so every sample out there carries fast transverse
//    motion (at the pulse crest c_e stalls but theta_e swings hard).
struct Dither {
    double amp = 0.0;
    bool pulse = false;
    std::array<double, 3> w{}, p{};
    // pulse schedule
    std::array<double, 8> t0{}, width{}, height{};

    static Dither make(double amp, Rng& rng) {
        Dither d;
        d.amp = amp;
        d.w = {rng.uniform(0.25, 0.45), rng.uniform(1.2, 1.8),
               rng.uniform(2.5, 3.5)};
        for (auto& ph : d.p) ph = rng.uniform(0.0, 2.0 * kPi);
        return d;
    }

    static Dither make_pulse(double amp, Rng& rng) {
        Dither d;
        d.amp = amp;
        d.pulse = true;
        double t = rng.uniform(0.2, 1.0);
        for (std::size_t i = 0; i < d.t0.size(); ++i) {
            d.t0[i] = t;
            d.width[i] = rng.uniform(1.6, 2.2);
            const double sign = rng.uniform() < 0.5 ? 1.0 : -1.0;
            d.height[i] = sign * amp * rng.uniform(0.7, 1.0);
            t += d.width[i] + rng.uniform(0.5, 1.5);
        }
        return d;
    }

    double at(double t) const {
        if (!pulse)
            return amp * (0.4 * std::sin(w[0] * t + p[0]) +
                          0.35 * std::sin(w[1] * t + p[1]) +
                          0.25 * std::sin(w[2] * t + p[2]));
        for (std::size_t i = 0; i < t0.size(); ++i) {
            if (t < t0[i]) break;
            if (t <= t0[i] + width[i]) {
                const double s = std::sin(kPi * (t - t0[i]) / width[i]);
                return height[i] * s * s;
            }
        }
        return 0.0;
    }
};

Plant plant_deriv(const Plant& s, double u, double t,
                  const VehicleParams& params, const Perturbation& pert) {
    const double theta = s[2], v = s[3], d = s[4];
    Plant ds{};
    ds[0] = v * std::cos(theta) - pert.df(2, t) * std::sin(theta);
    ds[1] = v * std::sin(theta) + pert.df(2, t) * std::cos(theta);
    ds[2] = (v / params.wheelbase + pert.dg(t)) * u + pert.df(3, t);
    ds[3] = -params.a1 * v - params.a2 * v * v - params.a3 * d + params.a4 +
            pert.df(0, t);
    ds[4] = params.b1 * v - params.b2 + pert.df(1, t);
    return ds;
}

Plant axpy_plant(const Plant& a, double h, const Plant& b) {
    Plant out;
    for (int i = 0; i < 5; ++i) out[i] = a[i] + h * b[i];
    return out;
}

void step_plant(Plant& s, double u, double t, double dt,
                const VehicleParams& params, const Perturbation& pert,
                bool rk4) {
    if (!rk4) {
        const Plant k1 = plant_deriv(s, u, t, params, pert);
        s = axpy_plant(s, dt, k1);
        return;
    }
    const Plant k1 = plant_deriv(s, u, t, params, pert);
    const Plant k2 =
        plant_deriv(axpy_plant(s, 0.5 * dt, k1), u, t + 0.5 * dt, params, pert);
    const Plant k3 =
        plant_deriv(axpy_plant(s, 0.5 * dt, k2), u, t + 0.5 * dt, params, pert);
    const Plant k4 = plant_deriv(axpy_plant(s, dt, k3), u, t + dt, params, pert);
    for (int i = 0; i < 5; ++i)
        s[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

// Nearest waypoint and its successor (paper convention: wp1 closest, wp2
// the one proceeding it).
std::pair<std::size_t, std::size_t> nearest_segment(const Track& track,
                                                    double px, double py) {
    std::size_t best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < track.waypoints.size(); ++i) {
        const double dx = track.waypoints[i][0] - px;
        const double dy = track.waypoints[i][1] - py;
        const double d2 = dx * dx + dy * dy;
        if (d2 < best_d2) {
            best_d2 = d2;
            best = i;
        }
    }
    std::size_t next = best + 1;
    if (next >= track.waypoints.size()) {
        if (track.closed)
            next = 0;
        else {
            next = best;
            best = best - 1;  // open track: keep using the last segment
        }
    }
    return {best, next};
}

}  // namespace

std::vector<SegmentSpec> parse_segments(const std::string& text) {
    std::vector<SegmentSpec> segs;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ';')) {
        if (item.empty()) continue;
        std::stringstream fields(item);
        std::string kind;
        std::getline(fields, kind, ':');
        SegmentSpec seg;
        if (kind == "straight") {
            seg.kind = SegmentSpec::Kind::straight;
            if (!(fields >> seg.length))
                throw ConfigError("segment 'straight' needs a length: " + item);
        } else if (kind == "arc") {
            seg.kind = SegmentSpec::Kind::arc;
            char colon = 0;
            if (!(fields >> seg.radius >> colon >> seg.angle) || colon != ':')
                throw ConfigError("segment 'arc' needs radius:angle: " + item);
        } else {
            throw ConfigError("unknown segment kind: " + kind);
        }
        segs.push_back(seg);
    }
    if (segs.empty()) throw ConfigError("track has no segments");
    return segs;
}

Track make_track(const std::vector<SegmentSpec>& segments, double spacing) {
    if (spacing <= 0.0) throw std::invalid_argument("spacing must be positive");
    Track track;
    track.spacing = spacing;
    double px = 0.0, py = 0.0, heading = 0.0;
    track.waypoints.push_back({px, py});
    track.curvature.push_back(
        segments[0].kind == SegmentSpec::Kind::arc
            ? (segments[0].angle >= 0 ? 1.0 : -1.0) / segments[0].radius
            : 0.0);

    for (const auto& seg : segments) {
        double length = 0.0, kappa = 0.0;
        if (seg.kind == SegmentSpec::Kind::straight) {
            if (seg.length <= 0.0)
                throw std::invalid_argument("straight length must be positive");
            length = seg.length;
        } else {
            if (seg.radius <= 0.0 || seg.angle == 0.0)
                throw std::invalid_argument("arc needs positive radius and nonzero angle");
            length = seg.radius * std::fabs(seg.angle);
            kappa = (seg.angle >= 0 ? 1.0 : -1.0) / seg.radius;
        }
        const auto steps = static_cast<std::size_t>(std::ceil(length / spacing - 1e-9));
        for (std::size_t k = 1; k <= steps; ++k) {
            const double s = std::min(length, static_cast<double>(k) * spacing);
            double nx, ny, nh;
            if (kappa == 0.0) {
                nx = px + s * std::cos(heading);
                ny = py + s * std::sin(heading);
                nh = heading;
            } else {
                const double dth = kappa * s;
                // Rotation about the segment's turning center.
                nx = px + (std::sin(heading + dth) - std::sin(heading)) / kappa;
                ny = py - (std::cos(heading + dth) - std::cos(heading)) / kappa;
                nh = heading + dth;
            }
            track.waypoints.push_back({nx, ny});
            track.curvature.push_back(kappa);
        }
        // Advance the frame to the exact segment end.
        if (kappa == 0.0) {
            px += length * std::cos(heading);
            py += length * std::sin(heading);
        } else {
            const double dth = kappa * length;
            const double nx = px + (std::sin(heading + dth) - std::sin(heading)) / kappa;
            const double ny = py - (std::cos(heading + dth) - std::cos(heading)) / kappa;
            px = nx;
            py = ny;
            heading += dth;
        }
    }

    // Closed when the end returns to the start.
    const auto& first = track.waypoints.front();
    const auto& last = track.waypoints.back();
    if (std::hypot(last[0] - first[0], last[1] - first[1]) < 1e-6 &&
        track.waypoints.size() > 2) {
        track.closed = true;
        track.waypoints.pop_back();
        track.curvature.pop_back();
    }
    return track;
}

RolloutConfig RolloutConfig::from_config(const Config& cfg) {
    RolloutConfig r;
    r.dt = cfg.get_double("rollout.dt");
    r.horizon = cfg.get_double("rollout.horizon");
    const std::string integ = cfg.get_string("rollout.integrator");
    if (integ == "rk4")
        r.rk4 = true;
    else if (integ == "euler")
        r.rk4 = false;
    else
        throw ConfigError("rollout.integrator must be 'rk4' or 'euler'");
    r.seed = static_cast<std::uint64_t>(cfg.get_int("rollout.seed"));
    r.perturb_frac = cfg.get_double("rollout.perturb_frac");
    r.delta_f = cfg.get_double("system.delta_f");
    r.delta_g = cfg.get_double("system.delta_g");
    r.safe_ce_bound = cfg.get_double("collect.safe_ce_bound");
    r.dither_amp = 0.0;  // only collection dithers, via collect.dither_amp
    if (r.dt <= 0.0 || r.horizon < r.dt)
        throw ConfigError("rollout.dt must be positive and horizon >= dt");
    return r;
}

Vec expert_pid(const Vec& x, const VehicleParams& params) {
    if (x.size() != kLaneStateDim)
        throw std::invalid_argument("expert_pid expects the lane state layout");
    const double v = x[0], ce = x[2], th = x[3];
    double u = -(params.pid_kp * ce + params.pid_ktheta * th +
                 params.pid_kd * v * std::sin(th));
    u = std::min(params.input_clamp, std::max(-params.input_clamp, u));
    return {u};
}

RolloutTrace rollout(const Track& track, const RolloutConfig& cfg,
                     const ControllerSpec& controller,
                     const VehicleParams& params, const SystemModel& sys,
                     const MeasurementModel& meas, const RffBarrier* monitor) {
    if (track.waypoints.size() < 2)
        throw std::invalid_argument("track needs at least two waypoints");
    const RffBarrier* hbar =
        controller.mode == ControlMode::rocbf ? controller.bar : monitor;

    Rng rng(cfg.seed);
    const Perturbation pert = Perturbation::make(cfg, rng);
    const Dither dither = cfg.dither_pulse
                              ? Dither::make_pulse(cfg.dither_amp, rng)
                              : Dither::make(cfg.dither_amp, rng);

    // Place the car relative to the first segment.
    const auto& wp0 = track.waypoints[0];
    const auto& wp1 = track.waypoints[1];
    const double theta_t0 = std::atan2(wp1[1] - wp0[1], wp1[0] - wp0[0]);
    Plant s{wp0[0] - cfg.ce0 * std::sin(theta_t0),
            wp0[1] + cfg.ce0 * std::cos(theta_t0),
            wrap_angle(theta_t0 + cfg.theta0), cfg.v0, cfg.d0};

    RolloutTrace trace;
    trace.min_h = std::numeric_limits<double>::infinity();
    const auto nsteps = static_cast<std::size_t>(std::llround(cfg.horizon / cfg.dt));
    trace.steps.reserve(nsteps);

    Vec last_feasible_u;
    double t = 0.0;
    for (std::size_t k = 0; k < nsteps; ++k) {
        const auto [i1, i2] = nearest_segment(track, s[0], s[1]);
        const auto [ce, th_e] = cross_track_error(
            {s[0], s[1], s[2]}, track.waypoints[i1], track.waypoints[i2]);
        const Vec x_local{s[3], s[4], ce, th_e};
        if (!all_finite(x_local))
            throw SimulationDivergedError("non-finite state at t=" +
                                          std::to_string(t), std::move(trace));

        const Vec y = meas.y_true(x_local);

        RolloutStep step;
        step.t = t;
        step.x = x_local;
        step.y = y;
        step.h = hbar ? eval_h(*hbar, x_local) : kNan;
        step.q = kNan;
        step.feasible = true;

        switch (controller.mode) {
            case ControlMode::none:
                step.u = Vec(sys.m, 0.0);
                break;
            case ControlMode::expert: {
                // Exploration shifts the expert's lateral reference. The
                // gate collapses the reference as the car nears the band
                // edge, so edge visits are brief and always carry a decisive
                // inward correction; demonstrations that drift at the edge
                // certify nothing.
                Vec x_ref = x_local;
                if (cfg.dither_amp != 0.0) {
                    double gate = 1.0;
                    if (!cfg.dither_pulse) {
                        const double r = ce / 0.55;
                        gate = 1.0 / (1.0 + r * r * r * r * r * r);
                    }
                    x_ref[2] -= dither.at(t) * gate;
                }
                step.u = expert_pid(x_ref, params);
                break;
            }
            case ControlMode::rocbf: {
                const SafeControlResult res =
                    safe_control(*controller.bar, sys, meas, controller.consts,
                                 y, t, controller.uset);
                step.q = res.q_value;
                step.feasible = res.feasible;
                if (res.feasible) {
                    step.u = res.u;
                    last_feasible_u = res.u;
                } else {
                    // Fallback: hold the last feasible input; before any
                    // exists, defer to the expert's best effort.
                    step.u = last_feasible_u.empty()
                                 ? expert_pid(x_local, params)
                                 : last_feasible_u;
                    ++trace.infeasible_steps;
                }
                break;
            }
        }

        trace.max_abs_ce = std::max(trace.max_abs_ce, std::fabs(ce));
        if (hbar) trace.min_h = std::min(trace.min_h, step.h);
        const double u_scalar = step.u.empty() ? 0.0 : step.u[0];
        trace.steps.push_back(std::move(step));

        step_plant(s, u_scalar, t, cfg.dt, params, pert, cfg.rk4);
        t += cfg.dt;
        bool ok = true;
        for (const double v : s) ok = ok && std::isfinite(v) && std::fabs(v) < 1e8;
        if (!ok)
            throw SimulationDivergedError("plant state diverged at t=" +
                                          std::to_string(t), std::move(trace));
    }
    if (!hbar) trace.min_h = kNan;
    return trace;
}

namespace {

// Runs one expert rollout and appends its records unless it left the safe
// band. Returns whether the rollout was accepted.
bool collect_one(const Track& track, const RolloutConfig& cfg,
                 const VehicleParams& params, const SystemModel& sys,
                 const MeasurementModel& meas,
                 std::vector<DemoRecord>& demos) {
    ControllerSpec expert;
    expert.mode = ControlMode::expert;
    RolloutTrace trace;
    try {
        trace = rollout(track, cfg, expert, params, sys, meas);
    } catch (const SimulationDivergedError&) {
        return false;
    }
    if (trace.max_abs_ce > cfg.safe_ce_bound) return false;
    for (const auto& step : trace.steps)
        demos.push_back({step.t, step.u, step.y});
    return true;
}

}  // namespace

std::vector<DemoRecord> collect_demos(const Track& track,
                                      const RolloutConfig& base,
                                      const VehicleParams& params,
                                      const MeasurementModel& meas,
                                      int n_rollouts, double ic_ce_max,
                                      double ic_theta_max,
                                      std::uint64_t seed) {
    if (n_rollouts <= 0) throw std::invalid_argument("n_rollouts must be > 0");
    // Collection does not evaluate any barrier; the system model only
    // matters to the safety controller, so a placeholder suffices.
    const SystemModel sys = make_lane_system(params, 0.0, 0.0, 0.0);

    Rng root(seed);
    std::vector<DemoRecord> demos;
    int accepted = 0;
    for (int r = 0; r < n_rollouts; ++r) {
        Rng rng = root.fork(static_cast<std::uint64_t>(r));
        RolloutConfig cfg = base;
        cfg.ce0 = rng.uniform(-ic_ce_max, ic_ce_max);
        cfg.theta0 = rng.uniform(-ic_theta_max, ic_theta_max);
        cfg.seed = rng.next_u64();
        if (collect_one(track, cfg, params, sys, meas, demos)) ++accepted;
    }
    if (accepted == 0)
        throw DataError("demonstration collection failed: every rollout left "
                        "the safe band");
    return demos;
}

std::pair<double, double> longitudinal_equilibrium(const VehicleParams& p) {
    const double v = p.b2 / p.b1;
    const double d = (-p.a1 * v - p.a2 * v * v + p.a4) / p.a3;
    return {v, d};
}

std::vector<DemoRecord> collect_demos_cohorts(
    const Track& track, const RolloutConfig& base, const VehicleParams& params,
    const MeasurementModel& meas, int n_cruise, double horizon_cruise,
    int n_excursion, double horizon_excursion, double excursion_amp,
    int n_approach, double horizon_approach, double ic_ce_max,
    double ic_theta_max, std::uint64_t seed) {
    if (n_cruise < 0 || n_approach < 0 || n_excursion < 0 ||
        n_cruise + n_approach + n_excursion == 0)
        throw std::invalid_argument("cohort sizes must be nonnegative");
    const SystemModel sys = make_lane_system(params, 0.0, 0.0, 0.0);
    const auto [v_eq, d_eq] = longitudinal_equilibrium(params);

    Rng root(seed);
    std::vector<DemoRecord> demos;
    int accepted = 0;
    for (int r = 0; r < n_cruise; ++r) {
        Rng rng = root.fork(static_cast<std::uint64_t>(r));
        RolloutConfig cfg = base;
        cfg.horizon = horizon_cruise;
        cfg.v0 = v_eq;
        cfg.d0 = d_eq;
        // Start spread across the evaluation envelope.
        cfg.ce0 = rng.uniform(-ic_ce_max, ic_ce_max);
        cfg.theta0 = rng.uniform(-ic_theta_max, ic_theta_max);
        cfg.seed = rng.next_u64();
        if (collect_one(track, cfg, params, sys, meas, demos)) ++accepted;
    }
    for (int r = 0; r < n_excursion; ++r) {
        Rng rng = root.fork(2000000u + static_cast<std::uint64_t>(r));
        RolloutConfig cfg = base;
        cfg.horizon = horizon_excursion;
        cfg.v0 = v_eq;
        cfg.d0 = d_eq;
        cfg.dither_pulse = true;
        cfg.dither_amp = excursion_amp;
        cfg.ce0 = rng.uniform(-0.3, 0.3);
        cfg.theta0 = rng.uniform(-0.1, 0.1);
        cfg.seed = rng.next_u64();
        if (collect_one(track, cfg, params, sys, meas, demos)) ++accepted;
    }
    for (int r = 0; r < n_approach; ++r) {
        Rng rng = root.fork(1000000u + static_cast<std::uint64_t>(r));
        RolloutConfig cfg = base;
        cfg.horizon = horizon_approach;
        cfg.ce0 = rng.uniform(-ic_ce_max, ic_ce_max);
        cfg.theta0 = rng.uniform(-ic_theta_max, ic_theta_max);
        cfg.seed = rng.next_u64();
        if (collect_one(track, cfg, params, sys, meas, demos)) ++accepted;
    }
    if (accepted == 0)
        throw DataError("demonstration collection failed: every rollout left "
                        "the safe band");
    return demos;
}

double compare_metric(const RolloutTrace& rocbf_trace,
                      const RolloutTrace& expert_trace) {
    return rocbf_trace.max_abs_ce - expert_trace.max_abs_ce;
}

void save_trace(const RolloutTrace& trace, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw DataError("cannot write trace file: " + path);
    const std::size_t p = trace.steps.empty() ? 0 : trace.steps[0].y.size();
    const std::size_t m = trace.steps.empty() ? 0 : trace.steps[0].u.size();
    std::fprintf(f, "# t v d ce theta_e");
    for (std::size_t i = 0; i < p; ++i) std::fprintf(f, " y%zu", i);
    for (std::size_t i = 0; i < m; ++i) std::fprintf(f, " u%zu", i);
    std::fprintf(f, " h q feasible\n");
    std::fprintf(f, "# summary max_abs_ce %.17g min_h %.17g infeasible %d\n",
                 trace.max_abs_ce, trace.min_h, trace.infeasible_steps);
    for (const auto& s : trace.steps) {
        std::fprintf(f, "%.17g", s.t);
        for (const double v : s.x) std::fprintf(f, " %.17g", v);
        for (const double v : s.y) std::fprintf(f, " %.17g", v);
        for (const double v : s.u) std::fprintf(f, " %.17g", v);
        std::fprintf(f, " %.17g %.17g %d\n", s.h, s.q, s.feasible ? 1 : 0);
    }
    std::fclose(f);
}

}  // namespace rocbf
