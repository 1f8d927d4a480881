#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "rocbf/errors.hpp"
#include "rocbf/sim.hpp"

using namespace rocbf;

namespace {
const double kPi = 3.14159265358979323846;

SegmentSpec straight(double len) {
    SegmentSpec s;
    s.kind = SegmentSpec::Kind::straight;
    s.length = len;
    return s;
}

SegmentSpec arc(double radius, double angle) {
    SegmentSpec s;
    s.kind = SegmentSpec::Kind::arc;
    s.radius = radius;
    s.angle = angle;
    return s;
}

// Minimal RK4 on the local lane model, for the cross-model sanity check.
Vec integrate_local(const VehicleParams& p, Vec x, double u, double dt,
                    int steps) {
    const auto deriv = [&](const Vec& s) {
        Vec d = eval_fhat_lane(s, 0.0, p, 0.0);
        d[3] += s[0] / p.wheelbase * u;
        return d;
    };
    for (int k = 0; k < steps; ++k) {
        const Vec k1 = deriv(x);
        Vec x2(4), x3(4), x4(4);
        for (int i = 0; i < 4; ++i) x2[i] = x[i] + 0.5 * dt * k1[i];
        const Vec k2 = deriv(x2);
        for (int i = 0; i < 4; ++i) x3[i] = x[i] + 0.5 * dt * k2[i];
        const Vec k3 = deriv(x3);
        for (int i = 0; i < 4; ++i) x4[i] = x[i] + dt * k3[i];
        const Vec k4 = deriv(x4);
        for (int i = 0; i < 4; ++i)
            x[i] += dt / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    }
    return x;
}

}  // namespace

TEST_CASE("track construction") {
    SUBCASE("straight segment waypoint count") {
        const Track t = make_track({straight(10.0)}, 1.0);
        CHECK(t.waypoints.size() == 11);
        for (const auto& wp : t.waypoints)
            CHECK(wp[1] == doctest::Approx(0.0).epsilon(1e-15));
        CHECK_FALSE(t.closed);
        for (const double k : t.curvature) CHECK(k == 0.0);
    }
    SUBCASE("quarter arc endpoint") {
        const Track t = make_track({arc(10.0, kPi / 2)}, 0.5);
        const auto& last = t.waypoints.back();
        const double d = std::hypot(last[0], last[1]);
        CHECK(d == doctest::Approx(10.0 * std::sqrt(2.0)).epsilon(1e-9));
        CHECK(t.curvature.back() == doctest::Approx(0.1));
    }
    SUBCASE("full circle closes") {
        const Track t = make_track({arc(50.0, 2 * kPi)}, 1.0);
        CHECK(t.closed);
        // All waypoints on a radius-50 circle centered at (0, 50).
        for (const auto& wp : t.waypoints) {
            const double r = std::hypot(wp[0], wp[1] - 50.0);
            CHECK(r == doctest::Approx(50.0).epsilon(1e-9));
        }
    }
    SUBCASE("right turns carry negative curvature") {
        const Track t = make_track({arc(20.0, -kPi / 2)}, 1.0);
        CHECK(t.curvature.back() == doctest::Approx(-0.05));
    }
    SUBCASE("invalid geometry") {
        CHECK_THROWS_AS(make_track({straight(-1.0)}), std::invalid_argument);
        CHECK_THROWS_AS(make_track({arc(0.0, 1.0)}), std::invalid_argument);
        CHECK_THROWS_AS(make_track({straight(5.0)}, 0.0),
                        std::invalid_argument);
    }
    SUBCASE("segment string parsing") {
        const auto segs = parse_segments("straight:20;arc:50:1.5708");
        REQUIRE(segs.size() == 2);
        CHECK(segs[0].kind == SegmentSpec::Kind::straight);
        CHECK(segs[0].length == 20.0);
        CHECK(segs[1].radius == 50.0);
        CHECK_THROWS_AS(parse_segments("zigzag:3"), ConfigError);
        CHECK_THROWS_AS(parse_segments(""), ConfigError);
    }
}

TEST_CASE("expert PID") {
    VehicleParams p;
    SUBCASE("on-path state is left alone") {
        CHECK(expert_pid({3.0, -5.0, 0.0, 0.0}, p)[0] == 0.0);
    }
    SUBCASE("positive offset steers negative") {
        CHECK(expert_pid({3.0, 0.0, 0.4, 0.0}, p)[0] < 0.0);
    }
    SUBCASE("scalar oracle with explicit gains") {
        VehicleParams q = p;
        q.pid_kp = 1.0;
        q.pid_ktheta = 2.0;
        q.pid_kd = 0.5;
        q.input_clamp = 0.7;
        const double expect =
            -(1.0 * 0.3 + 2.0 * 0.05 + 0.5 * 5.0 * std::sin(0.05));
        CHECK(expert_pid({5.0, 0.0, 0.3, 0.05}, q)[0] ==
              doctest::Approx(expect).epsilon(1e-14));
    }
    SUBCASE("clamp binds") {
        VehicleParams q = p;
        q.pid_kp = 100.0;
        CHECK(expert_pid({3.0, 0.0, 1.0, 0.0}, q)[0] == -q.input_clamp);
    }
}

TEST_CASE("rollouts") {
    VehicleParams params;
    const SystemModel sys = make_lane_system(params, 0.1, 0.1, 0.0);
    const MeasurementModel meas = make_exact_measurement(4);
    const Track track = make_track({straight(250.0)}, 1.0);

    SUBCASE("expert regulation from an on-path start") {
        RolloutConfig cfg;
        cfg.dt = 0.02;
        cfg.horizon = 30.0;
        cfg.perturb_frac = 0.0;  // zero dynamics mismatch
        ControllerSpec expert;
        expert.mode = ControlMode::expert;
        const RolloutTrace tr =
            rollout(track, cfg, expert, params, sys, meas);
        CHECK(tr.steps.size() == 1500);
        CHECK(tr.max_abs_ce <= 1e-3);
    }
    SUBCASE("local model matches the global projection under zero input") {
        RolloutConfig cfg;
        cfg.dt = 0.005;
        cfg.horizon = 5.0;
        cfg.perturb_frac = 0.0;
        cfg.theta0 = 0.1;
        cfg.ce0 = -0.2;
        ControllerSpec none;
        none.mode = ControlMode::none;
        const RolloutTrace tr = rollout(track, cfg, none, params, sys, meas);
        const Vec x_local = integrate_local(
            params, {0.0, 0.0, -0.2, 0.1}, 0.0, cfg.dt, 1000);
        const Vec& x_sim = tr.steps.back().x;
        // One dt of skew: the trace records the state at step start.
        for (int d = 0; d < 4; ++d)
            CHECK(std::fabs(x_sim[d] -
                            integrate_local(params, {0.0, 0.0, -0.2, 0.1}, 0.0,
                                            cfg.dt, 999)[d]) <= 1e-3);
        CHECK(std::fabs(tr.steps.back().x[2] - x_local[2]) <= 0.1);
    }
    SUBCASE("RK4 order under dt refinement") {
        // Open loop: with a sampled controller the closed loop is only
        // first-order accurate in dt, so the integrator order is measured
        // with u = 0 (the ODE is then independent of the step size).
        ControllerSpec none;
        none.mode = ControlMode::none;
        const auto run_final_ce = [&](double dt) {
            RolloutConfig cfg;
            cfg.dt = dt;
            cfg.horizon = 4.0;
            cfg.perturb_frac = 0.5;  // smooth in t, keeps the RHS nontrivial
            cfg.seed = 21;
            cfg.ce0 = 0.4;
            cfg.theta0 = 0.1;
            const RolloutTrace tr =
                rollout(track, cfg, none, params, sys, meas);
            // Same wall-clock time on every grid.
            const auto k = static_cast<std::size_t>(std::llround(3.0 / dt));
            return tr.steps.at(k).x[2];
        };
        const double c1 = run_final_ce(0.04);
        const double c2 = run_final_ce(0.02);
        const double c3 = run_final_ce(0.01);
        const double e1 = std::fabs(c1 - c3);
        const double e2 = std::fabs(c2 - c3);
        // Richardson: for a 4th-order method e1/e2 ~ (256-1)/(16-1) ~ 17.
        if (e2 > 1e-13) CHECK(e1 / e2 > 6.0);
    }
    SUBCASE("identical seeds produce bit-identical traces") {
        RolloutConfig cfg;
        cfg.dt = 0.02;
        cfg.horizon = 5.0;
        cfg.perturb_frac = 0.5;
        cfg.seed = 99;
        cfg.ce0 = 0.3;
        ControllerSpec expert;
        expert.mode = ControlMode::expert;
        const RolloutTrace a = rollout(track, cfg, expert, params, sys, meas);
        const RolloutTrace b = rollout(track, cfg, expert, params, sys, meas);
        REQUIRE(a.steps.size() == b.steps.size());
        for (std::size_t i = 0; i < a.steps.size(); ++i) {
            CHECK(a.steps[i].x == b.steps[i].x);
            CHECK(a.steps[i].u == b.steps[i].u);
        }
    }
    SUBCASE("perturbed plant stays within the declared band") {
        // The injected rates are bounded by perturb_frac * delta; a crude
        // check: with the expert active the car still tracks.
        RolloutConfig cfg;
        cfg.dt = 0.02;
        cfg.horizon = 20.0;
        cfg.perturb_frac = 0.5;
        cfg.seed = 5;
        ControllerSpec expert;
        expert.mode = ControlMode::expert;
        const RolloutTrace tr = rollout(track, cfg, expert, params, sys, meas);
        CHECK(tr.max_abs_ce <= 0.5);
    }
    SUBCASE("divergence raises with a partial trace") {
        VehicleParams bad = params;
        bad.a1 = -10.0;  // anti-damped longitudinal dynamics
        RolloutConfig cfg;
        cfg.dt = 0.02;
        cfg.horizon = 30.0;
        cfg.perturb_frac = 0.0;
        ControllerSpec none;
        none.mode = ControlMode::none;
        CHECK_THROWS_AS(rollout(track, cfg, none, bad, sys, meas),
                        SimulationDivergedError);
        try {
            rollout(track, cfg, none, bad, sys, meas);
        } catch (const SimulationDivergedError& e) {
            CHECK(!e.partial.steps.empty());
        }
    }
}

TEST_CASE("demo collection") {
    VehicleParams params;
    const MeasurementModel meas = make_synthetic_measurement(0.1, 0.1, 2.7);
    const Track track = make_track({arc(50.0, 2 * kPi)}, 1.0);
    RolloutConfig base;
    base.dt = 0.02;
    base.horizon = 2.0;
    base.perturb_frac = 0.5;
    base.safe_ce_bound = 1.0;

    SUBCASE("record counting") {
        const auto demos = collect_demos(track, base, params, meas, 3, 0.5,
                                         0.2, 11);
        CHECK(demos.size() == 3 * 100);
    }
    SUBCASE("records satisfy the measurement error bound") {
        const auto demos =
            collect_demos(track, base, params, meas, 2, 0.5, 0.2, 12);
        // X_hat(y) stays within Delta_X of the true state by construction;
        // spot-check through the stored outputs.
        for (const auto& rec : demos) {
            const Vec xh = meas.xhat(rec.y);
            CHECK(xh.size() == 4);
            CHECK(std::fabs(xh[2] - 0.5 * (rec.y[2] + rec.y[4])) <= 1e-12);
        }
    }
    SUBCASE("zero error start on a straight stays centered") {
        const Track line = make_track({straight(100.0)}, 1.0);
        RolloutConfig cfg = base;
        cfg.perturb_frac = 0.0;
        const auto demos = collect_demos(line, cfg, params, meas, 1, 0.0, 0.0, 3);
        for (const auto& rec : demos) {
            const Vec xh = meas.xhat(rec.y);
            CHECK(std::fabs(xh[2]) <= 0.2);  // includes measurement error
        }
    }
    SUBCASE("hopeless safety bound rejects everything") {
        RolloutConfig cfg = base;
        cfg.safe_ce_bound = 1e-6;
        CHECK_THROWS_AS(collect_demos(track, cfg, params, meas, 3, 0.5, 0.3, 4),
                        DataError);
    }
}

TEST_CASE("comparison metric") {
    RolloutTrace a;
    a.max_abs_ce = 0.4;
    RolloutTrace b;
    b.max_abs_ce = 0.4;
    CHECK(compare_metric(a, b) == 0.0);
    b.max_abs_ce = 0.25;
    CHECK(compare_metric(a, b) == doctest::Approx(0.15));
    CHECK(compare_metric(b, a) == doctest::Approx(-0.15));
}

TEST_CASE("trace files") {
    VehicleParams params;
    const SystemModel sys = make_lane_system(params, 0.1, 0.1, 0.0);
    const MeasurementModel meas = make_exact_measurement(4);
    const Track track = make_track({straight(50.0)}, 1.0);
    RolloutConfig cfg;
    cfg.dt = 0.1;
    cfg.horizon = 1.0;
    cfg.perturb_frac = 0.0;
    ControllerSpec expert;
    expert.mode = ControlMode::expert;
    const RolloutTrace tr = rollout(track, cfg, expert, params, sys, meas);
    save_trace(tr, "trace_test.txt");
    std::FILE* f = std::fopen("trace_test.txt", "r");
    REQUIRE(f != nullptr);
    int lines = 0;
    char buf[512];
    while (std::fgets(buf, sizeof(buf), f)) ++lines;
    std::fclose(f);
    std::remove("trace_test.txt");
    CHECK(lines == 2 + 10);  // header + summary + one line per step
}
