#include "rocbf/pipeline.hpp"

#include <cinttypes>
#include <cstdio>
#include <filesystem>

#include "rocbf/errors.hpp"

namespace rocbf {
namespace fs = std::filesystem;

namespace {

void write_manifest(const Config& cfg, const StagePaths& paths) {
    std::FILE* f = std::fopen(paths.manifest.c_str(), "w");
    if (!f) throw DataError("cannot write manifest: " + paths.manifest);
    std::fprintf(f, "{\n  \"tool_version\": \"%s\",\n", kToolVersion);
    std::fprintf(f, "  \"config_hash\": \"%016" PRIx64 "\",\n", cfg.hash());
    std::fprintf(f,
                 "  \"seeds\": {\"collect\": %lld, \"datasets\": %lld, "
                 "\"train\": %lld, \"verify\": %lld, \"rollout\": %lld, "
                 "\"barrier\": %lld},\n",
                 static_cast<long long>(cfg.get_int("collect.seed")),
                 static_cast<long long>(cfg.get_int("datasets.seed")),
                 static_cast<long long>(cfg.get_int("train.seed")),
                 static_cast<long long>(cfg.get_int("verify.seed")),
                 static_cast<long long>(cfg.get_int("rollout.seed")),
                 static_cast<long long>(cfg.get_int("barrier.seed")));
    std::fprintf(f, "  \"artifacts\": [");
    bool first = true;
    // A manifest only lists files that exist at write time.
    for (const std::string& p :
         {paths.demos, paths.bundle, paths.barrier, paths.train_report,
          paths.loss_trace, paths.verify_report, paths.compare_grid}) {
        if (!fs::exists(p)) continue;
        std::fprintf(f, "%s\"%s\"", first ? "" : ", ", p.c_str());
        first = false;
    }
    std::fprintf(f, "]\n}\n");
    std::fclose(f);
}

RffBarrier sample_barrier_from(const Config& cfg) {
    return RffBarrier::sample(
        kLaneStateDim, static_cast<std::size_t>(cfg.get_int("barrier.ell")),
        cfg.get_double("barrier.sigma2"), cfg.get_double("barrier.alpha_slope"),
        static_cast<std::uint64_t>(cfg.get_int("barrier.seed")));
}

RobustnessConsts consts_from(const Config& cfg) {
    RobustnessConsts c;
    c.lbar1 = cfg.get_double("consts.lbar1");
    c.lbar2 = cfg.get_double("consts.lbar2");
    c.lbar3 = cfg.get_double("consts.lbar3");
    if (c.lbar1 <= 0.0 || c.lbar2 <= 0.0 || c.lbar3 <= 0.0)
        throw ConfigError("robustness constants lbar* must be positive");
    return c;
}

InputSet input_set_from(const Config& cfg) {
    return InputSet::box({cfg.get_double("rollout.u_min")},
                         {cfg.get_double("rollout.u_max")});
}

}  // namespace

StagePaths StagePaths::in(const std::string& outdir) {
    fs::create_directories(outdir);
    StagePaths p;
    p.demos = outdir + "/demos.txt";
    p.bundle = outdir + "/bundle.txt";
    p.barrier = outdir + "/barrier.rff";
    p.train_report = outdir + "/train_report.json";
    p.loss_trace = outdir + "/loss_trace.txt";
    p.verify_report = outdir + "/verify_report.json";
    p.manifest = outdir + "/manifest.json";
    p.compare_grid = outdir + "/compare_grid.txt";
    return p;
}

Track track_from_config(const Config& cfg) {
    return make_track(parse_segments(cfg.get_string("track.segments")),
                      cfg.get_double("track.spacing"));
}

double model_curvature(const Config& cfg) {
    const auto segs = parse_segments(cfg.get_string("track.segments"));
    const auto& s = segs.front();
    if (s.kind == SegmentSpec::Kind::straight) return 0.0;
    return (s.angle >= 0 ? 1.0 : -1.0) / s.radius;
}

void run_collect(const Config& cfg, const std::string& outdir) {
    const StagePaths paths = StagePaths::in(outdir);
    const Track track = track_from_config(cfg);
    const VehicleParams params = VehicleParams::from_config(cfg);
    const MeasurementModel meas = measurement_from_config(cfg);

    RolloutConfig base = RolloutConfig::from_config(cfg);
    base.dt = cfg.get_double("collect.dt");
    base.horizon = cfg.get_double("collect.horizon");
    base.v0 = cfg.get_double("collect.v0");
    base.d0 = cfg.get_double("collect.d0");
    base.perturb_frac = cfg.get_double("collect.perturb_frac");
    base.dither_amp = cfg.get_double("collect.dither_amp");

    const auto demos = collect_demos_cohorts(
        track, base, params, meas,
        static_cast<int>(cfg.get_int("collect.n_cruise")),
        cfg.get_double("collect.horizon_cruise"),
        static_cast<int>(cfg.get_int("collect.n_excursion")),
        cfg.get_double("collect.horizon_excursion"),
        cfg.get_double("collect.excursion_amp"),
        static_cast<int>(cfg.get_int("collect.n_approach")),
        cfg.get_double("collect.horizon_approach"),
        cfg.get_double("collect.ic_ce_max"),
        cfg.get_double("collect.ic_theta_max"),
        static_cast<std::uint64_t>(cfg.get_int("collect.seed")));
    save_demos(demos, paths.demos);
    write_manifest(cfg, paths);
    std::printf("collect: %zu records -> %s\n", demos.size(),
                paths.demos.c_str());
}

void run_datasets(const Config& cfg, const std::string& outdir) {
    const StagePaths paths = StagePaths::in(outdir);
    const auto demos = load_demos(paths.demos);
    const MeasurementModel meas = measurement_from_config(cfg);
    const DatasetBundle bundle = build_bundle(demos, meas, cfg);
    save_bundle(bundle, paths.bundle);
    write_manifest(cfg, paths);
    std::printf(
        "datasets: %zu dyn, %zu safe, %zu unsafe, %zu buffered; eps=%.4g "
        "eps_n=%.4g eps_bar=%.4g -> %s\n",
        bundle.z_dyn.size(), bundle.z_safe.size(), bundle.z_unsafe.size(),
        bundle.z_safe_buffered.size(), bundle.eps, bundle.eps_n, bundle.eps_bar,
        paths.bundle.c_str());
}

void run_train(const Config& cfg, const std::string& outdir) {
    const StagePaths paths = StagePaths::in(outdir);
    const DatasetBundle bundle = load_bundle(paths.bundle);
    const SystemModel sys = system_from_config(cfg, model_curvature(cfg));
    const MeasurementModel meas = measurement_from_config(cfg);
    const RffBarrier bar0 = sample_barrier_from(cfg);
    const RobustnessConsts consts = consts_from(cfg);
    const TrainConfig tcfg = TrainConfig::from_config(cfg);

    auto [bar, report] = train(bundle, sys, meas, bar0, consts, tcfg);
    save_barrier(bar, consts, paths.barrier);
    save_train_report(report, paths.train_report);
    save_loss_trace(report, paths.loss_trace);
    write_manifest(cfg, paths);
    std::printf(
        "train: loss %.6g after %d iters; violations safe %zu/%zu unsafe "
        "%zu/%zu dyn %zu/%zu -> %s\n",
        report.final_loss, report.iters, report.constraints.viol_safe,
        report.constraints.n_safe, report.constraints.viol_unsafe,
        report.constraints.n_unsafe, report.constraints.viol_dyn,
        report.constraints.n_dyn, paths.barrier.c_str());
}

VerificationReport run_verify(const Config& cfg, const std::string& outdir) {
    const StagePaths paths = StagePaths::in(outdir);
    const DatasetBundle bundle = load_bundle(paths.bundle);
    auto [bar, consts] = load_barrier(paths.barrier);
    const SystemModel sys = system_from_config(cfg, model_curvature(cfg));
    const MeasurementModel meas = measurement_from_config(cfg);
    const TrainConfig tcfg = TrainConfig::from_config(cfg);
    const VerifyConfig vcfg = VerifyConfig::from_config(cfg);

    const VerificationReport report =
        verify(bar, bundle, sys, meas, consts, tcfg, vcfg);
    save_verification_report(report, paths.verify_report);
    print_verification_table(report);
    write_manifest(cfg, paths);
    return report;
}

RolloutTrace run_rollout(const Config& cfg, const std::string& outdir,
                         const std::string& controller, double ce0,
                         double theta0, const std::string& trace_name) {
    const StagePaths paths = StagePaths::in(outdir);
    const Track track = track_from_config(cfg);
    const VehicleParams params = VehicleParams::from_config(cfg);
    const SystemModel sys = system_from_config(cfg, model_curvature(cfg));
    const MeasurementModel meas = measurement_from_config(cfg);

    RolloutConfig rcfg = RolloutConfig::from_config(cfg);
    rcfg.ce0 = ce0;
    rcfg.theta0 = theta0;

    ControllerSpec spec;
    RffBarrier bar;
    if (controller == "expert") {
        spec.mode = ControlMode::expert;
    } else if (controller == "rocbf") {
        spec.mode = ControlMode::rocbf;
        auto loaded = load_barrier(paths.barrier);
        bar = std::move(loaded.first);
        spec.bar = &bar;
        spec.consts = loaded.second;
        spec.uset = input_set_from(cfg);
    } else {
        throw ConfigError("controller must be 'expert' or 'rocbf'");
    }

    const RffBarrier* monitor = nullptr;
    RffBarrier monitor_bar;
    if (spec.mode == ControlMode::expert && fs::exists(paths.barrier)) {
        auto loaded = load_barrier(paths.barrier);
        monitor_bar = std::move(loaded.first);
        monitor = &monitor_bar;
    }

    const RolloutTrace trace =
        rollout(track, rcfg, spec, params, sys, meas, monitor);
    save_trace(trace, outdir + "/" + trace_name);
    return trace;
}

void run_compare(const Config& cfg, const std::string& outdir) {
    const StagePaths paths = StagePaths::in(outdir);
    const Track track = track_from_config(cfg);
    const VehicleParams params = VehicleParams::from_config(cfg);
    const SystemModel sys = system_from_config(cfg, model_curvature(cfg));
    const MeasurementModel meas = measurement_from_config(cfg);
    auto [bar, consts] = load_barrier(paths.barrier);

    ControllerSpec rocbf_spec;
    rocbf_spec.mode = ControlMode::rocbf;
    rocbf_spec.bar = &bar;
    rocbf_spec.consts = consts;
    rocbf_spec.uset = input_set_from(cfg);
    ControllerSpec expert_spec;
    expert_spec.mode = ControlMode::expert;

    const auto n_ce = static_cast<int>(cfg.get_int("compare.n_ce"));
    const auto n_th = static_cast<int>(cfg.get_int("compare.n_theta"));
    const double ce_max = cfg.get_double("compare.ce_max");
    const double th_max = cfg.get_double("compare.theta_max");

    std::FILE* f = std::fopen(paths.compare_grid.c_str(), "w");
    if (!f) throw DataError("cannot write compare grid: " + paths.compare_grid);
    std::fprintf(f, "# ce0 theta0 metric\n");
    RolloutConfig rcfg = RolloutConfig::from_config(cfg);
    for (int i = 0; i < n_ce; ++i) {
        for (int j = 0; j < n_th; ++j) {
            rcfg.ce0 = n_ce > 1 ? -ce_max + 2.0 * ce_max * i / (n_ce - 1) : 0.0;
            rcfg.theta0 =
                n_th > 1 ? -th_max + 2.0 * th_max * j / (n_th - 1) : 0.0;
            double metric;
            try {
                const RolloutTrace tr =
                    rollout(track, rcfg, rocbf_spec, params, sys, meas);
                const RolloutTrace te =
                    rollout(track, rcfg, expert_spec, params, sys, meas);
                metric = compare_metric(tr, te);
            } catch (const SimulationDivergedError&) {
                metric = 2.5;  // sentinel for a crashed rollout
            }
            std::fprintf(f, "%.17g %.17g %.17g\n", rcfg.ce0, rcfg.theta0,
                         metric);
        }
    }
    std::fclose(f);
    write_manifest(cfg, paths);
    std::printf("compare: %d rows -> %s\n", n_ce * n_th,
                paths.compare_grid.c_str());
}

PipelineOutcome run_pipeline(const Config& cfg, const std::string& outdir) {
    PipelineOutcome out;
    const StagePaths paths = StagePaths::in(outdir);
    if (!fs::exists(paths.demos)) run_collect(cfg, outdir);
    run_datasets(cfg, outdir);
    run_train(cfg, outdir);
    const VerificationReport vrep = run_verify(cfg, outdir);
    out.verify_overall = vrep.overall;

    // Gate on the constraint-violation fractions; the verification verdict
    // is reported always and gates only when configured to.
    const DatasetBundle bundle = load_bundle(paths.bundle);
    auto [bar, consts] = load_barrier(paths.barrier);
    const SystemModel sys = system_from_config(cfg, model_curvature(cfg));
    const MeasurementModel meas = measurement_from_config(cfg);
    const TrainConfig tcfg = TrainConfig::from_config(cfg);
    out.constraints = check_constraints(bar, bundle, sys, meas, consts, tcfg);

    const double max_frac = cfg.get_double("pipeline.viol_frac_max");
    out.fractions_ok = out.constraints.frac_max() <= max_frac;
    if (!out.fractions_ok) {
        out.exit_code = kConstraintViolations;
        char buf[256];
        std::snprintf(buf, sizeof(buf),
                      "constraint violations exceed %.3g: "
                      "(opt_1) %.3g, (opt_2) %.3g, (opt_3) %.3g",
                      max_frac, out.constraints.frac_safe(),
                      out.constraints.frac_unsafe(), out.constraints.frac_dyn());
        out.message = buf;
        return out;
    }
    if (cfg.get_bool("pipeline.require_verification") && !vrep.overall) {
        out.exit_code = kVerificationFailed;
        out.message = "verification conditions not satisfied";
        return out;
    }
    out.exit_code = kOk;
    out.message = "pipeline complete";
    return out;
}

}  // namespace rocbf
