// Command-line front end: collect -> datasets -> train -> verify ->
// rollout/compare, plus the all-in-one pipeline subcommand.

#include <CLI11.hpp>
#include <cstdio>
#include <string>
#include <vector>

#include "rocbf/errors.hpp"
#include "rocbf/kernels.hpp"
#include "rocbf/pipeline.hpp"

namespace {

rocbf::Config assemble_config(const std::string& config_path,
                              const std::vector<std::string>& overrides) {
    rocbf::Config cfg = config_path.empty()
                            ? rocbf::Config::defaults()
                            : rocbf::Config::from_file(config_path);
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw rocbf::ConfigError("--set expects key=value, got: " + kv);
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
}

void apply_isa(const std::string& isa) {
    if (isa.empty()) return;
    if (isa == "scalar")
        rocbf::kernels::force(rocbf::kernels::Isa::scalar);
    else if (isa == "avx2") {
        if (!rocbf::kernels::avx2_available())
            throw rocbf::ConfigError("avx2 requested but not available");
        rocbf::kernels::force(rocbf::kernels::Isa::avx2);
    } else {
        throw rocbf::ConfigError("--isa must be 'scalar' or 'avx2'");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Learning robust output control barrier functions from "
                 "expert demonstrations"};
    app.require_subcommand(1);

    std::string config_path, outdir = "out", isa;
    std::vector<std::string> overrides;
    app.add_option("--config", config_path, "Config file (INI sections)");
    app.add_option("--out", outdir, "Artifact directory");
    app.add_option("--set", overrides, "Override a config key (key=value)")
        ->take_all();
    app.add_option("--isa", isa, "Force kernel ISA (scalar|avx2)");

    auto* collect = app.add_subcommand("collect", "Record expert demonstrations");
    auto* datasets = app.add_subcommand("datasets", "Build the dataset bundle");
    auto* train_cmd = app.add_subcommand("train", "Fit the barrier");
    auto* verify_cmd = app.add_subcommand("verify", "Check validity conditions");
    auto* rollout_cmd = app.add_subcommand("rollout", "Single closed-loop rollout");
    auto* compare = app.add_subcommand("compare", "Metric grid over initial conditions");
    auto* pipeline = app.add_subcommand("pipeline", "Run every stage and gate the result");
    for (auto* sub : {collect, datasets, train_cmd, verify_cmd, rollout_cmd,
                      compare, pipeline})
        sub->fallthrough();

    std::string controller = "rocbf", trace_name = "trace.txt";
    double ce0 = 0.0, theta0 = 0.0;
    rollout_cmd->add_option("--controller", controller, "expert|rocbf");
    rollout_cmd->add_option("--ce0", ce0, "Initial cross-track error [m]");
    rollout_cmd->add_option("--theta0", theta0, "Initial heading error [rad]");
    rollout_cmd->add_option("--trace", trace_name, "Trace file name");

    bool strict_verify = false;
    verify_cmd->add_flag("--strict", strict_verify,
                         "Exit nonzero when the report fails overall");

    CLI11_PARSE(app, argc, argv);

    try {
        const rocbf::Config cfg = assemble_config(config_path, overrides);
        apply_isa(isa);

        if (collect->parsed()) {
            rocbf::run_collect(cfg, outdir);
        } else if (datasets->parsed()) {
            rocbf::run_datasets(cfg, outdir);
        } else if (train_cmd->parsed()) {
            rocbf::run_train(cfg, outdir);
        } else if (verify_cmd->parsed()) {
            const auto report = rocbf::run_verify(cfg, outdir);
            if (strict_verify && !report.overall) {
                std::fprintf(stderr, "verify: conditions not satisfied\n");
                return rocbf::kVerificationFailed;
            }
        } else if (rollout_cmd->parsed()) {
            const auto trace = rocbf::run_rollout(cfg, outdir, controller, ce0,
                                                  theta0, trace_name);
            std::printf("rollout: %zu steps, max|c_e| %.4g, min h %.4g, "
                        "infeasible %d\n",
                        trace.steps.size(), trace.max_abs_ce, trace.min_h,
                        trace.infeasible_steps);
        } else if (compare->parsed()) {
            rocbf::run_compare(cfg, outdir);
        } else if (pipeline->parsed()) {
            const auto outcome = rocbf::run_pipeline(cfg, outdir);
            std::printf("pipeline: %s\n", outcome.message.c_str());
            return outcome.exit_code;
        }
        return rocbf::kOk;
    } catch (const rocbf::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return rocbf::kConfigError;
    } catch (const rocbf::TrainingDivergedError& e) {
        std::fprintf(stderr, "training diverged: %s (last loss %.6g)\n",
                     e.what(), e.last_loss);
        return rocbf::kTrainingDiverged;
    } catch (const rocbf::SimulationDivergedError& e) {
        std::fprintf(stderr, "simulation diverged: %s\n", e.what());
        return rocbf::kSimulationDiverged;
    } catch (const rocbf::DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return rocbf::kDataError;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "invalid argument: %s\n", e.what());
        return rocbf::kConfigError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return rocbf::kFailure;
    }
}
