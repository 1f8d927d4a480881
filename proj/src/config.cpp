#include "rocbf/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "rocbf/errors.hpp"

namespace rocbf {
namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

Config Config::defaults() {
    Config c;
    auto& kv = c.kv_;

    // Vehicle and expert (longitudinal coefficients from the identified car
    // model; PID gains tuned for the toy track).
    kv["vehicle.wheelbase"] = "2.51";
    kv["vehicle.a1"] = "1.095";
    kv["vehicle.a2"] = "0.007";
    kv["vehicle.a3"] = "0.152";
    kv["vehicle.a4"] = "3.74";
    kv["vehicle.b1"] = "3.6";
    kv["vehicle.b2"] = "20.0";
    kv["vehicle.pid_kp"] = "0.5";
    kv["vehicle.pid_ktheta"] = "1.2";
    kv["vehicle.pid_kd"] = "0.25";
    kv["vehicle.input_clamp"] = "0.7";

    // System model error bounds.
    kv["system.delta_f"] = "0.1";
    kv["system.delta_g"] = "0.1";

    // Measurement map: "synthetic" (redundant reads + bounded perturbation)
    // or "exact" (identity, delta_x = 0).
    kv["measurement.mode"] = "synthetic";
    kv["measurement.delta_x"] = "0.1";
    kv["measurement.delta_meas"] = "0.1";
    kv["measurement.lip_y_bound"] = "2.7";

    // Barrier function class.
    kv["barrier.ell"] = "384";
    kv["barrier.sigma2"] = "2.25";
    kv["barrier.alpha_slope"] = "1.0";
    kv["barrier.seed"] = "2024";

    // Robustness constants.
    kv["consts.lbar1"] = "1.0";
    kv["consts.lbar2"] = "0.5";
    kv["consts.lbar3"] = "0.5";

    // Track: semicolon-separated segments, each "straight:LEN" or
    // "arc:RADIUS:ANGLE" (angle in radians, positive = left turn).
    kv["track.segments"] = "arc:50:6.2831853071795862";
    kv["track.spacing"] = "1.0";

    // Demonstration collection.
    kv["collect.n_rollouts"] = "75";  
    kv["collect.dt"] = "0.02";
    kv["collect.horizon"] = "8.0";
    kv["collect.n_cruise"] = "30";
    kv["collect.n_excursion"] = "60";
    kv["collect.horizon_excursion"] = "6.0";
    kv["collect.excursion_amp"] = "0.92";
    kv["collect.horizon_cruise"] = "6.0";
    kv["collect.n_approach"] = "10";
    kv["collect.horizon_approach"] = "6.0";
    kv["collect.ic_ce_max"] = "0.78";
    kv["collect.ic_theta_max"] = "0.33";
    kv["collect.v0"] = "0.0";
    kv["collect.d0"] = "0.0";
    kv["collect.seed"] = "7";
    kv["collect.perturb_frac"] = "0.15";
    kv["collect.dither_amp"] = "0.5";
    kv["collect.safe_ce_bound"] = "1.0";

    // Dataset construction.
    kv["datasets.stride"] = "16";
    kv["datasets.k"] = "200";
    kv["datasets.boundary_fraction"] = "0.40";
    kv["datasets.augment_copies"] = "2";
    kv["datasets.sigma_layer"] = "0.4";
    kv["datasets.l_h"] = "1.0";
    kv["datasets.seed"] = "11";

    // Training (hinge relaxation).
    kv["train.gamma_safe"] = "0.05";
    kv["train.gamma_unsafe"] = "0.05";
    kv["train.gamma_dyn"] = "0.01";
    kv["train.lambda_s"] = "100.0";
    kv["train.lambda_u"] = "100.0";
    kv["train.lambda_d"] = "100.0";
    kv["train.optimizer"] = "adam";
    kv["train.step"] = "0.02";
    kv["train.step_decay"] = "sqrt";
    kv["train.beta1"] = "0.9";
    kv["train.beta2"] = "0.999";
    kv["train.eps_adam"] = "1e-8";
    kv["train.max_iters"] = "30000";
    kv["train.batch"] = "0";
    kv["train.seed"] = "3";
    kv["train.stop_tol"] = "1e-10";
    kv["train.stop_window"] = "400";
    kv["train.sup_ball_mode"] = "false";

    // Verification.
    kv["verify.lip_pairs"] = "20000";
    kv["verify.inflation"] = "1.5";
    kv["verify.max_demos"] = "256";
    kv["verify.lbar_pairs"] = "20000";
    kv["verify.bndq_samples"] = "2000";
    kv["verify.bndq_horizon"] = "30.0";
    kv["verify.seed"] = "17";

    // Rollout / evaluation.
    kv["rollout.dt"] = "0.02";
    kv["rollout.horizon"] = "30.0";
    kv["rollout.integrator"] = "rk4";
    kv["rollout.perturb_frac"] = "0.5";
    kv["rollout.u_min"] = "-0.7";
    kv["rollout.u_max"] = "0.7";
    kv["rollout.seed"] = "23";

    // Initial-condition comparison grid.
    kv["compare.n_ce"] = "10";
    kv["compare.n_theta"] = "10";
    kv["compare.ce_max"] = "0.75";
    kv["compare.theta_max"] = "0.3";

    // Pipeline gates.
    kv["pipeline.viol_frac_max"] = "0.05";
    kv["pipeline.require_verification"] = "false";

    return c;
}

Config Config::from_string(const std::string& text) {
    Config c = defaults();
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config line " + std::to_string(lineno) +
                                  ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": empty key");
        c.kv_[section.empty() ? key : section + "." + key] = val;
    }
    return c;
}

Config Config::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_string(ss.str());
}

void Config::set(const std::string& key, const std::string& value) {
    kv_[key] = value;
}

bool Config::has(const std::string& key) const { return kv_.count(key) > 0; }

std::string Config::get_string(const std::string& key) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) throw ConfigError("missing config key: " + key);
    return it->second;
}

double Config::get_double(const std::string& key) const {
    const std::string s = get_string(key);
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        throw ConfigError("config key " + key + ": not a number: " + s);
    return v;
}

std::int64_t Config::get_int(const std::string& key) const {
    const std::string s = get_string(key);
    char* end = nullptr;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0')
        throw ConfigError("config key " + key + ": not an integer: " + s);
    return v;
}

bool Config::get_bool(const std::string& key) const {
    const std::string s = get_string(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError("config key " + key + ": not a boolean: " + s);
}

std::string Config::dump() const {
    std::string out;
    for (const auto& [k, v] : kv_) {
        out += k;
        out += " = ";
        out += v;
        out += '\n';
    }
    return out;
}

std::uint64_t Config::hash() const {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a
    for (char ch : dump()) {
        h ^= static_cast<unsigned char>(ch);
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace rocbf
