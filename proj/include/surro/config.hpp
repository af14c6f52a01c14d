#pragma once

#include <fstream>
#include <initializer_list>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "surro/core.hpp"
#include "surro/orchestrator.hpp"
#include "surro/sim.hpp"
#include "surro/spec.hpp"

namespace surro {

struct ExportToggles {
    bool plots = true;
    bool traces = true;
};

struct RunConfig {
    ScenarioId scenario = ScenarioId::lane_keeping;
    int H = 160;
    double dt = 0.05;
    int threads = 1;
    std::string output_dir = "run_out";
    ExportToggles exports;
    Emulator emulator;
    SpecParams spec;
    LoopConfig loop;
};

inline RunConfig default_run_config(ScenarioId id) {
    RunConfig c;
    c.scenario = id;
    Scenario sc = default_scenario(id);
    c.H = sc.H;
    c.dt = sc.dt;
    c.emulator = default_emulator(id);
    if (id == ScenarioId::braking) {
        // park-early profiles satisfy the distance clause trivially; demand
        // that model traces actually approach the cones
        c.spec.phi_m_extra = "(eventually 0 240 (le d 5.0))";
        c.loop.synth.restarts = 10;
    }
    return c;
}

inline Scenario make_scenario(const RunConfig& c) {
    Scenario sc = default_scenario(c.scenario);
    sc.H = c.H;
    sc.dt = c.dt;
    return sc;
}

inline std::pair<Formula, Formula> make_specs(const RunConfig& c) {
    return builtin_specs(c.scenario, c.spec, c.H, c.dt);
}

namespace detail {

using njson = nlohmann::json;

[[noreturn]] inline void cfg_fail(const std::string& where, const std::string& msg) {
    throw std::runtime_error("config: " + where + ": " + msg);
}

inline void check_keys(const njson& j, const std::string& path,
                       std::initializer_list<const char*> allowed) {
    if (!j.is_object())
        cfg_fail(path.empty() ? "top level" : path, "expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* a : allowed)
            if (it.key() == a) {
                known = true;
                break;
            }
        if (!known)
            cfg_fail(path.empty() ? it.key() : path + "." + it.key(),
                     "unknown key");
    }
}

inline std::string join_path(const std::string& path, const char* key) {
    return path.empty() ? key : path + "." + key;
}

inline void read_num(const njson& j, const std::string& path, const char* key,
                     double& out) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_number()) cfg_fail(join_path(path, key), "expected a number");
    out = v.get<double>();
}

inline void read_int(const njson& j, const std::string& path, const char* key,
                     int& out) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_number_integer())
        cfg_fail(join_path(path, key), "expected an integer");
    out = v.get<int>();
}

inline void read_u64(const njson& j, const std::string& path, const char* key,
                     std::uint64_t& out) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_number_integer() ||
        (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
        cfg_fail(join_path(path, key), "expected a non-negative integer");
    out = v.get<std::uint64_t>();
}

inline void read_bool(const njson& j, const std::string& path, const char* key,
                      bool& out) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_boolean()) cfg_fail(join_path(path, key), "expected a boolean");
    out = v.get<bool>();
}

inline void read_str(const njson& j, const std::string& path, const char* key,
                     std::string& out) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_string()) cfg_fail(join_path(path, key), "expected a string");
    out = v.get<std::string>();
}

inline void read_vec(const njson& j, const std::string& path, const char* key,
                     Vec& out) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_array()) cfg_fail(join_path(path, key), "expected an array");
    Vec r;
    for (const auto& e : v) {
        if (!e.is_number())
            cfg_fail(join_path(path, key), "expected an array of numbers");
        r.push_back(e.get<double>());
    }
    out = std::move(r);
}

inline void validate_run_config(const RunConfig& c) {
    if (c.H < 1) cfg_fail("H", "must be at least 1");
    if (!(c.dt > 0.0)) cfg_fail("dt", "must be positive");
    if (c.threads < 1) cfg_fail("threads", "must be at least 1");
    if (!(c.emulator.quant > 0.0)) cfg_fail("emulator.quant", "must be positive");
    if (!(c.spec.eps1 > 0.0)) cfg_fail("spec.eps1", "must be positive");
    if (!(c.spec.eps2 > 0.0)) cfg_fail("spec.eps2", "must be positive");
    if (!(c.spec.d_max > 0.0)) cfg_fail("spec.d_max", "must be positive");
    if (!(c.spec.settle_theta > 0.0))
        cfg_fail("spec.settle_theta", "must be positive");
    if (!(c.spec.settle_d > 0.0)) cfg_fail("spec.settle_d", "must be positive");
    if (c.spec.settle_deadline_s < 0.0)
        cfg_fail("spec.settle_deadline_s", "must not be negative");
    const auto& l = c.loop;
    if (l.max_outer_iterations < 1)
        cfg_fail("loop.max_outer_iterations", "must be at least 1");
    if (l.falsify_budget < 0)
        cfg_fail("loop.falsify_budget", "must not be negative");
    if (l.early_stop_count < 1)
        cfg_fail("loop.early_stop_count", "must be at least 1");
    const auto& s = l.synth;
    if (s.restarts < 1) cfg_fail("loop.synth.restarts", "must be at least 1");
    if (s.max_gradient_steps < 0)
        cfg_fail("loop.synth.max_gradient_steps", "must not be negative");
    if (!(s.fd_epsilon > 0.0))
        cfg_fail("loop.synth.fd_epsilon", "must be positive");
    if (!(s.step_init > 0.0)) cfg_fail("loop.synth.step_init", "must be positive");
    if (!(s.step_min > 0.0) || s.step_min > s.step_init)
        cfg_fail("loop.synth.step_min", "must be positive and at most step_init");
    if (s.n_adversarial_rollouts < 0)
        cfg_fail("loop.synth.n_adversarial_rollouts", "must not be negative");
    if (s.margin < 0.0) cfg_fail("loop.synth.margin", "must not be negative");
    if (s.x0_grid < 1) cfg_fail("loop.synth.x0_grid", "must be at least 1");
    if (s.n_verify < 0) cfg_fail("loop.synth.n_verify", "must not be negative");
    if (s.max_bank_rounds < 1)
        cfg_fail("loop.synth.max_bank_rounds", "must be at least 1");
    if (s.bank_add_cap < 1)
        cfg_fail("loop.synth.bank_add_cap", "must be at least 1");
    const auto& k = l.learn;
    if (k.k_init < 1 || k.k_init > k.k_max)
        cfg_fail("loop.learn.k_init", "must satisfy 1 <= k_init <= k_max");
    if (!(k.width_threshold > 0.0))
        cfg_fail("loop.learn.width_threshold", "must be positive");
    if (k.kmeans_restarts < 1)
        cfg_fail("loop.learn.kmeans_restarts", "must be at least 1");
    if (!(k.coeff_cap > 0.0)) cfg_fail("loop.learn.coeff_cap", "must be positive");
    std::size_t fdim =
        (c.scenario == ScenarioId::lane_keeping ? 2 : 1) + 1;  // domain dims + 1
    if (!k.feature_scaling.empty() && k.feature_scaling.size() != fdim)
        cfg_fail("loop.learn.feature_scaling",
                 "must be empty or have " + std::to_string(fdim) + " entries");
    try {
        builtin_specs(c.scenario, c.spec, c.H, c.dt);
    } catch (const std::exception& e) {
        cfg_fail("spec", e.what());
    }
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
    using namespace detail;
    check_keys(j, "", {"scenario", "H", "dt", "threads", "output_dir", "export",
                       "emulator", "spec", "loop"});
    if (!j.contains("scenario")) cfg_fail("scenario", "required key is missing");
    std::string sid;
    read_str(j, "", "scenario", sid);
    RunConfig c = default_run_config(scenario_from_string(sid));

    read_int(j, "", "H", c.H);
    read_num(j, "", "dt", c.dt);
    read_int(j, "", "threads", c.threads);
    read_str(j, "", "output_dir", c.output_dir);

    if (j.contains("export")) {
        const auto& e = j.at("export");
        check_keys(e, "export", {"plots", "traces"});
        read_bool(e, "export", "plots", c.exports.plots);
        read_bool(e, "export", "traces", c.exports.traces);
    }

    if (j.contains("emulator")) {
        const auto& e = j.at("emulator");
        check_keys(e, "emulator",
                   {"seed", "quant", "reliable_d", "reliable_theta", "small_amp",
                    "bias_base", "bias_span", "far_range", "near_range",
                    "miss_gate", "color_gate", "color_lo", "color_hi", "mid_lo",
                    "mid_hi", "near_lo", "near_hi"});
        read_u64(e, "emulator", "seed", c.emulator.seed);
        read_num(e, "emulator", "quant", c.emulator.quant);
        read_num(e, "emulator", "reliable_d", c.emulator.reliable_d);
        read_num(e, "emulator", "reliable_theta", c.emulator.reliable_theta);
        read_num(e, "emulator", "small_amp", c.emulator.small_amp);
        read_num(e, "emulator", "bias_base", c.emulator.bias_base);
        read_num(e, "emulator", "bias_span", c.emulator.bias_span);
        read_num(e, "emulator", "far_range", c.emulator.far_range);
        read_num(e, "emulator", "near_range", c.emulator.near_range);
        read_num(e, "emulator", "miss_gate", c.emulator.miss_gate);
        read_num(e, "emulator", "color_gate", c.emulator.color_gate);
        read_num(e, "emulator", "color_lo", c.emulator.color_lo);
        read_num(e, "emulator", "color_hi", c.emulator.color_hi);
        read_num(e, "emulator", "mid_lo", c.emulator.mid_lo);
        read_num(e, "emulator", "mid_hi", c.emulator.mid_hi);
        read_num(e, "emulator", "near_lo", c.emulator.near_lo);
        read_num(e, "emulator", "near_hi", c.emulator.near_hi);
    }

    if (j.contains("spec")) {
        const auto& s = j.at("spec");
        check_keys(s, "spec",
                   {"eps1", "eps2", "d_max", "settle_theta", "settle_d",
                    "settle_deadline_s", "reach_only", "phi_m_extra"});
        read_num(s, "spec", "eps1", c.spec.eps1);
        read_num(s, "spec", "eps2", c.spec.eps2);
        read_num(s, "spec", "d_max", c.spec.d_max);
        read_num(s, "spec", "settle_theta", c.spec.settle_theta);
        read_num(s, "spec", "settle_d", c.spec.settle_d);
        read_num(s, "spec", "settle_deadline_s", c.spec.settle_deadline_s);
        read_bool(s, "spec", "reach_only", c.spec.reach_only);
        read_str(s, "spec", "phi_m_extra", c.spec.phi_m_extra);
    }

    if (j.contains("loop")) {
        const auto& l = j.at("loop");
        check_keys(l, "loop",
                   {"max_outer_iterations", "falsify_budget", "early_stop_count",
                    "master_seed", "synth", "learn"});
        read_int(l, "loop", "max_outer_iterations", c.loop.max_outer_iterations);
        read_int(l, "loop", "falsify_budget", c.loop.falsify_budget);
        read_int(l, "loop", "early_stop_count", c.loop.early_stop_count);
        read_u64(l, "loop", "master_seed", c.loop.master_seed);
        if (l.contains("synth")) {
            const auto& s = l.at("synth");
            check_keys(s, "loop.synth",
                       {"restarts", "max_gradient_steps", "fd_epsilon",
                        "step_init", "step_min", "n_adversarial_rollouts",
                        "margin", "x0_grid", "n_verify", "max_bank_rounds",
                        "bank_add_cap"});
            read_int(s, "loop.synth", "restarts", c.loop.synth.restarts);
            read_int(s, "loop.synth", "max_gradient_steps",
                     c.loop.synth.max_gradient_steps);
            read_num(s, "loop.synth", "fd_epsilon", c.loop.synth.fd_epsilon);
            read_num(s, "loop.synth", "step_init", c.loop.synth.step_init);
            read_num(s, "loop.synth", "step_min", c.loop.synth.step_min);
            read_int(s, "loop.synth", "n_adversarial_rollouts",
                     c.loop.synth.n_adversarial_rollouts);
            read_num(s, "loop.synth", "margin", c.loop.synth.margin);
            read_int(s, "loop.synth", "x0_grid", c.loop.synth.x0_grid);
            read_int(s, "loop.synth", "n_verify", c.loop.synth.n_verify);
            read_int(s, "loop.synth", "max_bank_rounds",
                     c.loop.synth.max_bank_rounds);
            read_int(s, "loop.synth", "bank_add_cap", c.loop.synth.bank_add_cap);
        }
        if (l.contains("learn")) {
            const auto& k = l.at("learn");
            check_keys(k, "loop.learn",
                       {"k_init", "k_max", "width_threshold", "kmeans_restarts",
                        "coeff_cap", "feature_scaling"});
            read_int(k, "loop.learn", "k_init", c.loop.learn.k_init);
            read_int(k, "loop.learn", "k_max", c.loop.learn.k_max);
            read_num(k, "loop.learn", "width_threshold",
                     c.loop.learn.width_threshold);
            read_int(k, "loop.learn", "kmeans_restarts",
                     c.loop.learn.kmeans_restarts);
            read_num(k, "loop.learn", "coeff_cap", c.loop.learn.coeff_cap);
            read_vec(k, "loop.learn", "feature_scaling",
                     c.loop.learn.feature_scaling);
        }
    }

    detail::validate_run_config(c);
    c.emulator.scenario = c.scenario;
    c.loop.synth.threads = c.threads;
    return c;
}

// effective config, fully defaulted, in a fixed key order so that the echo
// written into a run directory reserializes byte-identically
inline nlohmann::ordered_json config_to_json(const RunConfig& c) {
    nlohmann::ordered_json j;
    j["scenario"] = to_string(c.scenario);
    j["H"] = c.H;
    j["dt"] = c.dt;
    j["threads"] = c.threads;
    j["output_dir"] = c.output_dir;
    j["export"] = {{"plots", c.exports.plots}, {"traces", c.exports.traces}};
    nlohmann::ordered_json e;
    e["seed"] = c.emulator.seed;
    e["quant"] = c.emulator.quant;
    e["reliable_d"] = c.emulator.reliable_d;
    e["reliable_theta"] = c.emulator.reliable_theta;
    e["small_amp"] = c.emulator.small_amp;
    e["bias_base"] = c.emulator.bias_base;
    e["bias_span"] = c.emulator.bias_span;
    e["far_range"] = c.emulator.far_range;
    e["near_range"] = c.emulator.near_range;
    e["miss_gate"] = c.emulator.miss_gate;
    e["color_gate"] = c.emulator.color_gate;
    e["color_lo"] = c.emulator.color_lo;
    e["color_hi"] = c.emulator.color_hi;
    e["mid_lo"] = c.emulator.mid_lo;
    e["mid_hi"] = c.emulator.mid_hi;
    e["near_lo"] = c.emulator.near_lo;
    e["near_hi"] = c.emulator.near_hi;
    j["emulator"] = std::move(e);
    nlohmann::ordered_json s;
    s["eps1"] = c.spec.eps1;
    s["eps2"] = c.spec.eps2;
    s["d_max"] = c.spec.d_max;
    s["settle_theta"] = c.spec.settle_theta;
    s["settle_d"] = c.spec.settle_d;
    s["settle_deadline_s"] = c.spec.settle_deadline_s;
    s["reach_only"] = c.spec.reach_only;
    s["phi_m_extra"] = c.spec.phi_m_extra;
    j["spec"] = std::move(s);
    nlohmann::ordered_json l;
    l["max_outer_iterations"] = c.loop.max_outer_iterations;
    l["falsify_budget"] = c.loop.falsify_budget;
    l["early_stop_count"] = c.loop.early_stop_count;
    l["master_seed"] = c.loop.master_seed;
    nlohmann::ordered_json sy;
    sy["restarts"] = c.loop.synth.restarts;
    sy["max_gradient_steps"] = c.loop.synth.max_gradient_steps;
    sy["fd_epsilon"] = c.loop.synth.fd_epsilon;
    sy["step_init"] = c.loop.synth.step_init;
    sy["step_min"] = c.loop.synth.step_min;
    sy["n_adversarial_rollouts"] = c.loop.synth.n_adversarial_rollouts;
    sy["margin"] = c.loop.synth.margin;
    sy["x0_grid"] = c.loop.synth.x0_grid;
    sy["n_verify"] = c.loop.synth.n_verify;
    sy["max_bank_rounds"] = c.loop.synth.max_bank_rounds;
    sy["bank_add_cap"] = c.loop.synth.bank_add_cap;
    l["synth"] = std::move(sy);
    nlohmann::ordered_json le;
    le["k_init"] = c.loop.learn.k_init;
    le["k_max"] = c.loop.learn.k_max;
    le["width_threshold"] = c.loop.learn.width_threshold;
    le["kmeans_restarts"] = c.loop.learn.kmeans_restarts;
    le["coeff_cap"] = c.loop.learn.coeff_cap;
    le["feature_scaling"] = c.loop.learn.feature_scaling;
    l["learn"] = std::move(le);
    j["loop"] = std::move(l);
    return j;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("config: cannot open " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(f);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("config: " + path + ": " + e.what());
    }
    return parse_run_config(j);
}

}  // namespace surro
