#pragma once

#include <cmath>
#include <limits>

#include "surro/core.hpp"
#include "surro/rng.hpp"

namespace surro {

struct Scenario {
    ScenarioId id = ScenarioId::lane_keeping;
    Box x0_box;
    Box env_box;
    double dt = 0.05;
    int H = 160;
    Box control_bounds;

    // lane keeping constants
    double wheelbase = 2.9;
    double steer_max = 0.5;

    // braking constants
    double brake_margin = 0.75;    // controller aims to stop this far from the cones
    double rear_stop_offset = 1.0; // rear car aims to stop this far from the cones
};

inline Scenario default_scenario(ScenarioId id) {
    Scenario sc;
    sc.id = id;
    if (id == ScenarioId::lane_keeping) {
        double v_lo = 15.0 / 3.6, v_hi = 25.0 / 3.6;
        sc.x0_box.lo = {0.0, 0.0, -0.25, 0.0, v_lo, -0.4};
        sc.x0_box.hi = {0.0, 0.0, 0.25, 0.0, v_hi, 0.4};
        sc.env_box = {};
        sc.dt = 0.05;
        sc.H = 160;
        sc.control_bounds = {{-0.5}, {0.5}};
    } else {
        sc.x0_box.lo = {40.0, 8.0, 8.0, 0.0};
        sc.x0_box.hi = {60.0, 12.0, 15.0, 0.0};
        sc.env_box = {{0.0, 8.0}, {1.0, 12.0}};
        sc.dt = 0.05;
        sc.H = 240;
        sc.control_bounds = {{0.0}, {2.5}};
    }
    return sc;
}

inline Box default_p_box(ScenarioId id) {
    if (id == ScenarioId::lane_keeping) return {{-6.0, -3.0}, {0.0, 0.0}};
    return {{0.0, 0.0}, {18.0, 8.0}};
}

inline Vec default_p_init(ScenarioId id) {
    if (id == ScenarioId::lane_keeping) return {-2.0, -0.8};
    return {14.0, 4.0};
}

// the rear car's initial speed matches the ego it is following
inline void couple_x0(ScenarioId id, Vec& x0) {
    if (id == ScenarioId::braking) x0[brake::V_REAR] = x0[brake::V];
}

// ---- dynamics ----

inline Vec lane_keeping_dynamics(const Vec& x, double u, double dt,
                                 const Scenario& sc) {
    Vec n = x;
    double v = x[lane::V];
    double theta_av = x[lane::THETA_AV];
    double theta_delta = theta_av - x[lane::THETA_R];
    n[lane::THETA_AV] = theta_av + dt * (v / sc.wheelbase) * std::tan(u);
    n[lane::D] = x[lane::D] + dt * v * std::sin(theta_delta);
    n[lane::X] = x[lane::X] + dt * v * std::cos(theta_av);
    n[lane::Y] = x[lane::Y] + dt * v * std::sin(theta_av);
    return n;
}

// ideal braking magnitude for a car that knows the cone position and wants
// to stop stop_offset short of it
inline double rear_car_policy(double v_rear, double dist_to_cone,
                              double stop_offset) {
    double denom = 2.0 * (dist_to_cone - stop_offset);
    if (denom <= 0.0) return 2.5;
    double a = v_rear * v_rear / denom;
    return std::min(std::max(a, 0.0), 2.5);
}

inline Vec braking_dynamics(const Vec& x, double u, double dt, const Scenario& sc) {
    double d = x[brake::D], v = x[brake::V];
    double d_car = x[brake::D_CAR], v_rear = x[brake::V_REAR];

    double a_rear = rear_car_policy(v_rear, d + d_car, sc.rear_stop_offset);

    Vec n(brake::STATE_DIM);
    n[brake::D] = d - dt * v;
    n[brake::V] = std::max(0.0, v - dt * u);
    n[brake::D_CAR] = d_car + dt * (v - v_rear);
    n[brake::V_REAR] = std::max(0.0, v_rear - dt * a_rear);
    return n;
}

// ---- perception emulators ----

struct Emulator {
    ScenarioId scenario = ScenarioId::lane_keeping;
    std::uint64_t seed = 42;
    double quant = 1e-6;

    // lane keeping: accurate inside a centered, aligned window; strongly
    // biased away from the center outside of it
    double reliable_d = 0.3;
    double reliable_theta = 0.15;
    double small_amp = 0.03;
    double bias_base = 0.25;
    double bias_span = 0.5;

    // braking: relative error by range band, dropouts at long range,
    // severe underestimates when the obstacle color confuses the detector
    double far_range = 35.2;
    double near_range = 16.5;
    double miss_gate = 0.3;
    double color_gate = 0.7;
    double color_lo = -0.6, color_hi = -0.3;
    double mid_lo = -0.2, mid_hi = 0.2;
    double near_lo = -0.05, near_hi = 0.05;

    Vec measure(const Vec& x, const Vec& env) const {
        return scenario == ScenarioId::lane_keeping ? measure_lane(x)
                                                    : measure_brake(x, env);
    }

    Vec measure_lane(const Vec& x) const {
        double d = x[lane::D];
        double theta = x[lane::THETA_AV] - x[lane::THETA_R];
        double v = x[lane::V];

        // hash over magnitudes so that mirrored states draw the same
        // fraction; the sign factor keeps the error exactly odd
        std::uint64_t h = mix64(seed ^ 0x8f1bbcdc5ca65a17ULL);
        h = absorb(h, static_cast<std::uint64_t>(quantize(std::abs(d), quant)));
        h = absorb(h, static_cast<std::uint64_t>(quantize(std::abs(theta), quant)));
        h = absorb(h, static_cast<std::uint64_t>(quantize(v, quant)));
        double frac = to_unit(h);

        double sgn = d > 0.0 ? 1.0 : d < 0.0 ? -1.0 : 0.0;
        double e;
        if (std::abs(d) <= reliable_d && std::abs(theta) <= reliable_theta) {
            double s = sgn != 0.0 ? sgn : (theta > 0.0 ? 1.0 : theta < 0.0 ? -1.0 : 0.0);
            e = s * small_amp * (2.0 * frac - 1.0);
        } else {
            e = sgn * (bias_base + bias_span * frac);
        }
        return {v, theta, d + e};
    }

    Vec measure_brake(const Vec& x, const Vec& env) const {
        double d = x[brake::D];
        double v = x[brake::V];
        double color = env[brake::ENV_COLOR];
        double traffic = env[brake::ENV_TRAFFIC];

        std::uint64_t h = mix64(seed ^ 0x3c6ef372fe94f82aULL);
        h = absorb(h, static_cast<std::uint64_t>(quantize(d, quant)));
        h = absorb(h, static_cast<std::uint64_t>(quantize(v, quant)));
        h = absorb(h, static_cast<std::uint64_t>(quantize(color, quant)));
        h = absorb(h, static_cast<std::uint64_t>(quantize(traffic, quant)));

        if (d > far_range) {
            double gate = to_unit(mix64(h ^ 0xa54ff53a5f1d36f1ULL));
            if (gate > miss_gate)
                return {v, std::numeric_limits<double>::infinity()};
        }
        double lo, hi;
        if (d < near_range) {
            lo = near_lo;
            hi = near_hi;
        } else if (color > color_gate) {
            lo = color_lo;
            hi = color_hi;
        } else {
            lo = mid_lo;
            hi = mid_hi;
        }
        double frac = to_unit(mix64(h ^ 0x510e527fade682d1ULL));
        double eta = lo + frac * (hi - lo);
        double d_hat = std::max(d * (1.0 + eta), 1e-3);
        return {v, d_hat};
    }
};

inline Emulator default_emulator(ScenarioId id) {
    Emulator em;
    em.scenario = id;
    return em;
}

// ---- parametric controllers ----

inline double controller_lane(const Vec& p, const Vec& y, double steer_max) {
    double u = p[0] * y[1] + p[1] * y[2];
    return std::min(std::max(u, -steer_max), steer_max);
}

inline double controller_brake(const Vec& p, const Vec& y, double brake_margin) {
    double v_hat = y[0], d_hat = y[1];
    if (std::isinf(d_hat)) return 0.0;  // nothing detected yet: cruise
    if (d_hat <= 0.0) d_hat = 1e-3;
    double u;
    if (d_hat <= p[0]) {
        u = v_hat * v_hat / (2.0 * std::max(d_hat - brake_margin, 1e-3));
    } else {
        u = v_hat - p[1];
    }
    return std::min(std::max(u, 0.0), 2.5);
}

inline double control(const Scenario& sc, const Vec& p, const Vec& y) {
    double u = sc.id == ScenarioId::lane_keeping
                   ? controller_lane(p, y, sc.steer_max)
                   : controller_brake(p, y, sc.brake_margin);
    return std::min(std::max(u, sc.control_bounds.lo[0]), sc.control_bounds.hi[0]);
}

inline Vec step_dynamics(const Scenario& sc, const Vec& x, double u) {
    return sc.id == ScenarioId::lane_keeping
               ? lane_keeping_dynamics(x, u, sc.dt, sc)
               : braking_dynamics(x, u, sc.dt, sc);
}

// ---- closed loop ----

inline bool all_finite(const Vec& x) {
    for (double v : x)
        if (!std::isfinite(v)) return false;
    return true;
}

inline Trace simulate(const Scenario& sc, const Emulator& em, const Vec& p,
                      const Vec& x0, const Vec& env) {
    Trace tr;
    tr.dt = sc.dt;
    tr.env = env;
    tr.states.reserve(sc.H + 1);
    tr.outputs.reserve(sc.H + 1);
    tr.inputs.reserve(sc.H);
    Vec x = x0;
    for (int i = 0; i <= sc.H; ++i) {
        if (!all_finite(x)) {
            tr.fault = true;
            return tr;
        }
        tr.states.push_back(x);
        tr.outputs.push_back(em.measure(x, env));
        if (i == sc.H) break;
        double u = control(sc, p, tr.outputs.back());
        tr.inputs.push_back({u});
        x = step_dynamics(sc, x, u);
    }
    return tr;
}

// true iff re-integrating the recorded inputs reproduces the recorded states
inline bool replay_check(const Trace& tr, const Scenario& sc, double tol = 1e-9) {
    if (tr.states.empty()) throw std::runtime_error("replay_check: empty trace");
    if (static_cast<int>(tr.states[0].size()) != state_dim(sc.id))
        throw std::runtime_error("replay_check: state dimension mismatch");
    Vec x = tr.states[0];
    for (std::size_t i = 0; i < tr.inputs.size(); ++i) {
        x = step_dynamics(sc, x, tr.inputs[i][0]);
        if (i + 1 >= tr.states.size()) return false;
        for (std::size_t j = 0; j < x.size(); ++j)
            if (std::abs(x[j] - tr.states[i + 1][j]) > tol) return false;
    }
    return true;
}

}  // namespace surro
