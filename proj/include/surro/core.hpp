#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace surro {

using Vec = std::vector<double>;

enum class ScenarioId { lane_keeping, braking };

inline std::string to_string(ScenarioId id) {
    return id == ScenarioId::lane_keeping ? "lane_keeping" : "braking";
}

inline ScenarioId scenario_from_string(const std::string& s) {
    if (s == "lane_keeping") return ScenarioId::lane_keeping;
    if (s == "braking") return ScenarioId::braking;
    throw std::runtime_error("unknown scenario id: " + s);
}

// simulator state layout, lane keeping
namespace lane {
constexpr int X = 0, Y = 1, THETA_AV = 2, THETA_R = 3, V = 4, D = 5;
constexpr int STATE_DIM = 6;
// measurement layout: v_hat, theta_hat, d_hat
constexpr int MEAS_DIM = 3;
// model state layout: d, theta, v
constexpr int MODEL_DIM = 3;
}  // namespace lane

// simulator state layout, emergency braking
namespace brake {
constexpr int D = 0, V = 1, D_CAR = 2, V_REAR = 3;
constexpr int STATE_DIM = 4;
// measurement layout: v_hat, d_hat
constexpr int MEAS_DIM = 2;
// model state layout: d, v
constexpr int MODEL_DIM = 2;
// env layout
constexpr int ENV_COLOR = 0, ENV_TRAFFIC = 1;
constexpr int ENV_DIM = 2;
}  // namespace brake

inline int state_dim(ScenarioId id) {
    return id == ScenarioId::lane_keeping ? lane::STATE_DIM : brake::STATE_DIM;
}
inline int meas_dim(ScenarioId id) {
    return id == ScenarioId::lane_keeping ? lane::MEAS_DIM : brake::MEAS_DIM;
}
inline int model_dim(ScenarioId id) {
    return id == ScenarioId::lane_keeping ? lane::MODEL_DIM : brake::MODEL_DIM;
}
inline int env_dim(ScenarioId id) {
    return id == ScenarioId::lane_keeping ? 0 : brake::ENV_DIM;
}

struct Box {
    Vec lo, hi;

    std::size_t dim() const { return lo.size(); }

    bool valid() const {
        if (lo.size() != hi.size()) return false;
        for (std::size_t i = 0; i < lo.size(); ++i)
            if (!(lo[i] <= hi[i])) return false;
        return true;
    }

    bool contains(const Vec& x, double tol = 0.0) const {
        if (x.size() != lo.size()) return false;
        for (std::size_t i = 0; i < lo.size(); ++i)
            if (x[i] < lo[i] - tol || x[i] > hi[i] + tol) return false;
        return true;
    }

    double width(std::size_t i) const { return hi[i] - lo[i]; }

    Vec center() const {
        Vec c(lo.size());
        for (std::size_t i = 0; i < lo.size(); ++i) c[i] = 0.5 * (lo[i] + hi[i]);
        return c;
    }

    Vec clamp(Vec x) const {
        for (std::size_t i = 0; i < lo.size(); ++i) {
            if (x[i] < lo[i]) x[i] = lo[i];
            if (x[i] > hi[i]) x[i] = hi[i];
        }
        return x;
    }

    // smallest box covering both; an empty box (dim 0) acts as identity
    static Box join(const Box& a, const Box& b) {
        if (a.dim() == 0) return b;
        if (b.dim() == 0) return a;
        Box r = a;
        for (std::size_t i = 0; i < r.lo.size(); ++i) {
            if (b.lo[i] < r.lo[i]) r.lo[i] = b.lo[i];
            if (b.hi[i] > r.hi[i]) r.hi[i] = b.hi[i];
        }
        return r;
    }
};

// closed-loop record over one episode: states has one more entry than inputs,
// outputs is aligned with states (the final state is measured but not acted on)
struct Trace {
    double dt = 0.0;
    Vec env;
    std::vector<Vec> states;
    std::vector<Vec> outputs;
    std::vector<Vec> inputs;
    bool fault = false;

    int steps() const { return static_cast<int>(inputs.size()); }
};

// projection from simulator state to surrogate model state
inline Vec alpha(const Vec& x_s, ScenarioId id) {
    if (id == ScenarioId::lane_keeping) {
        if (x_s.size() != lane::STATE_DIM)
            throw std::runtime_error("alpha: bad lane state dimension");
        return {x_s[lane::D], x_s[lane::THETA_AV] - x_s[lane::THETA_R], x_s[lane::V]};
    }
    if (x_s.size() != brake::STATE_DIM)
        throw std::runtime_error("alpha: bad braking state dimension");
    return {x_s[brake::D], x_s[brake::V]};
}

// image of a simulator-state box under alpha (exact: alpha is affine)
inline Box alpha_box(const Box& x0, ScenarioId id) {
    if (id == ScenarioId::lane_keeping) {
        Box b;
        b.lo = {x0.lo[lane::D], x0.lo[lane::THETA_AV] - x0.hi[lane::THETA_R], x0.lo[lane::V]};
        b.hi = {x0.hi[lane::D], x0.hi[lane::THETA_AV] - x0.lo[lane::THETA_R], x0.hi[lane::V]};
        return b;
    }
    Box b;
    b.lo = {x0.lo[brake::D], x0.lo[brake::V]};
    b.hi = {x0.hi[brake::D], x0.hi[brake::V]};
    return b;
}

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// fixed-chunk parallel map; results must be written to caller-owned slots so
// the outcome is independent of scheduling
template <typename F>
void parallel_for(int n, int threads, F&& body) {
    if (n <= 0) return;
    if (threads <= 1 || n == 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    int workers = std::min(threads, n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (int i = w; i < n; i += workers) body(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace surro
