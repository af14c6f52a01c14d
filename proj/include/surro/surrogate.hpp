#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "surro/core.hpp"
#include "surro/rng.hpp"
#include "surro/sim.hpp"
#include "surro/spec.hpp"

namespace surro {

// interval-valued perception surrogate: expert dynamics on the projected
// state plus per-component error bands learned over box domains

struct Cluster {
    Box domain;  // over the scenario's domain dims of the model state
    Vec a_low;
    double b_low = 0.0;
    Vec a_up;
    double b_up = 0.0;

    double low(const Vec& xd) const { return dot(a_low, xd) + b_low; }
    double up(const Vec& xd) const { return dot(a_up, xd) + b_up; }
};

struct ComponentError {
    std::vector<Cluster> clusters;
    std::optional<Box> miss_region;  // where the reading may be +inf
};

struct SurrogateModel {
    ScenarioId scenario = ScenarioId::lane_keeping;
    std::vector<int> h_star;       // output i reads model state h_star[i]
    std::vector<int> domain_dims;  // model dims spanning the cluster domains
    std::vector<ComponentError> components;  // one per output component
    Box x0_box;                              // over the model state
};

// components whose perception error gets learned; the rest pass through
inline std::vector<int> modeled_components(ScenarioId id) {
    return id == ScenarioId::lane_keeping ? std::vector<int>{2}
                                          : std::vector<int>{1};
}

inline SurrogateModel zero_error_surrogate(const Scenario& sc) {
    SurrogateModel m;
    m.scenario = sc.id;
    if (sc.id == ScenarioId::lane_keeping) {
        m.h_star = {2, 1, 0};
        m.domain_dims = {0, 1};
    } else {
        m.h_star = {1, 0};
        m.domain_dims = {0};
    }
    m.components.resize(meas_dim(sc.id));
    m.x0_box = alpha_box(sc.x0_box, sc.id);
    return m;
}

inline Vec domain_coords(const SurrogateModel& m, const Vec& x_m) {
    Vec xd(m.domain_dims.size());
    for (std::size_t j = 0; j < xd.size(); ++j) xd[j] = x_m[m.domain_dims[j]];
    return xd;
}

inline Vec f_m_step(const Scenario& sc, const Vec& x_m, double u) {
    if (sc.id == ScenarioId::lane_keeping) {
        double d = x_m[0], theta = x_m[1], v = x_m[2];
        return {d + sc.dt * v * std::sin(theta),
                theta + sc.dt * (v / sc.wheelbase) * std::tan(u), v};
    }
    double d = x_m[0], v = x_m[1];
    return {d - sc.dt * v, std::max(0.0, v - sc.dt * u)};
}

struct OutputInterval {
    double lo = 0.0, hi = 0.0;
};

struct ComponentOutput {
    double nominal = 0.0;
    std::vector<OutputInterval> intervals;  // absolute values, empty = exact
    bool may_miss = false;
};

inline std::vector<ComponentOutput> output_set(const SurrogateModel& m,
                                               const Vec& x_m) {
    Vec xd = domain_coords(m, x_m);
    std::vector<ComponentOutput> outs(m.components.size());
    for (std::size_t i = 0; i < outs.size(); ++i) {
        outs[i].nominal = x_m[m.h_star[i]];
        for (const auto& cl : m.components[i].clusters) {
            if (!cl.domain.contains(xd)) continue;
            outs[i].intervals.push_back(
                {outs[i].nominal + cl.low(xd), outs[i].nominal + cl.up(xd)});
        }
        const auto& miss = m.components[i].miss_region;
        outs[i].may_miss = miss.has_value() && miss->contains(xd);
    }
    return outs;
}

inline Vec nominal_output(const SurrogateModel& m, const Vec& x_m) {
    Vec y(m.h_star.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = x_m[m.h_star[i]];
    return y;
}

inline bool contains(const SurrogateModel& m, const Vec& x_m, const Vec& y,
                     double tol = 1e-9) {
    auto outs = output_set(m, x_m);
    if (y.size() != outs.size()) return false;
    for (std::size_t i = 0; i < outs.size(); ++i) {
        if (std::isinf(y[i])) {
            if (y[i] > 0.0 && outs[i].may_miss) continue;
            return false;
        }
        if (outs[i].intervals.empty()) {
            if (std::abs(y[i] - outs[i].nominal) > tol) return false;
            continue;
        }
        bool in = false;
        for (const auto& iv : outs[i].intervals)
            if (y[i] >= iv.lo - tol && y[i] <= iv.hi + tol) {
                in = true;
                break;
            }
        if (!in) return false;
    }
    return true;
}

// ---- adversarial output selection for model rollouts ----

struct Choice {
    bool miss = false;
    int interval = 0;
    double frac = 0.5;  // position inside the chosen interval
};

using StepChoices = std::vector<Choice>;
using Selection = std::vector<StepChoices>;

inline double resolve_choice(const ComponentOutput& o, const Choice& c) {
    if (c.miss && o.may_miss) return std::numeric_limits<double>::infinity();
    if (o.intervals.empty()) return o.nominal;
    int n = static_cast<int>(o.intervals.size());
    int idx = c.interval % n;
    if (idx < 0) idx += n;
    double f = std::min(std::max(c.frac, 0.0), 1.0);
    const auto& iv = o.intervals[idx];
    return iv.lo + f * (iv.hi - iv.lo);
}

struct NominalSelector {
    StepChoices operator()(int, const Vec&,
                           const std::vector<ComponentOutput>& opts) const {
        return StepChoices(opts.size());
    }
};

struct RandomSelector {
    Rng* rng = nullptr;
    bool endpoints = true;  // false picks uniform interior points, never miss

    StepChoices operator()(int, const Vec&,
                           const std::vector<ComponentOutput>& opts) const {
        StepChoices ch(opts.size());
        for (std::size_t c = 0; c < opts.size(); ++c) {
            const auto& o = opts[c];
            if (o.intervals.empty() && !o.may_miss) continue;
            if (endpoints && o.may_miss && rng->uniform01() < 0.5) {
                ch[c].miss = true;
                continue;
            }
            if (!o.intervals.empty()) {
                ch[c].interval = static_cast<int>(rng->index(o.intervals.size()));
                ch[c].frac = endpoints ? (rng->uniform01() < 0.5 ? 0.0 : 1.0)
                                       : rng->uniform01();
            }
        }
        return ch;
    }
};

struct ReplaySelector {
    const Selection* sel = nullptr;

    StepChoices operator()(int step, const Vec&,
                           const std::vector<ComponentOutput>& opts) const {
        StepChoices ch(opts.size());
        if (step < static_cast<int>(sel->size())) {
            const auto& rec = (*sel)[step];
            for (std::size_t c = 0; c < ch.size() && c < rec.size(); ++c)
                ch[c] = rec[c];
        }
        return ch;
    }
};

// one-step lookahead: picks the interval endpoints (or a miss) that minimize
// the worst predicate margin at the next model state
struct GreedySelector {
    const Scenario* sc = nullptr;
    const SurrogateModel* m = nullptr;
    const Vec* p = nullptr;
    std::vector<Predicate> preds;
    int combo_cap = 64;

    StepChoices operator()(int, const Vec& x,
                           const std::vector<ComponentOutput>& opts) const {
        std::vector<std::vector<Choice>> cands(opts.size());
        long total = 1;
        for (std::size_t c = 0; c < opts.size(); ++c) {
            auto& list = cands[c];
            if (opts[c].intervals.empty()) {
                list.push_back(Choice{});
            } else {
                for (int i = 0; i < static_cast<int>(opts[c].intervals.size());
                     ++i) {
                    list.push_back(Choice{false, i, 0.0});
                    list.push_back(Choice{false, i, 1.0});
                }
            }
            if (opts[c].may_miss) list.push_back(Choice{true, 0, 0.0});
            total *= static_cast<long>(list.size());
        }
        long limit = std::min<long>(total, combo_cap);
        StepChoices best(opts.size());
        double best_score = std::numeric_limits<double>::infinity();
        for (long combo = 0; combo < limit; ++combo) {
            StepChoices ch(opts.size());
            long rem = combo;
            for (std::size_t c = 0; c < opts.size(); ++c) {
                long n = static_cast<long>(cands[c].size());
                ch[c] = cands[c][rem % n];
                rem /= n;
            }
            Vec y(opts.size());
            for (std::size_t c = 0; c < opts.size(); ++c)
                y[c] = resolve_choice(opts[c], ch[c]);
            Vec nx = f_m_step(*sc, x, control(*sc, *p, y));
            double margin = std::numeric_limits<double>::infinity();
            for (const auto& pr : preds)
                margin = std::min(margin, pr.b - dot(pr.a, nx));
            if (margin < best_score) {
                best_score = margin;
                best = ch;
            }
        }
        return best;
    }
};

inline GreedySelector make_greedy_selector(const Scenario& sc,
                                           const SurrogateModel& m, const Vec& p,
                                           const Formula& spec_m) {
    GreedySelector g;
    g.sc = &sc;
    g.m = &m;
    g.p = &p;
    g.preds = flatten_predicates(spec_m);
    return g;
}

struct ModelRollout {
    Trace trace;
    double robustness = 0.0;
    Selection selection;
};

template <typename Selector>
ModelRollout rollout_model(const Scenario& sc, const SurrogateModel& m,
                           const Vec& p, const Formula& spec_m, const Vec& x0,
                           Selector&& sel) {
    ModelRollout out;
    out.trace.dt = sc.dt;
    out.trace.states.reserve(sc.H + 1);
    out.trace.outputs.reserve(sc.H + 1);
    out.trace.inputs.reserve(sc.H);
    out.selection.reserve(sc.H + 1);
    Vec x = x0;
    for (int i = 0; i <= sc.H; ++i) {
        auto opts = output_set(m, x);
        StepChoices ch = sel(i, x, opts);
        ch.resize(opts.size());
        Vec y(opts.size());
        for (std::size_t c = 0; c < opts.size(); ++c)
            y[c] = resolve_choice(opts[c], ch[c]);
        out.trace.states.push_back(x);
        out.trace.outputs.push_back(std::move(y));
        out.selection.push_back(std::move(ch));
        if (i == sc.H) break;
        double u = control(sc, p, out.trace.outputs.back());
        out.trace.inputs.push_back({u});
        x = f_m_step(sc, x, u);
    }
    out.robustness = robustness(spec_m, out.trace.states, 0);
    return out;
}

// ---- structural comparison (drives the stagnation check) ----

namespace detail {

inline bool vec_close(const Vec& a, const Vec& b, double tol) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::abs(a[i] - b[i]) > tol) return false;
    return true;
}

inline bool cluster_less(const Cluster& a, const Cluster& b) {
    if (a.domain.lo != b.domain.lo) return a.domain.lo < b.domain.lo;
    if (a.domain.hi != b.domain.hi) return a.domain.hi < b.domain.hi;
    if (a.b_low != b.b_low) return a.b_low < b.b_low;
    return a.b_up < b.b_up;
}

}  // namespace detail

inline bool model_equal(const SurrogateModel& m1, const SurrogateModel& m2,
                        double tol = 1e-6) {
    if (m1.scenario != m2.scenario || m1.h_star != m2.h_star ||
        m1.domain_dims != m2.domain_dims ||
        m1.components.size() != m2.components.size())
        return false;
    for (std::size_t i = 0; i < m1.components.size(); ++i) {
        const auto& c1 = m1.components[i];
        const auto& c2 = m2.components[i];
        if (c1.clusters.size() != c2.clusters.size()) return false;
        if (c1.miss_region.has_value() != c2.miss_region.has_value())
            return false;
        if (c1.miss_region &&
            (!detail::vec_close(c1.miss_region->lo, c2.miss_region->lo, tol) ||
             !detail::vec_close(c1.miss_region->hi, c2.miss_region->hi, tol)))
            return false;
        auto s1 = c1.clusters;
        auto s2 = c2.clusters;
        std::sort(s1.begin(), s1.end(), detail::cluster_less);
        std::sort(s2.begin(), s2.end(), detail::cluster_less);
        for (std::size_t j = 0; j < s1.size(); ++j) {
            if (!detail::vec_close(s1[j].domain.lo, s2[j].domain.lo, tol) ||
                !detail::vec_close(s1[j].domain.hi, s2[j].domain.hi, tol) ||
                !detail::vec_close(s1[j].a_low, s2[j].a_low, tol) ||
                !detail::vec_close(s1[j].a_up, s2[j].a_up, tol) ||
                std::abs(s1[j].b_low - s2[j].b_low) > tol ||
                std::abs(s1[j].b_up - s2[j].b_up) > tol)
                return false;
        }
    }
    return true;
}

}  // namespace surro
