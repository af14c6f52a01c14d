#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "surro/core.hpp"
#include "surro/gp.hpp"
#include "surro/rng.hpp"
#include "surro/sim.hpp"
#include "surro/spec.hpp"

namespace surro {

using History = std::vector<std::pair<Vec, double>>;

struct SearchSpace {
    Box box;  // initial-state dims followed by environment dims
    std::vector<std::string> names;
};

inline SearchSpace default_search_space(const Scenario& sc) {
    SearchSpace sp;
    sp.box = sc.x0_box;
    sp.names = state_var_names(sc.id, false);
    auto env_names = env_var_names(sc.id);
    for (std::size_t i = 0; i < env_names.size(); ++i) {
        sp.box.lo.push_back(sc.env_box.lo[i]);
        sp.box.hi.push_back(sc.env_box.hi[i]);
        sp.names.push_back(env_names[i]);
    }
    return sp;
}

inline std::pair<Vec, Vec> point_to_x0_env(const Scenario& sc, const Vec& point) {
    const int sd = state_dim(sc.id);
    Vec x0(point.begin(), point.begin() + sd);
    Vec env(point.begin() + sd, point.end());
    couple_x0(sc.id, x0);
    return {std::move(x0), std::move(env)};
}

struct FalsifyResult {
    std::vector<Trace> counterexamples;
    double min_robustness = std::numeric_limits<double>::infinity();
    int evaluations = 0;
    History history;
    Vec best_point;
};

namespace detail {

constexpr int kBoInit = 10;
constexpr int kBoCandidates = 1000;

inline Vec normalize_to_unit(const Box& box, const Vec& p) {
    Vec u(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        double w = box.hi[i] - box.lo[i];
        u[i] = w > 0.0 ? (p[i] - box.lo[i]) / w : 0.0;
    }
    return u;
}

inline Vec propose_from_gp(const Gp& gp, const Box& box, double best,
                           bool usable, std::uint64_t seed, std::size_t round) {
    Rng crng(derive_seed(seed, "cand", static_cast<std::uint64_t>(round)));
    Vec pick;
    double pick_ei = -1.0;
    for (int c = 0; c < kBoCandidates; ++c) {
        Vec cand = crng.point_in(box);
        if (!usable) return cand;  // uniform fallback, first draw
        auto pr = gp.predict(normalize_to_unit(box, cand));
        double ei = expected_improvement(pr.mean, pr.sd, best);
        if (ei > pick_ei) {
            pick_ei = ei;
            pick = std::move(cand);
        }
    }
    return pick;
}

}  // namespace detail

// next sample for minimizing robustness given the evaluations so far:
// Latin-hypercube warmup, then the max expected-improvement candidate under
// a Gaussian-process fit of the history
inline Vec bayesopt_propose(const History& history, const Box& box,
                            std::uint64_t seed) {
    const std::size_t round = history.size();
    if (round < detail::kBoInit) {
        Rng lrng(derive_seed(seed, "lhs", 0));
        auto pts = latin_hypercube(box, detail::kBoInit, lrng);
        return pts[round];
    }
    Gp gp(static_cast<int>(box.dim()));
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [pt, y] : history) {
        if (!std::isfinite(y)) continue;
        gp.add(detail::normalize_to_unit(box, pt), y);
        best = std::min(best, y);
    }
    bool usable = gp.healthy() && gp.size() > 0;
    return detail::propose_from_gp(gp, box, best, usable, seed, round);
}

namespace detail {

template <typename Propose>
FalsifyResult search_loop(const Scenario& sc, const Emulator& em, const Vec& p,
                          const Formula& phi_s, const SearchSpace& space,
                          int budget, int early_stop, Propose&& next_point) {
    FalsifyResult res;
    for (int e = 0; e < budget; ++e) {
        Vec point = next_point(e, res);
        auto [x0, env] = point_to_x0_env(sc, point);
        Trace tr = simulate(sc, em, p, x0, env);
        double rob = tr.fault ? std::numeric_limits<double>::infinity()
                              : robustness(phi_s, tr.states, 0);
        if (rob < res.min_robustness) {
            res.min_robustness = rob;
            res.best_point = point;
        }
        res.history.push_back({std::move(point), rob});
        if (rob < 0.0) res.counterexamples.push_back(std::move(tr));
        if (static_cast<int>(res.counterexamples.size()) >= early_stop) break;
    }
    res.evaluations = static_cast<int>(res.history.size());
    return res;
}

}  // namespace detail

inline FalsifyResult falsify(const Scenario& sc, const Emulator& em, const Vec& p,
                             const Formula& phi_s, const SearchSpace& space,
                             int budget, std::uint64_t seed,
                             int early_stop = 20) {
    Gp gp(static_cast<int>(space.box.dim()));
    double best = std::numeric_limits<double>::infinity();
    std::size_t fed = 0;
    std::vector<Vec> lhs;
    return detail::search_loop(
        sc, em, p, phi_s, space, budget, early_stop,
        [&](int e, const FalsifyResult& res) {
            for (; fed < res.history.size(); ++fed) {
                const auto& [pt, y] = res.history[fed];
                if (!std::isfinite(y)) continue;
                gp.add(detail::normalize_to_unit(space.box, pt), y);
                best = std::min(best, y);
            }
            if (e < detail::kBoInit) {
                if (lhs.empty()) {
                    Rng lrng(derive_seed(seed, "lhs", 0));
                    lhs = latin_hypercube(space.box, detail::kBoInit, lrng);
                }
                return lhs[static_cast<std::size_t>(e)];
            }
            bool usable = gp.healthy() && gp.size() > 0;
            return detail::propose_from_gp(gp, space.box, best, usable, seed,
                                           static_cast<std::size_t>(e));
        });
}

inline FalsifyResult random_search(const Scenario& sc, const Emulator& em,
                                   const Vec& p, const Formula& phi_s,
                                   const SearchSpace& space, int budget,
                                   std::uint64_t seed, int early_stop = 20) {
    Rng rng(seed);
    return detail::search_loop(
        sc, em, p, phi_s, space, budget, early_stop,
        [&](int, const FalsifyResult&) { return rng.point_in(space.box); });
}

}  // namespace surro
