#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "surro/core.hpp"
#include "surro/rng.hpp"
#include "surro/sim.hpp"
#include "surro/spec.hpp"
#include "surro/surrogate.hpp"

namespace surro {

// gradient search for controller parameters against the surrogate, with a
// CEGIS bank of output selections that defeated earlier candidates

struct SynthConfig {
    int restarts = 6;
    int max_gradient_steps = 60;
    double fd_epsilon = 1e-3;  // finite-difference step, fraction of bound width
    double step_init = 0.1;    // first ascent step, fraction of bound width
    double step_min = 1e-4;    // give up once backtracking shrinks below this
    int n_adversarial_rollouts = 10;
    double margin = 0.02;  // robustness slack required on the model
    int x0_grid = 9;
    int n_verify = 200;
    int max_bank_rounds = 8;
    int bank_add_cap = 8;  // worst violators banked per verification pass
    std::uint64_t seed = 0;
    int threads = 1;
};

struct BankEntry {
    Vec x0;
    Selection selection;
    double robustness = 0.0;  // value when the violation was recorded
};

struct AdversaryBank {
    std::vector<BankEntry> entries;
};

// center first so truncation keeps an interior point, then box corners,
// then stratified fill
inline std::vector<Vec> x0_grid_points(const Box& box, int n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("x0_grid_points: need at least one point");
    std::vector<Vec> pts;
    pts.push_back(box.center());
    const std::size_t d = box.dim();
    if (d < 20) {
        for (std::uint64_t mask = 0;
             mask < (1ULL << d) && static_cast<int>(pts.size()) < n; ++mask) {
            Vec c(d);
            for (std::size_t j = 0; j < d; ++j)
                c[j] = (mask >> j) & 1 ? box.hi[j] : box.lo[j];
            pts.push_back(std::move(c));
        }
    }
    if (static_cast<int>(pts.size()) < n) {
        Rng rng(derive_seed(seed, "x0grid", 0));
        auto fill = latin_hypercube(box, n - static_cast<int>(pts.size()), rng);
        for (auto& f : fill) pts.push_back(std::move(f));
    }
    return pts;
}

inline double objective(const Scenario& sc, const SurrogateModel& m,
                        const Formula& phi_m, const Vec& p,
                        const SynthConfig& cfg, const AdversaryBank& bank,
                        std::uint64_t adv_seed) {
    auto x0s = x0_grid_points(m.x0_box, cfg.x0_grid, cfg.seed);
    const int per = cfg.n_adversarial_rollouts + 1;  // sampled selectors + greedy
    const int grid = static_cast<int>(x0s.size()) * per;
    const int total = grid + static_cast<int>(bank.entries.size());
    std::vector<double> rob(total);
    parallel_for(total, cfg.threads, [&](int t) {
        if (t < grid) {
            int i = t / per, a = t % per;
            if (a < cfg.n_adversarial_rollouts) {
                Rng r(derive_seed(adv_seed, "sel",
                                  static_cast<std::uint64_t>(i) * 256 + a));
                RandomSelector sel{&r, a % 2 == 0};
                rob[t] = rollout_model(sc, m, p, phi_m, x0s[i], sel).robustness;
            } else {
                auto greedy = make_greedy_selector(sc, m, p, phi_m);
                rob[t] = rollout_model(sc, m, p, phi_m, x0s[i], greedy).robustness;
            }
        } else {
            const auto& e = bank.entries[t - grid];
            ReplaySelector sel{&e.selection};
            rob[t] = rollout_model(sc, m, p, phi_m, e.x0, sel).robustness;
        }
    });
    double j = std::numeric_limits<double>::infinity();
    for (double r : rob) j = std::min(j, r);
    return j;
}

inline double objective(const Scenario& sc, const SurrogateModel& m,
                        const Formula& phi_m, const Vec& p,
                        const SynthConfig& cfg, const AdversaryBank& bank) {
    return objective(sc, m, phi_m, p, cfg, bank, derive_seed(cfg.seed, "adv", 0));
}

// central differences with probes clamped into bounds; near a face the
// divisor is the realized displacement, so the estimate degrades to one-sided
template <typename F>
Vec fd_gradient(F&& f, const Vec& p, const Box& bounds, double fd_epsilon) {
    Vec g(p.size(), 0.0);
    for (std::size_t k = 0; k < p.size(); ++k) {
        double h = fd_epsilon * bounds.width(k);
        if (h <= 0.0) continue;
        Vec ph = p, pl = p;
        ph[k] = std::min(p[k] + h, bounds.hi[k]);
        pl[k] = std::max(p[k] - h, bounds.lo[k]);
        double denom = ph[k] - pl[k];
        if (denom <= 0.0) continue;
        g[k] = (f(ph) - f(pl)) / denom;
    }
    return g;
}

struct AscentPoint {
    Vec p;
    double J = 0.0;
};

struct RestartLog {
    Vec p_start;
    std::vector<AscentPoint> trajectory;  // accepted points only
    std::vector<int> bank_added;          // per verification round
    bool abandoned = false;
    bool reached_margin = false;
    bool verified = false;
};

struct SynthResult {
    bool success = false;
    Vec p;
    double J = -std::numeric_limits<double>::infinity();
    int restarts_used = 0;
    AdversaryBank bank;
    std::vector<RestartLog> log;
};

inline SynthResult synthesize(const Scenario& sc, const SurrogateModel& m,
                              const Formula& phi_m, const Vec& p_init,
                              const Box& bounds, const SynthConfig& cfg) {
    if (!bounds.valid() || bounds.dim() == 0)
        throw std::invalid_argument("synthesize: empty parameter bounds");
    if (cfg.restarts < 1 || cfg.margin < 0.0)
        throw std::invalid_argument("synthesize: bad config");

    SynthResult res;
    res.p = bounds.clamp(p_init);

    for (int r = 0; r < cfg.restarts; ++r) {
        RestartLog rl;
        Vec p = r == 0 ? bounds.clamp(p_init)
                       : Rng(derive_seed(cfg.seed, "restart",
                                         static_cast<std::uint64_t>(r)))
                             .point_in(bounds);
        rl.p_start = p;

        for (int round = 0; round < cfg.max_bank_rounds; ++round) {
            std::uint64_t adv_seed = derive_seed(
                cfg.seed, "adv", static_cast<std::uint64_t>(r) * 64 + round);
            auto j_of = [&](const Vec& q) {
                return objective(sc, m, phi_m, q, cfg, res.bank, adv_seed);
            };

            double j = j_of(p);
            if (!std::isfinite(j)) {
                rl.abandoned = true;
                break;
            }
            rl.trajectory.push_back({p, j});

            double step = cfg.step_init;
            for (int g = 0; g < cfg.max_gradient_steps && step >= cfg.step_min;
                 ++g) {
                Vec grad = fd_gradient(j_of, p, bounds, cfg.fd_epsilon);
                Vec dir(p.size(), 0.0);
                double norm = 0.0;
                for (std::size_t k = 0; k < p.size(); ++k) {
                    dir[k] = grad[k] * bounds.width(k);
                    norm += dir[k] * dir[k];
                }
                norm = std::sqrt(norm);
                if (norm <= 0.0) break;
                bool improved = false;
                while (step >= cfg.step_min) {
                    Vec q = p;
                    for (std::size_t k = 0; k < p.size(); ++k)
                        q[k] += step * bounds.width(k) * dir[k] / norm;
                    q = bounds.clamp(q);
                    double jq = j_of(q);
                    if (std::isfinite(jq) && jq > j) {
                        p = std::move(q);
                        j = jq;
                        rl.trajectory.push_back({p, j});
                        improved = true;
                        break;
                    }
                    step *= 0.5;
                }
                if (!improved) break;
            }

            if (j < cfg.margin) break;
            rl.reached_margin = true;

            Rng vr(derive_seed(cfg.seed, "verify",
                               static_cast<std::uint64_t>(r) * 64 + round));
            std::vector<BankEntry> violators;
            for (int v = 0; v < cfg.n_verify; ++v) {
                Vec x0 = vr.point_in(m.x0_box);
                RandomSelector sel{&vr, v % 2 == 0};
                auto ro = rollout_model(sc, m, p, phi_m, x0, sel);
                if (ro.robustness < 0.0)
                    violators.push_back(
                        {std::move(x0), std::move(ro.selection), ro.robustness});
            }
            if (violators.empty()) {
                rl.verified = true;
                res.log.push_back(std::move(rl));
                res.success = true;
                res.p = std::move(p);
                res.J = j;
                res.restarts_used = r + 1;
                return res;
            }
            std::stable_sort(violators.begin(), violators.end(),
                             [](const BankEntry& a, const BankEntry& b) {
                                 return a.robustness < b.robustness;
                             });
            int added = std::min(static_cast<int>(violators.size()),
                                 cfg.bank_add_cap);
            for (int i = 0; i < added; ++i)
                res.bank.entries.push_back(std::move(violators[i]));
            rl.bank_added.push_back(added);
        }

        if (!rl.trajectory.empty() && rl.trajectory.back().J > res.J) {
            res.J = rl.trajectory.back().J;
            res.p = rl.trajectory.back().p;
        }
        res.log.push_back(std::move(rl));
        res.restarts_used = r + 1;
    }
    return res;
}

}  // namespace surro
