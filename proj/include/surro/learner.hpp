#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "surro/core.hpp"
#include "surro/lp.hpp"
#include "surro/rng.hpp"
#include "surro/sim.hpp"
#include "surro/surrogate.hpp"

namespace surro {

struct Datapoint {
    Vec xd;  // domain coordinates of the projected state
    double e = 0.0;
    int trace_id = 0;
    int step = 0;
};

struct ComponentData {
    std::vector<Datapoint> finite;
    std::vector<Datapoint> misses;  // reading was +inf, residual undefined
};

struct LearnConfig {
    int k_init = 2;
    int k_max = 8;
    double width_threshold = 0.2;
    int kmeans_restarts = 4;
    std::uint64_t seed = 0;
    double coeff_cap = 10.0;
    Vec feature_scaling;  // per-dim divisors (xd dims ++ residual); empty = auto
};

struct ComponentLearnStats {
    int component = 0;
    int k_used = 0;
    int datapoints = 0;
    int misses = 0;
    double mean_width = 0.0;
    int degraded_fits = 0;
    bool k_reduced = false;
    bool unchanged = false;
};

struct LearnStats {
    std::vector<ComponentLearnStats> components;
};

inline ComponentData extract_datapoints(const std::vector<Trace>& traces,
                                        const SurrogateModel& m, int component) {
    ComponentData data;
    for (std::size_t t = 0; t < traces.size(); ++t) {
        const Trace& tr = traces[t];
        std::size_t usable = std::min(tr.states.size(), tr.outputs.size());
        for (std::size_t s = 0; s + 1 < usable; ++s) {
            Vec xm = alpha(tr.states[s], m.scenario);
            Datapoint dp;
            dp.xd = domain_coords(m, xm);
            dp.trace_id = static_cast<int>(t);
            dp.step = static_cast<int>(s);
            double y = tr.outputs[s][component];
            if (std::isinf(y)) {
                data.misses.push_back(std::move(dp));
            } else {
                dp.e = y - xm[m.h_star[component]];
                data.finite.push_back(std::move(dp));
            }
        }
    }
    return data;
}

struct KmeansResult {
    std::vector<int> labels;
    std::vector<Vec> centroids;
    double wcss = 0.0;
    int k = 0;
};

namespace detail {

inline double dist2(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline KmeansResult kmeans_once(const std::vector<Vec>& pts, int k, Rng& rng) {
    const int n = static_cast<int>(pts.size());
    KmeansResult res;
    res.k = k;
    res.centroids.reserve(k);

    // k-means++ seeding
    res.centroids.push_back(pts[rng.index(n)]);
    Vec best_d2(n);
    while (static_cast<int>(res.centroids.size()) < k) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            double d2 = std::numeric_limits<double>::infinity();
            for (const auto& c : res.centroids)
                d2 = std::min(d2, dist2(pts[i], c));
            best_d2[i] = d2;
            total += d2;
        }
        int pick;
        if (total <= 0.0) {
            pick = static_cast<int>(rng.index(n));
        } else {
            double u = rng.uniform01() * total;
            double acc = 0.0;
            pick = n - 1;
            for (int i = 0; i < n; ++i) {
                acc += best_d2[i];
                if (u <= acc) {
                    pick = i;
                    break;
                }
            }
        }
        res.centroids.push_back(pts[pick]);
    }

    res.labels.assign(n, 0);
    for (int iter = 0; iter < 100; ++iter) {
        for (int i = 0; i < n; ++i) {
            int best = 0;
            double bd = dist2(pts[i], res.centroids[0]);
            for (int j = 1; j < k; ++j) {
                double d = dist2(pts[i], res.centroids[j]);
                if (d < bd) {
                    bd = d;
                    best = j;
                }
            }
            res.labels[i] = best;
        }
        // give an empty cluster the point farthest from its own centroid
        for (int j = 0; j < k; ++j) {
            bool empty = true;
            for (int i = 0; i < n && empty; ++i)
                if (res.labels[i] == j) empty = false;
            if (!empty) continue;
            int worst = -1;
            double wd = -1.0;
            for (int i = 0; i < n; ++i) {
                double d = dist2(pts[i], res.centroids[res.labels[i]]);
                if (d > wd) {
                    wd = d;
                    worst = i;
                }
            }
            res.labels[worst] = j;
            res.centroids[j] = pts[worst];
        }
        double moved = 0.0;
        for (int j = 0; j < k; ++j) {
            Vec mean(pts[0].size(), 0.0);
            int count = 0;
            for (int i = 0; i < n; ++i) {
                if (res.labels[i] != j) continue;
                for (std::size_t d = 0; d < mean.size(); ++d)
                    mean[d] += pts[i][d];
                ++count;
            }
            for (std::size_t d = 0; d < mean.size(); ++d)
                mean[d] /= static_cast<double>(count);
            moved = std::max(moved, std::sqrt(dist2(mean, res.centroids[j])));
            res.centroids[j] = std::move(mean);
        }
        if (moved < 1e-8) break;
    }

    for (int i = 0; i < n; ++i) {
        int best = 0;
        double bd = dist2(pts[i], res.centroids[0]);
        for (int j = 1; j < k; ++j) {
            double d = dist2(pts[i], res.centroids[j]);
            if (d < bd) {
                bd = d;
                best = j;
            }
        }
        res.labels[i] = best;
        res.wcss += bd;
    }
    return res;
}

}  // namespace detail

inline KmeansResult kmeans(const std::vector<Vec>& pts, int k,
                           std::uint64_t seed, int restarts) {
    if (pts.empty()) throw std::invalid_argument("kmeans: no points");
    std::vector<Vec> distinct = pts;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()),
                   distinct.end());
    k = std::min<int>(k, static_cast<int>(distinct.size()));
    k = std::max(k, 1);

    KmeansResult best;
    for (int r = 0; r < std::max(restarts, 1); ++r) {
        Rng rng(derive_seed(seed, "kmeans", r));
        KmeansResult cur = detail::kmeans_once(pts, k, rng);
        if (r == 0 || cur.wcss < best.wcss) best = std::move(cur);
    }
    return best;
}

inline SurrogateModel build_error_model(const std::vector<Trace>& cexs,
                                        const SurrogateModel& m_prev,
                                        const Scenario& sc,
                                        const LearnConfig& cfg,
                                        LearnStats* stats = nullptr) {
    if (cfg.k_init < 1 || cfg.k_init > cfg.k_max)
        throw std::invalid_argument("learn: bad cluster count range");
    SurrogateModel m = m_prev;
    if (stats) stats->components.clear();

    for (int comp : modeled_components(sc.id)) {
        ComponentLearnStats cs;
        cs.component = comp;
        auto data = extract_datapoints(cexs, m_prev, comp);
        cs.datapoints = static_cast<int>(data.finite.size());
        cs.misses = static_cast<int>(data.misses.size());
        if (data.finite.empty() && data.misses.empty()) {
            cs.unchanged = true;
            if (stats) stats->components.push_back(cs);
            continue;
        }

        const std::size_t fdim = m.domain_dims.size() + 1;
        if (!cfg.feature_scaling.empty() && cfg.feature_scaling.size() != fdim)
            throw std::invalid_argument("learn: feature_scaling dimension");

        ComponentError err;
        const auto& pts = data.finite;
        const int n = static_cast<int>(pts.size());

        if (n > 0) {
            double emin = pts[0].e, emax = pts[0].e;
            for (const auto& dp : pts) {
                emin = std::min(emin, dp.e);
                emax = std::max(emax, dp.e);
            }

            auto cluster_from = [&](const std::vector<int>& idxs) {
                Cluster cl;
                cl.domain.lo = cl.domain.hi = pts[idxs[0]].xd;
                std::vector<Vec> xs;
                Vec es;
                xs.reserve(idxs.size());
                for (int i : idxs) {
                    for (std::size_t d = 0; d < cl.domain.lo.size(); ++d) {
                        cl.domain.lo[d] = std::min(cl.domain.lo[d], pts[i].xd[d]);
                        cl.domain.hi[d] = std::max(cl.domain.hi[d], pts[i].xd[d]);
                    }
                    xs.push_back(pts[i].xd);
                    es.push_back(pts[i].e);
                }
                auto fit = fit_bounds(xs, es, cfg.coeff_cap);
                bool bad = fit.degraded;
                // bounds must not cross anywhere on the box domain
                std::size_t dims = cl.domain.dim();
                for (std::size_t mask = 0; mask < (1u << dims) && !bad; ++mask) {
                    Vec corner(dims);
                    for (std::size_t d = 0; d < dims; ++d)
                        corner[d] = (mask >> d) & 1 ? cl.domain.hi[d]
                                                    : cl.domain.lo[d];
                    if (fit.low(corner) > fit.up(corner) + 1e-12) bad = true;
                }
                if (bad) {
                    double lo = es[0], hi = es[0];
                    for (double e : es) {
                        lo = std::min(lo, e);
                        hi = std::max(hi, e);
                    }
                    fit.a_low.assign(dims, 0.0);
                    fit.a_up.assign(dims, 0.0);
                    fit.b_low = lo;
                    fit.b_up = hi;
                    ++cs.degraded_fits;
                }
                cl.a_low = fit.a_low;
                cl.b_low = fit.b_low;
                cl.a_up = fit.a_up;
                cl.b_up = fit.b_up;
                return cl;
            };

            if (emin == emax) {
                std::vector<int> all(n);
                for (int i = 0; i < n; ++i) all[i] = i;
                err.clusters.push_back(cluster_from(all));
                cs.k_used = 1;
                cs.mean_width = 0.0;
            } else {
                Vec divisors(fdim, 1.0);
                if (!cfg.feature_scaling.empty()) {
                    divisors = cfg.feature_scaling;
                } else {
                    Vec mean(fdim, 0.0);
                    auto feature = [&](int i, std::size_t d) {
                        return d + 1 < fdim ? pts[i].xd[d] : pts[i].e;
                    };
                    for (int i = 0; i < n; ++i)
                        for (std::size_t d = 0; d < fdim; ++d)
                            mean[d] += feature(i, d);
                    for (auto& v : mean) v /= n;
                    // population standard deviation per feature
                    Vec var(fdim, 0.0);
                    for (int i = 0; i < n; ++i)
                        for (std::size_t d = 0; d < fdim; ++d) {
                            double dv = feature(i, d) - mean[d];
                            var[d] += dv * dv;
                        }
                    for (std::size_t d = 0; d < fdim; ++d) {
                        double sd = std::sqrt(var[d] / n);
                        divisors[d] = sd > 0.0 ? sd : 1.0;
                    }
                }

                std::vector<Vec> feats(n, Vec(fdim, 0.0));
                for (int i = 0; i < n; ++i) {
                    for (std::size_t d = 0; d + 1 < fdim; ++d)
                        feats[i][d] = pts[i].xd[d] / divisors[d];
                    feats[i][fdim - 1] = pts[i].e / divisors[fdim - 1];
                }

                int k = std::clamp(cfg.k_init, 1, cfg.k_max);
                for (;;) {
                    auto km = kmeans(feats, k,
                                     derive_seed(cfg.seed, "kmeans-comp",
                                                 comp * 64 + k),
                                     cfg.kmeans_restarts);
                    cs.k_reduced = km.k < k;
                    std::vector<std::vector<int>> members(km.k);
                    for (int i = 0; i < n; ++i) members[km.labels[i]].push_back(i);

                    err.clusters.clear();
                    cs.degraded_fits = 0;
                    std::vector<int> owner(n, 0);
                    for (int j = 0; j < km.k; ++j) {
                        for (int i : members[j]) owner[i] = j;
                        err.clusters.push_back(cluster_from(members[j]));
                    }
                    double total_width = 0.0;
                    for (int i = 0; i < n; ++i) {
                        const Cluster& cl = err.clusters[owner[i]];
                        total_width += cl.up(pts[i].xd) - cl.low(pts[i].xd);
                    }
                    cs.mean_width = total_width / n;
                    cs.k_used = km.k;
                    if (cs.mean_width <= cfg.width_threshold) break;
                    if (k >= cfg.k_max || km.k < k) break;
                    ++k;
                }
            }
        }

        if (!data.misses.empty()) {
            Box miss;
            miss.lo = miss.hi = data.misses[0].xd;
            for (const auto& dp : data.misses)
                for (std::size_t d = 0; d < miss.lo.size(); ++d) {
                    miss.lo[d] = std::min(miss.lo[d], dp.xd[d]);
                    miss.hi[d] = std::max(miss.hi[d], dp.xd[d]);
                }
            err.miss_region = std::move(miss);
        }

        m.components[comp] = std::move(err);

        for (const auto& dp : data.finite) {
            bool ok = false;
            for (const auto& cl : m.components[comp].clusters) {
                if (!cl.domain.contains(dp.xd)) continue;
                if (cl.low(dp.xd) <= dp.e + 1e-9 && cl.up(dp.xd) >= dp.e - 1e-9) {
                    ok = true;
                    break;
                }
            }
            if (!ok) throw std::logic_error("learn: datapoint escaped the model");
        }
        for (const auto& dp : data.misses)
            if (!m.components[comp].miss_region->contains(dp.xd))
                throw std::logic_error("learn: miss escaped the region");

        if (stats) stats->components.push_back(cs);
    }
    return m;
}

}  // namespace surro
