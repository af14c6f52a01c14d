#pragma once

#include <chrono>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "surro/core.hpp"
#include "surro/falsifier.hpp"
#include "surro/learner.hpp"
#include "surro/rng.hpp"
#include "surro/sim.hpp"
#include "surro/spec.hpp"
#include "surro/surrogate.hpp"
#include "surro/synthesizer.hpp"

namespace surro {

// outer refinement loop: synthesize against the surrogate, falsify on the
// full simulator, rebuild the surrogate from the accumulated counterexamples

struct LoopConfig {
    int max_outer_iterations = 10;
    int falsify_budget = 300;
    int early_stop_count = 20;
    LearnConfig learn;
    SynthConfig synth;
    std::uint64_t master_seed = 0;
};

enum class Outcome { success, synth_failure, model_stagnation, budget_exhausted };

inline std::string to_string(Outcome o) {
    switch (o) {
        case Outcome::success: return "success";
        case Outcome::synth_failure: return "synth_failure";
        case Outcome::model_stagnation: return "model_stagnation";
        case Outcome::budget_exhausted: return "budget_exhausted";
    }
    return "unknown";
}

inline Outcome outcome_from_string(const std::string& s) {
    if (s == "success") return Outcome::success;
    if (s == "synth_failure") return Outcome::synth_failure;
    if (s == "model_stagnation") return Outcome::model_stagnation;
    if (s == "budget_exhausted") return Outcome::budget_exhausted;
    throw std::runtime_error("unknown outcome: " + s);
}

struct IterationRecord {
    int iteration = 0;  // 1-based
    Vec p;
    double synth_J = 0.0;
    int synth_restarts = 0;
    int counterexamples = 0;
    int total_counterexamples = 0;
    double min_robustness = std::numeric_limits<double>::infinity();
    int evaluations = 0;
    double wall_seconds = 0.0;
    std::vector<RestartLog> synth_log;
    SurrogateModel model_after;  // in effect once the iteration finished
};

struct RunReport {
    Outcome outcome = Outcome::budget_exhausted;
    Vec p;
    SurrogateModel model;
    std::vector<IterationRecord> iterations;
    std::vector<Trace> counterexample_set;  // cumulative, in discovery order
    LearnStats last_learn_stats;
    int simulator_evaluations = 0;
    bool vacuous_success_warning = false;
};

inline RunReport run_loop(const Scenario& sc, const Emulator& em,
                          const Formula& phi_s, const Formula& phi_m,
                          const LoopConfig& cfg) {
    if (cfg.max_outer_iterations < 1)
        throw std::invalid_argument("run_loop: need at least one iteration");

    RunReport rep;
    rep.model = zero_error_surrogate(sc);
    rep.p = default_p_init(sc.id);
    const Box p_box = default_p_box(sc.id);
    const SearchSpace space = default_search_space(sc);

    for (int iter = 1; iter <= cfg.max_outer_iterations; ++iter) {
        auto t0 = std::chrono::steady_clock::now();
        IterationRecord rec;
        rec.iteration = iter;

        SynthConfig scfg = cfg.synth;
        scfg.seed = derive_seed(cfg.master_seed, "synth",
                                static_cast<std::uint64_t>(iter));
        auto synth = synthesize(sc, rep.model, phi_m, rep.p, p_box, scfg);
        rec.p = synth.p;
        rec.synth_J = synth.J;
        rec.synth_restarts = synth.restarts_used;
        rec.synth_log = std::move(synth.log);
        rep.p = synth.p;
        if (!synth.success) {
            rec.model_after = rep.model;
            rec.wall_seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                    .count();
            rep.iterations.push_back(std::move(rec));
            rep.outcome = Outcome::synth_failure;
            return rep;
        }

        auto fals = falsify(sc, em, rep.p, phi_s, space, cfg.falsify_budget,
                            derive_seed(cfg.master_seed, "falsify",
                                        static_cast<std::uint64_t>(iter)),
                            cfg.early_stop_count);
        rec.counterexamples = static_cast<int>(fals.counterexamples.size());
        rec.min_robustness = fals.min_robustness;
        rec.evaluations = fals.evaluations;
        rep.simulator_evaluations += fals.evaluations;

        if (fals.counterexamples.empty()) {
            rec.total_counterexamples =
                static_cast<int>(rep.counterexample_set.size());
            rec.model_after = rep.model;
            rec.wall_seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                    .count();
            rep.iterations.push_back(std::move(rec));
            rep.outcome = Outcome::success;
            rep.vacuous_success_warning = fals.evaluations == 0;
            return rep;
        }

        for (auto& tr : fals.counterexamples)
            rep.counterexample_set.push_back(std::move(tr));
        rec.total_counterexamples = static_cast<int>(rep.counterexample_set.size());

        LearnConfig lcfg = cfg.learn;
        lcfg.seed = derive_seed(cfg.master_seed, "learn",
                                static_cast<std::uint64_t>(iter));
        SurrogateModel next =
            build_error_model(rep.counterexample_set, zero_error_surrogate(sc),
                              sc, lcfg, &rep.last_learn_stats);

        rec.model_after = next;
        rec.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
        bool stagnant = model_equal(next, rep.model);
        rep.model = std::move(next);
        rep.iterations.push_back(std::move(rec));
        if (stagnant) {
            rep.outcome = Outcome::model_stagnation;
            return rep;
        }
    }
    rep.outcome = Outcome::budget_exhausted;
    return rep;
}

}  // namespace surro
