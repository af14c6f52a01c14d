#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "surro/config.hpp"
#include "surro/falsifier.hpp"
#include "surro/io.hpp"
#include "surro/learner.hpp"
#include "surro/orchestrator.hpp"

namespace fs = std::filesystem;
using namespace surro;

namespace {

struct CommonOpts {
    std::string config;
    std::string output_dir;
    int threads = 0;
};

int resolve_threads(int cli_threads, int cfg_threads) {
    if (cli_threads > 0) return cli_threads;
    if (const char* env = std::getenv("SURRO_THREADS")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1) return static_cast<int>(v);
    }
    return cfg_threads;
}

RunConfig load_effective(const CommonOpts& o) {
    RunConfig cfg = load_run_config(o.config);
    if (!o.output_dir.empty()) cfg.output_dir = o.output_dir;
    int threads = resolve_threads(o.threads, cfg.threads);
    cfg.threads = threads;
    cfg.loop.synth.threads = threads;
    return cfg;
}

Vec parse_vec(const std::string& s, std::size_t want, const char* what) {
    Vec v;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = s.find(',', start);
        auto part = std::string_view(s).substr(
            start, comma == std::string::npos ? comma : comma - start);
        while (!part.empty() && part.front() == ' ') part.remove_prefix(1);
        while (!part.empty() && part.back() == ' ') part.remove_suffix(1);
        v.push_back(parse_double(part));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (v.size() != want)
        throw std::runtime_error(std::string(what) + " needs " +
                                 std::to_string(want) + " comma-separated values");
    return v;
}

void write_plot_data(const std::string& dir, const std::string& prefix,
                     const std::vector<Trace>& traces, const SurrogateModel& m,
                     int grid_n = 41) {
    write_text_file(dir + "/" + prefix + "clusters_scatter.csv",
                    datapoints_csv(traces, m));
    write_text_file(dir + "/" + prefix + "model_bands.csv",
                    model_bands_csv(m, grid_n));
}

int cmd_run(const CommonOpts& o) {
    RunConfig cfg = load_effective(o);
    Scenario sc = make_scenario(cfg);
    auto specs = make_specs(cfg);

    fs::create_directories(cfg.output_dir);
    write_text_file(cfg.output_dir + "/effective_config.json",
                    config_to_json(cfg).dump(2) + "\n");

    RunReport rep =
        run_loop(sc, cfg.emulator, specs.first, specs.second, cfg.loop);

    write_text_file(cfg.output_dir + "/run_report.json",
                    report_to_json(rep).dump(2) + "\n");
    write_text_file(cfg.output_dir + "/surrogate_model.json",
                    model_to_json(rep.model).dump(2) + "\n");
    write_text_file(cfg.output_dir + "/synthesis_log.json",
                    synthesis_log_to_json(rep.iterations).dump(2) + "\n");
    if (cfg.exports.traces)
        write_text_file(cfg.output_dir + "/counterexamples.csv",
                        traces_to_csv(rep.counterexample_set, sc.id));
    if (cfg.exports.plots) {
        write_plot_data(cfg.output_dir, "", rep.counterexample_set, rep.model);
        for (const auto& it : rep.iterations) {
            char prefix[16];
            std::snprintf(prefix, sizeof prefix, "iter%02d_", it.iteration);
            std::vector<Trace> seen(
                rep.counterexample_set.begin(),
                rep.counterexample_set.begin() + it.total_counterexamples);
            write_plot_data(cfg.output_dir, prefix, seen, it.model_after);
        }
    }

    std::cout << "outcome: " << to_string(rep.outcome) << " ("
              << rep.iterations.size() << " iterations, "
              << rep.simulator_evaluations << " simulator evaluations)\n";
    std::cout << "p:";
    for (double v : rep.p) std::cout << ' ' << format_double(v);
    std::cout << '\n';
    if (rep.vacuous_success_warning)
        std::cout << "warning: no simulator evaluation backs this success\n";

    switch (rep.outcome) {
        case Outcome::success:
            return 0;
        case Outcome::synth_failure:
        case Outcome::model_stagnation:
            return 2;
        case Outcome::budget_exhausted:
            return 3;
    }
    return 1;
}

int cmd_falsify(const CommonOpts& o, const std::string& p_str,
                std::uint64_t seed, bool seed_set) {
    RunConfig cfg = load_effective(o);
    Scenario sc = make_scenario(cfg);
    auto specs = make_specs(cfg);
    Vec p = p_str.empty() ? default_p_init(cfg.scenario)
                          : parse_vec(p_str, 2, "--p");
    SearchSpace space = default_search_space(sc);

    FalsifyResult res =
        falsify(sc, cfg.emulator, p, specs.first, space, cfg.loop.falsify_budget,
                seed_set ? seed : cfg.loop.master_seed,
                cfg.loop.early_stop_count);

    fs::create_directories(cfg.output_dir);
    write_text_file(cfg.output_dir + "/falsify_result.json",
                    falsify_to_json(res, space).dump(2) + "\n");
    if (cfg.exports.traces)
        write_text_file(cfg.output_dir + "/counterexamples.csv",
                        traces_to_csv(res.counterexamples, sc.id));

    std::cout << res.counterexamples.size() << " counterexamples in "
              << res.evaluations << " evaluations, min robustness "
              << format_double(res.min_robustness) << '\n';
    return res.counterexamples.empty() ? 0 : 4;
}

int cmd_learn_model(const CommonOpts& o, const std::string& traces_path,
                    const std::string& out_path) {
    RunConfig cfg = load_effective(o);
    Scenario sc = make_scenario(cfg);
    auto traces = traces_from_csv(read_text_file(traces_path), sc.id, sc.dt);

    LearnConfig lc = cfg.loop.learn;
    lc.seed = cfg.loop.master_seed;
    LearnStats stats;
    SurrogateModel m =
        build_error_model(traces, zero_error_surrogate(sc), sc, lc, &stats);

    std::string out = out_path.empty()
                          ? cfg.output_dir + "/surrogate_model.json"
                          : out_path;
    fs::path parent = fs::path(out).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
    write_text_file(out, model_to_json(m).dump(2) + "\n");

    for (const auto& cs : stats.components)
        std::cout << "component " << cs.component << ": k=" << cs.k_used << ", "
                  << cs.datapoints << " datapoints, " << cs.misses
                  << " misses, mean width " << format_double(cs.mean_width)
                  << '\n';
    std::cout << "model written to " << out << '\n';
    return 0;
}

int cmd_simulate(const CommonOpts& o, const std::string& x0_str,
                 const std::string& env_str, const std::string& p_str,
                 const std::string& out_path) {
    RunConfig cfg = load_effective(o);
    Scenario sc = make_scenario(cfg);
    auto specs = make_specs(cfg);

    Vec x0;
    if (x0_str.empty()) {
        x0 = sc.x0_box.center();
        couple_x0(sc.id, x0);
    } else {
        x0 = parse_vec(x0_str, static_cast<std::size_t>(state_dim(sc.id)),
                       "--x0");
    }
    Vec env = env_str.empty()
                  ? sc.env_box.center()
                  : parse_vec(env_str, sc.env_box.lo.size(), "--env");
    Vec p = p_str.empty() ? default_p_init(cfg.scenario)
                          : parse_vec(p_str, 2, "--p");

    Trace tr = simulate(sc, cfg.emulator, p, x0, env);
    std::string out =
        out_path.empty() ? cfg.output_dir + "/trace.csv" : out_path;
    fs::path parent = fs::path(out).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
    write_text_file(out, traces_to_csv({tr}, sc.id));

    if (tr.fault)
        std::cout << "fault after " << tr.steps() << " steps\n";
    else
        std::cout << "robustness " << format_double(robustness(specs.first, tr.states, 0))
                  << '\n';
    std::cout << "trace written to " << out << '\n';
    return 0;
}

int cmd_export_plots(const std::string& run_dir, int grid_n) {
    std::string model_path = run_dir + "/surrogate_model.json";
    std::string cex_path = run_dir + "/counterexamples.csv";
    if (!fs::exists(model_path) || !fs::exists(cex_path)) {
        std::cerr << "error: " << run_dir
                  << " lacks surrogate_model.json or counterexamples.csv\n";
        return 1;
    }
    SurrogateModel m =
        model_from_json(nlohmann::json::parse(read_text_file(model_path)));
    auto traces = traces_from_csv(read_text_file(cex_path), m.scenario,
                                  default_scenario(m.scenario).dt);
    write_plot_data(run_dir, "", traces, m, grid_n);
    std::cout << "wrote clusters_scatter.csv and model_bands.csv to " << run_dir
              << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"counterexample-guided synthesis of perception surrogates and controllers"};
    app.require_subcommand(1);

    CommonOpts run_o, fal_o, learn_o, sim_o;
    auto add_common = [](CLI::App* c, CommonOpts& o) {
        c->add_option("config", o.config, "JSON run configuration")->required();
        c->add_option("--output-dir", o.output_dir, "override the output directory");
        c->add_option("--threads", o.threads,
                      "worker threads (beats SURRO_THREADS and the config)");
    };

    CLI::App* run = app.add_subcommand("run", "execute the full synthesis loop");
    add_common(run, run_o);

    CLI::App* fal = app.add_subcommand("falsify", "search counterexamples for fixed controller parameters");
    add_common(fal, fal_o);
    std::string fal_p;
    std::uint64_t fal_seed = 0;
    fal->add_option("--p", fal_p, "controller parameters as 'p0,p1' (default: the built-in initial guess)");
    CLI::Option* fal_seed_opt =
        fal->add_option("--seed", fal_seed, "search seed (default: the config's master seed)");

    CLI::App* learn = app.add_subcommand("learn-model", "fit the perception error model from a trace CSV");
    add_common(learn, learn_o);
    std::string learn_traces, learn_out;
    learn->add_option("--traces", learn_traces, "counterexample CSV to fit")->required();
    learn->add_option("--output", learn_out, "model file to write (default: <output_dir>/surrogate_model.json)");

    CLI::App* sim = app.add_subcommand("simulate", "roll out the closed loop once and write the trace CSV");
    add_common(sim, sim_o);
    std::string sim_x0, sim_env, sim_p, sim_out;
    sim->add_option("--x0", sim_x0, "initial state, comma-separated (default: box center)");
    sim->add_option("--env", sim_env, "environment values, comma-separated (default: box center)");
    sim->add_option("--p", sim_p, "controller parameters as 'p0,p1'");
    sim->add_option("--output", sim_out, "trace file to write (default: <output_dir>/trace.csv)");

    CLI::App* plots = app.add_subcommand("export-plots", "derive scatter and band CSVs from a finished run");
    std::string plots_dir;
    int plots_grid = 41;
    plots->add_option("run_dir", plots_dir, "directory holding surrogate_model.json and counterexamples.csv")
        ->required();
    plots->add_option("--grid-n", plots_grid, "grid points per domain dimension");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (run->parsed()) return cmd_run(run_o);
        if (fal->parsed())
            return cmd_falsify(fal_o, fal_p, fal_seed, !fal_seed_opt->empty());
        if (learn->parsed()) return cmd_learn_model(learn_o, learn_traces, learn_out);
        if (sim->parsed()) return cmd_simulate(sim_o, sim_x0, sim_env, sim_p, sim_out);
        if (plots->parsed()) return cmd_export_plots(plots_dir, plots_grid);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
