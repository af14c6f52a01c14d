#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "surro/io.hpp"
#include "surro/learner.hpp"

using namespace surro;
using njson = nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<Trace> braking_traces(int n) {
    Scenario sc = default_scenario(ScenarioId::braking);
    Emulator em = default_emulator(ScenarioId::braking);
    Vec p = default_p_init(ScenarioId::braking);
    std::vector<Trace> trs;
    Rng rng(7);
    for (int i = 0; i < n; ++i) {
        Vec x0 = rng.point_in(sc.x0_box);
        couple_x0(sc.id, x0);
        trs.push_back(simulate(sc, em, p, x0, rng.point_in(sc.env_box)));
    }
    return trs;
}

bool same_rows(const std::vector<Vec>& a, const std::vector<Vec>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].size() != b[i].size()) return false;
        for (std::size_t j = 0; j < a[i].size(); ++j) {
            bool eq = a[i][j] == b[i][j] ||
                      (std::isnan(a[i][j]) && std::isnan(b[i][j]));
            if (!eq) return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("doubles print shortest and read back exactly") {
    REQUIRE(format_double(0.1) == "0.1");
    REQUIRE(format_double(-0.0) == "-0");
    REQUIRE(format_double(kInf) == "inf");
    REQUIRE(format_double(-kInf) == "-inf");

    for (double v : {1.0 / 3.0, 0.1, -2.5e-7, 1e300, 5e-324, 123456789.123456,
                     -0.0, kInf, -kInf}) {
        double back = parse_double(format_double(v));
        REQUIRE(back == v);
        REQUIRE(std::signbit(back) == std::signbit(v));
    }

    REQUIRE_THROWS_AS(parse_double(""), std::runtime_error);
    REQUIRE_THROWS_AS(parse_double("1.2.3"), std::runtime_error);
    REQUIRE_THROWS_AS(parse_double("abc"), std::runtime_error);
}

TEST_CASE("trace csv has the pinned header, lf endings, and a trailing newline") {
    std::string brake = traces_to_csv(braking_traces(1), ScenarioId::braking);
    std::string head = brake.substr(0, brake.find('\n'));
    REQUIRE(head ==
            "trace,step,t,d,v,d_car,v_rear,v_hat,d_hat,u,"
            "car_color_similarity,traffic_speed,fault");
    REQUIRE(brake.find('\r') == std::string::npos);
    REQUIRE(brake.back() == '\n');

    Scenario sc = default_scenario(ScenarioId::lane_keeping);
    Trace tr = simulate(sc, default_emulator(sc.id), default_p_init(sc.id),
                        {0.0, 0.0, 0.1, 0.0, 5.0, 0.2}, {});
    std::string lane = traces_to_csv({tr}, ScenarioId::lane_keeping);
    REQUIRE(lane.substr(0, lane.find('\n')) ==
            "trace,step,t,x,y,theta_av,theta_r,v,d,v_hat,theta_hat,d_hat,u,fault");
}

TEST_CASE("sim traces survive the csv round trip") {
    Scenario sc = default_scenario(ScenarioId::braking);
    auto trs = braking_traces(3);

    bool saw_miss = false;
    for (const auto& tr : trs)
        for (const auto& y : tr.outputs)
            if (std::isinf(y[1])) saw_miss = true;
    REQUIRE(saw_miss);

    std::string csv = traces_to_csv(trs, sc.id);
    auto back = traces_from_csv(csv, sc.id, sc.dt);
    REQUIRE(back.size() == trs.size());
    for (std::size_t i = 0; i < trs.size(); ++i) {
        REQUIRE(back[i].dt == sc.dt);
        REQUIRE(back[i].env == trs[i].env);
        REQUIRE(back[i].fault == trs[i].fault);
        REQUIRE(same_rows(back[i].states, trs[i].states));
        REQUIRE(same_rows(back[i].outputs, trs[i].outputs));
        REQUIRE(same_rows(back[i].inputs, trs[i].inputs));
    }

    Scenario lane = default_scenario(ScenarioId::lane_keeping);
    Trace tr = simulate(lane, default_emulator(lane.id),
                        default_p_init(lane.id),
                        {0.0, 0.0, -0.2, 0.0, 6.0, -0.3}, {});
    auto lane_back =
        traces_from_csv(traces_to_csv({tr}, lane.id), lane.id, lane.dt);
    REQUIRE(lane_back.size() == 1);
    REQUIRE(lane_back[0].env.empty());
    REQUIRE(same_rows(lane_back[0].states, tr.states));
    REQUIRE(same_rows(lane_back[0].inputs, tr.inputs));

    Trace fault;
    fault.dt = sc.dt;
    fault.env = {0.5, 10.0};
    fault.fault = true;
    fault.states = {{50.0, 10.0, 12.0, 10.0}, {49.5, 10.0, 12.5, 10.0}};
    fault.outputs = {{10.0, 51.0}, {10.0, kInf}};
    fault.inputs = {{1.0}, {2.0}};
    auto fb = traces_from_csv(traces_to_csv({fault}, sc.id), sc.id, sc.dt);
    REQUIRE(fb[0].fault);
    REQUIRE(fb[0].inputs.size() == 2);
    REQUIRE(same_rows(fb[0].outputs, fault.outputs));

    REQUIRE_THROWS_AS(traces_from_csv("bogus header\n1,2\n", sc.id, sc.dt),
                      std::runtime_error);
}

TEST_CASE("the surrogate model json round trips bitwise") {
    SurrogateModel m = zero_error_surrogate(default_scenario(ScenarioId::braking));
    Cluster c1;
    c1.domain = {{20.0}, {30.0 + 1.0 / 3.0}};
    c1.a_low = {-0.25};
    c1.b_low = -2.0 / 3.0;
    c1.a_up = {0.125};
    c1.b_up = 1e-9;
    Cluster c2;
    c2.domain = {{31.0}, {35.5}};
    c2.a_low = {0.0};
    c2.b_low = -0.5;
    c2.a_up = {0.0};
    c2.b_up = 0.5;
    m.components[1].clusters = {c1, c2};
    m.components[1].miss_region = Box{{40.0}, {57.0 + 0.1}};

    njson j = njson::parse(model_to_json(m).dump());
    SurrogateModel back = model_from_json(j);
    REQUIRE(model_equal(back, m, 0.0));
    REQUIRE(back.scenario == m.scenario);
    REQUIRE(back.h_star == m.h_star);
    REQUIRE(back.domain_dims == m.domain_dims);
    REQUIRE(back.x0_box.lo == m.x0_box.lo);
    REQUIRE(back.components[1].clusters[0].b_low == c1.b_low);
    REQUIRE(back.components[1].miss_region->hi == m.components[1].miss_region->hi);
    REQUIRE_FALSE(back.components[0].miss_region.has_value());

    SurrogateModel lane = zero_error_surrogate(default_scenario(ScenarioId::lane_keeping));
    REQUIRE(model_equal(model_from_json(model_to_json(lane)), lane, 0.0));

    njson bad = model_to_json(m);
    bad["components"][1]["clusters"][0].erase("b_up");
    REQUIRE_THROWS_AS(model_from_json(bad), std::runtime_error);
}

TEST_CASE("the run report isolates timing from the stable payload") {
    RunReport rep;
    rep.outcome = Outcome::success;
    rep.p = {-2.5, -0.75};
    rep.simulator_evaluations = 137;
    IterationRecord it1;
    it1.iteration = 1;
    it1.p = {-2.0, -0.8};
    it1.synth_J = 0.05;
    it1.synth_restarts = 1;
    it1.counterexamples = 4;
    it1.total_counterexamples = 4;
    it1.min_robustness = -0.3;
    it1.evaluations = 120;
    it1.wall_seconds = 1.25;
    IterationRecord it2 = it1;
    it2.iteration = 2;
    it2.counterexamples = 0;
    it2.min_robustness = kInf;
    it2.evaluations = 17;
    it2.wall_seconds = 0.75;
    rep.iterations = {it1, it2};

    njson j = report_to_json(rep);
    REQUIRE(j.at("outcome") == "success");
    REQUIRE(j.at("iterations").size() == 2);
    REQUIRE(j.at("iterations")[1].at("min_robustness") == "inf");
    REQUIRE(j.at("iterations")[0].at("min_robustness") == -0.3);
    REQUIRE(j.contains("timing"));
    REQUIRE(j.at("timing").at("iteration_seconds").size() == 2);

    RunReport slower = rep;
    slower.iterations[0].wall_seconds = 99.0;
    njson j2 = report_to_json(slower);
    REQUIRE(j.at("timing") != j2.at("timing"));
    j.erase("timing");
    j2.erase("timing");
    REQUIRE(j.dump(2) == j2.dump(2));
}

TEST_CASE("scatter rows label finite residuals and mark misses") {
    Scenario sc = default_scenario(ScenarioId::braking);
    auto trs = braking_traces(4);
    LearnConfig lc;
    lc.seed = 11;
    SurrogateModel m = build_error_model(trs, zero_error_surrogate(sc), sc, lc);

    std::string csv = datapoints_csv(trs, m);
    REQUIRE(csv.substr(0, csv.find('\n')) ==
            "component,d,residual,cluster,trace,step");

    auto data = extract_datapoints(trs, m, 1);
    std::size_t rows = 0;
    std::size_t finite_rows = 0;
    std::size_t miss_rows = 0;
    std::size_t pos = csv.find('\n') + 1;
    while (pos < csv.size()) {
        std::size_t end = csv.find('\n', pos);
        std::string line = csv.substr(pos, end - pos);
        ++rows;
        if (line.find(",inf,") != std::string::npos) {
            ++miss_rows;
            REQUIRE(line.find(",inf,-1,") != std::string::npos);
        } else {
            ++finite_rows;
        }
        pos = end + 1;
    }
    REQUIRE(rows == data.finite.size() + data.misses.size());
    REQUIRE(finite_rows == data.finite.size());
    REQUIRE(miss_rows == data.misses.size());
    REQUIRE(miss_rows > 0);
}

TEST_CASE("band rows fall back to the nominal reading away from the clusters") {
    SurrogateModel m = zero_error_surrogate(default_scenario(ScenarioId::braking));
    Cluster cl;
    cl.domain = {{20.0}, {30.0}};
    cl.a_low = {0.0};
    cl.b_low = -2.0;
    cl.a_up = {0.0};
    cl.b_up = -1.0;
    m.components[1].clusters = {cl};
    m.components[1].miss_region = Box{{40.0}, {50.0}};

    std::string csv = model_bands_csv(m, 41);
    REQUIRE(csv.substr(0, csv.find('\n')) == "component,d,nominal,low,up,miss");

    int rows = 0, misses = 0, trivial = 0, banded = 0;
    std::size_t pos = csv.find('\n') + 1;
    while (pos < csv.size()) {
        std::size_t end = csv.find('\n', pos);
        std::string line = csv.substr(pos, end - pos);
        ++rows;
        double d = parse_double(line.substr(2, line.find(',', 2) - 2));
        if (line.back() == '1') ++misses;
        if (d >= 20.0 && d <= 30.0) {
            ++banded;
            REQUIRE(line.find(format_double(d - 2.0)) != std::string::npos);
            REQUIRE(line.find(format_double(d - 1.0)) != std::string::npos);
        }
        if (d > 30.0 && (d < 40.0 || d > 50.0)) {
            ++trivial;
            std::string nom = format_double(d);
            std::string tail = nom + "," + nom + "," + nom + "," + nom + ",0";
            REQUIRE(line == "1," + tail);
        }
        pos = end + 1;
    }
    // joint domain [20, 60] sampled at unit steps
    REQUIRE(rows == 41);
    REQUIRE(misses == 11);
    REQUIRE(banded == 11);
    REQUIRE(trivial == 19);
}

TEST_CASE("falsify results serialize with named coordinates") {
    Scenario sc = default_scenario(ScenarioId::braking);
    SearchSpace sp = default_search_space(sc);

    FalsifyResult fr;
    fr.evaluations = 3;
    fr.min_robustness = -0.125;
    fr.best_point = {50.0, 10.0, 12.0, 10.0, 0.9, 11.0};
    fr.history = {{fr.best_point, -0.125},
                  {{45.0, 9.0, 10.0, 9.0, 0.1, 8.0}, 2.0},
                  {{55.0, 11.0, 14.0, 11.0, 0.5, 9.0}, kInf}};
    fr.counterexamples.resize(1);

    njson j = falsify_to_json(fr, sp);
    REQUIRE(j.at("evaluations") == 3);
    REQUIRE(j.at("counterexamples") == 1);
    REQUIRE(j.at("min_robustness") == -0.125);
    REQUIRE(j.at("best_point").at("d") == 50.0);
    REQUIRE(j.at("best_point").at("traffic_speed") == 11.0);
    REQUIRE(j.at("history").size() == 3);
    REQUIRE(j.at("history")[2].at("robustness") == "inf");
    REQUIRE(j.at("history")[0].at("point").size() == 6);
}

TEST_CASE("the synthesis log keeps every restart trajectory") {
    IterationRecord rec;
    rec.iteration = 1;
    RestartLog r1;
    r1.p_start = {14.0, 4.0};
    r1.trajectory = {{{14.0, 4.0}, -0.5}, {{15.0, 4.5}, 0.1}};
    r1.bank_added = {2, 0};
    r1.reached_margin = true;
    r1.verified = true;
    RestartLog r2;
    r2.p_start = {10.0, 2.0};
    r2.abandoned = true;
    rec.synth_log = {r1, r2};

    njson j = synthesis_log_to_json({rec});
    REQUIRE(j.size() == 1);
    REQUIRE(j[0].at("iteration") == 1);
    const auto& rs = j[0].at("restarts");
    REQUIRE(rs.size() == 2);
    REQUIRE(rs[0].at("trajectory").size() == 2);
    REQUIRE(rs[0].at("trajectory")[1].at("J") == 0.1);
    REQUIRE(rs[0].at("bank_added") == njson({2, 0}));
    REQUIRE(rs[0].at("verified") == true);
    REQUIRE(rs[1].at("abandoned") == true);
}

TEST_CASE("text files round trip through the filesystem helpers") {
    auto dir = std::filesystem::temp_directory_path() / "surro_io_test";
    std::filesystem::create_directories(dir);
    auto path = (dir / "sample.csv").string();
    std::string content = "a,b\n1,2\n";
    write_text_file(path, content);
    REQUIRE(read_text_file(path) == content);
    REQUIRE(std::filesystem::file_size(path) == content.size());
    std::filesystem::remove_all(dir);

    REQUIRE_THROWS_AS(read_text_file((dir / "missing.csv").string()),
                      std::runtime_error);
}
