#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "surro/core.hpp"
#include "surro/falsifier.hpp"
#include "surro/learner.hpp"
#include "surro/orchestrator.hpp"
#include "surro/spec.hpp"
#include "surro/surrogate.hpp"

namespace surro {

// file artifacts: trace tables as CSV ('.' decimals, LF endings, header row),
// models and reports as JSON; doubles print in shortest round-trip form and
// infinities use the tokens "inf" / "-inf"

inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0.0 ? "inf" : "-inf";
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw std::runtime_error("csv: bad number '" + std::string(s) + "'");
    return v;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!os) throw std::runtime_error("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

namespace detail {

inline std::vector<std::string> trace_columns(ScenarioId id) {
    std::vector<std::string> cols = {"trace", "step", "t"};
    for (const auto& n : state_var_names(id, false)) cols.push_back(n);
    for (const auto& n : meas_var_names(id)) cols.push_back(n);
    cols.push_back("u");
    for (const auto& n : env_var_names(id)) cols.push_back(n);
    cols.push_back("fault");
    return cols;
}

inline std::string join_csv(const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) line += ',';
        line += cells[i];
    }
    return line;
}

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        cells.push_back(line.substr(start, comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return cells;
}

inline int parse_int(const std::string& s) {
    int v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw std::runtime_error("csv: bad integer '" + s + "'");
    return v;
}

}  // namespace detail

inline std::string traces_to_csv(const std::vector<Trace>& traces,
                                 ScenarioId id) {
    const int sd = state_dim(id);
    const std::size_t ed = env_var_names(id).size();
    std::string out = detail::join_csv(detail::trace_columns(id));
    out += '\n';
    for (std::size_t t = 0; t < traces.size(); ++t) {
        const Trace& tr = traces[t];
        if (!tr.states.empty() && static_cast<int>(tr.states[0].size()) != sd)
            throw std::runtime_error("traces_to_csv: not a simulator trace");
        for (std::size_t s = 0; s < tr.states.size(); ++s) {
            std::vector<std::string> cells;
            cells.push_back(std::to_string(t));
            cells.push_back(std::to_string(s));
            cells.push_back(format_double(static_cast<double>(s) * tr.dt));
            for (double x : tr.states[s]) cells.push_back(format_double(x));
            for (double y : tr.outputs[s]) cells.push_back(format_double(y));
            cells.push_back(s < tr.inputs.size()
                                ? format_double(tr.inputs[s][0])
                                : std::string());
            for (std::size_t j = 0; j < ed; ++j)
                cells.push_back(
                    format_double(j < tr.env.size() ? tr.env[j] : 0.0));
            cells.push_back(tr.fault ? "1" : "0");
            out += detail::join_csv(cells);
            out += '\n';
        }
    }
    return out;
}

inline std::vector<Trace> traces_from_csv(const std::string& csv, ScenarioId id,
                                          double dt) {
    const auto cols = detail::trace_columns(id);
    const int sd = state_dim(id);
    const int md = meas_dim(id);
    const std::size_t ed = env_var_names(id).size();

    std::vector<Trace> traces;
    std::size_t pos = 0;
    bool saw_header = false;
    while (pos < csv.size()) {
        std::size_t end = csv.find('\n', pos);
        std::string line =
            csv.substr(pos, end == std::string::npos ? end : end - pos);
        pos = end == std::string::npos ? csv.size() : end + 1;
        if (line.empty()) continue;
        if (!saw_header) {
            if (line != detail::join_csv(cols))
                throw std::runtime_error("csv: unexpected header '" + line + "'");
            saw_header = true;
            continue;
        }
        auto cells = detail::split_csv(line);
        if (cells.size() != cols.size())
            throw std::runtime_error("csv: wrong cell count in '" + line + "'");

        std::size_t tid = static_cast<std::size_t>(detail::parse_int(cells[0]));
        if (tid == traces.size()) {
            Trace tr;
            tr.dt = dt;
            for (std::size_t j = 0; j < ed; ++j)
                tr.env.push_back(parse_double(cells[4 + sd + md + j]));
            tr.fault = cells.back() == "1";
            traces.push_back(std::move(tr));
        } else if (tid + 1 != traces.size()) {
            throw std::runtime_error("csv: trace ids out of order");
        }
        Trace& tr = traces.back();
        if (detail::parse_int(cells[1]) != static_cast<int>(tr.states.size()))
            throw std::runtime_error("csv: steps out of order");

        Vec x(sd), y(md);
        for (int j = 0; j < sd; ++j) x[j] = parse_double(cells[3 + j]);
        for (int j = 0; j < md; ++j) y[j] = parse_double(cells[3 + sd + j]);
        tr.states.push_back(std::move(x));
        tr.outputs.push_back(std::move(y));
        const std::string& u = cells[3 + sd + md];
        if (!u.empty()) tr.inputs.push_back({parse_double(u)});
    }
    if (!saw_header) throw std::runtime_error("csv: empty trace file");
    return traces;
}

// ---- json helpers ----

namespace detail {

// infinities have no JSON number form, so non-finite reals become strings
inline nlohmann::ordered_json encode_real(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0.0 ? "inf" : "-inf";
}

inline nlohmann::ordered_json box_to_json(const Box& b) {
    nlohmann::ordered_json j;
    j["lo"] = b.lo;
    j["hi"] = b.hi;
    return j;
}

inline Box box_from_json(const nlohmann::json& j) {
    Box b;
    b.lo = j.at("lo").get<Vec>();
    b.hi = j.at("hi").get<Vec>();
    if (b.lo.size() != b.hi.size())
        throw std::runtime_error("model json: box with mismatched bounds");
    return b;
}

}  // namespace detail

inline nlohmann::ordered_json model_to_json(const SurrogateModel& m) {
    nlohmann::ordered_json j;
    j["scenario"] = to_string(m.scenario);
    j["h_star"] = m.h_star;
    j["domain_dims"] = m.domain_dims;
    j["x0_box"] = detail::box_to_json(m.x0_box);
    j["components"] = nlohmann::ordered_json::array();
    for (const auto& comp : m.components) {
        nlohmann::ordered_json jc;
        jc["clusters"] = nlohmann::ordered_json::array();
        for (const auto& cl : comp.clusters) {
            nlohmann::ordered_json jcl;
            jcl["domain_lo"] = cl.domain.lo;
            jcl["domain_hi"] = cl.domain.hi;
            jcl["a_low"] = cl.a_low;
            jcl["b_low"] = cl.b_low;
            jcl["a_up"] = cl.a_up;
            jcl["b_up"] = cl.b_up;
            jc["clusters"].push_back(std::move(jcl));
        }
        jc["miss_region"] = comp.miss_region
                                ? detail::box_to_json(*comp.miss_region)
                                : nlohmann::ordered_json();
        j["components"].push_back(std::move(jc));
    }
    return j;
}

inline SurrogateModel model_from_json(const nlohmann::json& j) {
    try {
        SurrogateModel m;
        m.scenario = scenario_from_string(j.at("scenario").get<std::string>());
        m.h_star = j.at("h_star").get<std::vector<int>>();
        m.domain_dims = j.at("domain_dims").get<std::vector<int>>();
        m.x0_box = detail::box_from_json(j.at("x0_box"));
        for (const auto& jc : j.at("components")) {
            ComponentError comp;
            for (const auto& jcl : jc.at("clusters")) {
                Cluster cl;
                cl.domain.lo = jcl.at("domain_lo").get<Vec>();
                cl.domain.hi = jcl.at("domain_hi").get<Vec>();
                cl.a_low = jcl.at("a_low").get<Vec>();
                cl.b_low = jcl.at("b_low").get<double>();
                cl.a_up = jcl.at("a_up").get<Vec>();
                cl.b_up = jcl.at("b_up").get<double>();
                if (cl.domain.lo.size() != m.domain_dims.size() ||
                    cl.a_low.size() != m.domain_dims.size())
                    throw std::runtime_error(
                        "model json: cluster dimension mismatch");
                comp.clusters.push_back(std::move(cl));
            }
            if (!jc.at("miss_region").is_null())
                comp.miss_region = detail::box_from_json(jc.at("miss_region"));
            m.components.push_back(std::move(comp));
        }
        if (static_cast<int>(m.components.size()) != meas_dim(m.scenario) ||
            m.h_star.size() != m.components.size())
            throw std::runtime_error("model json: component count mismatch");
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("model json: ") + e.what());
    }
}

inline nlohmann::ordered_json report_to_json(const RunReport& rep) {
    nlohmann::ordered_json j;
    j["outcome"] = to_string(rep.outcome);
    j["p"] = rep.p;
    j["simulator_evaluations"] = rep.simulator_evaluations;
    j["total_counterexamples"] = rep.counterexample_set.size();
    j["vacuous_success_warning"] = rep.vacuous_success_warning;
    j["iterations"] = nlohmann::ordered_json::array();
    double total = 0.0;
    nlohmann::ordered_json seconds = nlohmann::ordered_json::array();
    for (const auto& it : rep.iterations) {
        nlohmann::ordered_json ji;
        ji["iteration"] = it.iteration;
        ji["p"] = it.p;
        ji["synth_J"] = detail::encode_real(it.synth_J);
        ji["synth_restarts"] = it.synth_restarts;
        ji["counterexamples"] = it.counterexamples;
        ji["total_counterexamples"] = it.total_counterexamples;
        ji["min_robustness"] = detail::encode_real(it.min_robustness);
        ji["evaluations"] = it.evaluations;
        j["iterations"].push_back(std::move(ji));
        seconds.push_back(it.wall_seconds);
        total += it.wall_seconds;
    }
    j["timing"] = {{"total_seconds", total},
                   {"iteration_seconds", std::move(seconds)}};
    return j;
}

inline nlohmann::ordered_json synthesis_log_to_json(
    const std::vector<IterationRecord>& iters) {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& it : iters) {
        nlohmann::ordered_json ji;
        ji["iteration"] = it.iteration;
        ji["restarts"] = nlohmann::ordered_json::array();
        for (const auto& r : it.synth_log) {
            nlohmann::ordered_json jr;
            jr["p_start"] = r.p_start;
            jr["trajectory"] = nlohmann::ordered_json::array();
            for (const auto& a : r.trajectory)
                jr["trajectory"].push_back(
                    {{"p", a.p}, {"J", detail::encode_real(a.J)}});
            jr["bank_added"] = r.bank_added;
            jr["abandoned"] = r.abandoned;
            jr["reached_margin"] = r.reached_margin;
            jr["verified"] = r.verified;
            ji["restarts"].push_back(std::move(jr));
        }
        j.push_back(std::move(ji));
    }
    return j;
}

inline nlohmann::ordered_json falsify_to_json(const FalsifyResult& fr,
                                              const SearchSpace& space) {
    nlohmann::ordered_json j;
    j["min_robustness"] = detail::encode_real(fr.min_robustness);
    j["evaluations"] = fr.evaluations;
    j["counterexamples"] = fr.counterexamples.size();
    if (fr.best_point.empty()) {
        j["best_point"] = nullptr;
    } else {
        nlohmann::ordered_json bp;
        for (std::size_t i = 0; i < space.names.size(); ++i)
            bp[space.names[i]] = fr.best_point[i];
        j["best_point"] = std::move(bp);
    }
    j["history"] = nlohmann::ordered_json::array();
    for (const auto& [pt, rob] : fr.history)
        j["history"].push_back(
            {{"point", pt}, {"robustness", detail::encode_real(rob)}});
    return j;
}

// ---- plot data ----

inline std::string datapoints_csv(const std::vector<Trace>& traces,
                                  const SurrogateModel& m) {
    auto names = state_var_names(m.scenario, true);
    std::string out = "component";
    for (int dd : m.domain_dims) out += "," + names[dd];
    out += ",residual,cluster,trace,step\n";
    for (int comp : modeled_components(m.scenario)) {
        const auto& clusters = m.components[comp].clusters;
        auto row = [&](const Datapoint& dp, const std::string& residual,
                       int cluster) {
            out += std::to_string(comp);
            for (double c : dp.xd) out += "," + format_double(c);
            out += "," + residual + "," + std::to_string(cluster) + "," +
                   std::to_string(dp.trace_id) + "," + std::to_string(dp.step) +
                   "\n";
        };
        auto data = extract_datapoints(traces, m, comp);
        for (const auto& dp : data.finite) {
            int label = -1;
            for (std::size_t c = 0; c < clusters.size(); ++c) {
                if (clusters[c].domain.contains(dp.xd)) {
                    label = static_cast<int>(c);
                    break;
                }
            }
            row(dp, format_double(dp.e), label);
        }
        for (const auto& dp : data.misses) row(dp, "inf", -1);
    }
    return out;
}

inline std::string model_bands_csv(const SurrogateModel& m, int grid_n = 41) {
    if (grid_n < 2) throw std::invalid_argument("model_bands_csv: grid_n < 2");
    auto names = state_var_names(m.scenario, true);
    std::string out = "component";
    for (int dd : m.domain_dims) out += "," + names[dd];
    out += ",nominal,low,up,miss\n";

    const std::size_t dims = m.domain_dims.size();
    for (int comp : modeled_components(m.scenario)) {
        // cover everywhere the component's bands are defined: the reachable
        // start box joined with every learned region
        Box gbox;
        for (int dd : m.domain_dims) {
            gbox.lo.push_back(m.x0_box.lo[dd]);
            gbox.hi.push_back(m.x0_box.hi[dd]);
        }
        auto absorb = [&](const Box& b) {
            for (std::size_t d = 0; d < dims; ++d) {
                gbox.lo[d] = std::min(gbox.lo[d], b.lo[d]);
                gbox.hi[d] = std::max(gbox.hi[d], b.hi[d]);
            }
        };
        for (const auto& cl : m.components[comp].clusters) absorb(cl.domain);
        if (m.components[comp].miss_region)
            absorb(*m.components[comp].miss_region);

        std::vector<int> idx(dims, 0);
        Vec xm(m.x0_box.lo.size(), 0.0);
        while (true) {
            for (std::size_t d = 0; d < dims; ++d) {
                double f = static_cast<double>(idx[d]) / (grid_n - 1);
                xm[m.domain_dims[d]] = gbox.lo[d] + f * (gbox.hi[d] - gbox.lo[d]);
            }
            auto o = output_set(m, xm)[comp];
            double low = o.nominal, up = o.nominal;
            for (std::size_t i = 0; i < o.intervals.size(); ++i) {
                low = i == 0 ? o.intervals[i].lo : std::min(low, o.intervals[i].lo);
                up = i == 0 ? o.intervals[i].hi : std::max(up, o.intervals[i].hi);
            }
            out += std::to_string(comp);
            for (std::size_t d = 0; d < dims; ++d)
                out += "," + format_double(xm[m.domain_dims[d]]);
            out += "," + format_double(o.nominal) + "," + format_double(low) +
                   "," + format_double(up) + "," + (o.may_miss ? "1" : "0") +
                   "\n";

            std::size_t d = 0;
            while (d < dims && ++idx[d] == grid_n) idx[d++] = 0;
            if (d == dims) break;
        }
    }
    return out;
}

}  // namespace surro
