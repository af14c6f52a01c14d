#pragma once

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "surro/core.hpp"

namespace surro {

// linear inequality a.x <= b, with signed margin b - a.x
struct Predicate {
    Vec a;
    double b = 0.0;
};

struct Formula {
    enum class Kind { pred, conj, always, eventually };

    Kind kind = Kind::conj;
    Predicate pred;
    std::vector<Formula> kids;
    int i1 = 0, i2 = 0;

    static Formula predicate(Vec a, double b) {
        Formula f;
        f.kind = Kind::pred;
        f.pred = {std::move(a), b};
        return f;
    }
    static Formula conj(std::vector<Formula> kids) {
        Formula f;
        f.kind = Kind::conj;
        f.kids = std::move(kids);
        return f;
    }
    static Formula always(int i1, int i2, Formula kid) {
        Formula f;
        f.kind = Kind::always;
        f.i1 = i1;
        f.i2 = i2;
        f.kids.push_back(std::move(kid));
        return f;
    }
    static Formula eventually(int i1, int i2, Formula kid) {
        Formula f;
        f.kind = Kind::eventually;
        f.i1 = i1;
        f.i2 = i2;
        f.kids.push_back(std::move(kid));
        return f;
    }
};

// furthest step offset the formula can read relative to its evaluation index
inline int window_span(const Formula& f) {
    switch (f.kind) {
        case Formula::Kind::pred:
            return 0;
        case Formula::Kind::conj: {
            int m = 0;
            for (const auto& kid : f.kids) m = std::max(m, window_span(kid));
            return m;
        }
        default:
            return f.i2 + window_span(f.kids[0]);
    }
}

namespace detail {

// bottom-up evaluation: each node yields its robustness at every step where
// its window fits, so shared sub-windows are computed once
inline std::vector<double> robustness_table(const Formula& f,
                                            const std::vector<Vec>& xs) {
    const int n = static_cast<int>(xs.size());
    const double inf = std::numeric_limits<double>::infinity();
    switch (f.kind) {
        case Formula::Kind::pred: {
            std::vector<double> r(n);
            for (int t = 0; t < n; ++t) r[t] = f.pred.b - dot(f.pred.a, xs[t]);
            return r;
        }
        case Formula::Kind::conj: {
            std::vector<double> r(n, inf);
            for (const auto& kid : f.kids) {
                auto kr = robustness_table(kid, xs);
                for (int t = 0; t < n; ++t) r[t] = std::min(r[t], kr[t]);
            }
            return r;
        }
        case Formula::Kind::always:
        case Formula::Kind::eventually: {
            auto kr = robustness_table(f.kids[0], xs);
            const bool is_min = f.kind == Formula::Kind::always;
            std::vector<double> r(n, is_min ? inf : -inf);
            for (int t = 0; t + f.i2 < n; ++t) {
                double acc = is_min ? inf : -inf;
                for (int s = t + f.i1; s <= t + f.i2; ++s)
                    acc = is_min ? std::min(acc, kr[s]) : std::max(acc, kr[s]);
                r[t] = acc;
            }
            return r;
        }
    }
    return {};
}

}  // namespace detail

inline double robustness(const Formula& f, const std::vector<Vec>& xs, int at) {
    const int n = static_cast<int>(xs.size());
    if (at < 0 || at >= n)
        throw std::runtime_error("robustness: evaluation index outside trace");
    if (at + window_span(f) > n - 1)
        throw std::runtime_error("robustness: formula window exceeds trace length");
    return detail::robustness_table(f, xs)[at];
}

inline bool evaluate_bool(const Formula& f, const std::vector<Vec>& xs) {
    return robustness(f, xs, 0) >= 0.0;
}

inline void collect_predicates(const Formula& f, std::vector<Predicate>& out) {
    if (f.kind == Formula::Kind::pred) out.push_back(f.pred);
    for (const auto& k : f.kids) collect_predicates(k, out);
}

inline std::vector<Predicate> flatten_predicates(const Formula& f) {
    std::vector<Predicate> out;
    collect_predicates(f, out);
    return out;
}

// ---- formula text syntax ----
//
// prefix s-expressions:
//   (always i1 i2 f)   (eventually i1 i2 f)   (and f ...)
//   (le lin num)       (ge lin num)
//   lin := name | num | (+ lin ...) | (- lin lin) | (* num lin) | (abs lin)
// (abs ...) is only allowed directly under le, where it expands into the
// two-sided conjunction.

inline std::vector<std::string> env_var_names(ScenarioId id) {
    if (id == ScenarioId::braking)
        return {"car_color_similarity", "traffic_speed"};
    return {};
}

inline std::vector<std::string> meas_var_names(ScenarioId id) {
    if (id == ScenarioId::lane_keeping) return {"v_hat", "theta_hat", "d_hat"};
    return {"v_hat", "d_hat"};
}

inline std::vector<std::string> state_var_names(ScenarioId id, bool model) {
    if (id == ScenarioId::lane_keeping) {
        if (model) return {"d", "theta", "v"};
        return {"x", "y", "theta_av", "theta_r", "v", "d"};
    }
    if (model) return {"d", "v"};
    return {"d", "v", "d_car", "v_rear"};
}

namespace detail {

struct SexprParser {
    std::vector<std::string> toks;
    std::size_t pos = 0;
    const std::vector<std::string>& vars;

    SexprParser(const std::string& text, const std::vector<std::string>& vars)
        : vars(vars) {
        std::string cur;
        for (char c : text) {
            if (c == '(' || c == ')') {
                if (!cur.empty()) toks.push_back(cur), cur.clear();
                toks.push_back(std::string(1, c));
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                if (!cur.empty()) toks.push_back(cur), cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        if (!cur.empty()) toks.push_back(cur);
    }

    [[noreturn]] void fail(const std::string& msg) {
        throw std::runtime_error("formula syntax: " + msg +
                                 (pos < toks.size() ? " near '" + toks[pos] + "'"
                                                    : " at end of input"));
    }

    const std::string& peek() {
        if (pos >= toks.size()) fail("unexpected end");
        return toks[pos];
    }
    std::string take() {
        auto t = peek();
        ++pos;
        return t;
    }
    void expect(const std::string& t) {
        if (take() != t) {
            --pos;
            fail("expected '" + t + "'");
        }
    }

    static bool is_number(const std::string& t) {
        char* end = nullptr;
        std::strtod(t.c_str(), &end);
        return end && *end == '\0' && end != t.c_str();
    }

    double number() {
        auto t = take();
        if (!is_number(t)) {
            --pos;
            fail("expected a number");
        }
        return std::strtod(t.c_str(), nullptr);
    }

    int integer() {
        double v = number();
        int i = static_cast<int>(v);
        if (i != v || i < 0) {
            --pos;
            fail("expected a non-negative integer");
        }
        return i;
    }

    // linear expression as coefficients plus constant; abs_ok marks the one
    // position where (abs ...) may appear, reported via the flag
    std::pair<Vec, double> linexpr(bool abs_ok, bool* saw_abs) {
        Vec a(vars.size(), 0.0);
        double c = 0.0;
        if (peek() != "(") {
            auto t = take();
            if (is_number(t)) {
                c = std::strtod(t.c_str(), nullptr);
                return {a, c};
            }
            auto it = std::find(vars.begin(), vars.end(), t);
            if (it == vars.end()) {
                --pos;
                fail("unknown variable");
            }
            a[static_cast<std::size_t>(it - vars.begin())] = 1.0;
            return {a, c};
        }
        expect("(");
        auto op = take();
        if (op == "abs") {
            if (!abs_ok) fail("abs is only allowed directly under le");
            auto inner = linexpr(false, nullptr);
            expect(")");
            if (saw_abs) *saw_abs = true;
            return inner;
        }
        if (op == "+") {
            while (peek() != ")") {
                auto [ka, kc] = linexpr(false, nullptr);
                for (std::size_t i = 0; i < a.size(); ++i) a[i] += ka[i];
                c += kc;
            }
            expect(")");
            return {a, c};
        }
        if (op == "-") {
            auto [la, lc] = linexpr(false, nullptr);
            auto [ra, rc] = linexpr(false, nullptr);
            expect(")");
            for (std::size_t i = 0; i < a.size(); ++i) a[i] = la[i] - ra[i];
            return {a, lc - rc};
        }
        if (op == "*") {
            double k = number();
            auto [ka, kc] = linexpr(false, nullptr);
            expect(")");
            for (std::size_t i = 0; i < a.size(); ++i) a[i] = k * ka[i];
            return {a, k * kc};
        }
        --pos;
        fail("unknown operator in linear expression");
    }

    Formula formula() {
        expect("(");
        auto op = take();
        if (op == "and") {
            std::vector<Formula> kids;
            while (peek() != ")") kids.push_back(formula());
            expect(")");
            return Formula::conj(std::move(kids));
        }
        if (op == "always" || op == "eventually") {
            int i1 = integer();
            int i2 = integer();
            if (i1 > i2) fail("window bounds out of order");
            auto kid = formula();
            expect(")");
            return op == "always" ? Formula::always(i1, i2, std::move(kid))
                                  : Formula::eventually(i1, i2, std::move(kid));
        }
        if (op == "le" || op == "ge") {
            bool saw_abs = false;
            auto [a, c] = linexpr(op == "le", &saw_abs);
            double rhs = number();
            expect(")");
            if (saw_abs) {
                Vec na(a.size());
                for (std::size_t i = 0; i < a.size(); ++i) na[i] = -a[i];
                return Formula::conj({Formula::predicate(a, rhs - c),
                                      Formula::predicate(na, rhs + c)});
            }
            if (op == "le") return Formula::predicate(a, rhs - c);
            Vec na(a.size());
            for (std::size_t i = 0; i < a.size(); ++i) na[i] = -a[i];
            return Formula::predicate(na, c - rhs);
        }
        --pos;
        fail("unknown operator");
    }
};

}  // namespace detail

inline Formula parse_formula(const std::string& text,
                             const std::vector<std::string>& vars) {
    detail::SexprParser p(text, vars);
    auto f = p.formula();
    if (p.pos != p.toks.size()) p.fail("trailing tokens");
    return f;
}

// ---- built-in scenario specifications ----

struct SpecParams {
    double eps1 = 0.5;          // braking: min distance to the cones
    double eps2 = 0.1;          // braking: min gap to the rear car
    double d_max = 1.0;         // lane: hard deviation bound
    double settle_theta = 0.1;  // lane: settled heading band
    double settle_d = 0.3;      // lane: settled deviation band
    double settle_deadline_s = 4.0;
    bool reach_only = false;    // lane: drop the stay requirement
    std::string phi_m_extra;    // optional clause conjoined onto the model spec
};

namespace detail {

inline Vec unit(int dim, int i, double v = 1.0) {
    Vec a(dim, 0.0);
    a[i] = v;
    return a;
}

inline Formula abs_le(int dim, int i, double bound) {
    return Formula::conj({Formula::predicate(unit(dim, i), bound),
                          Formula::predicate(unit(dim, i, -1.0), bound)});
}

}  // namespace detail

// returns (phi_s over simulator states, phi_m over model states)
inline std::pair<Formula, Formula> builtin_specs(ScenarioId id, const SpecParams& sp,
                                                 int H, double dt) {
    using detail::abs_le;
    using detail::unit;
    if (id == ScenarioId::lane_keeping) {
        int reach = static_cast<int>(std::llround(sp.settle_deadline_s / dt));
        if (reach < 0 || reach > H)
            throw std::runtime_error("settle_deadline_s does not fit in the horizon");
        auto build = [&](Formula dev, Formula settle) {
            Formula inner = sp.reach_only
                                ? std::move(settle)
                                : Formula::always(0, H - reach, std::move(settle));
            return Formula::conj(
                {Formula::always(0, H, std::move(dev)),
                 Formula::eventually(0, reach, std::move(inner))});
        };
        const int sd = lane::STATE_DIM;
        Vec th(sd, 0.0);
        th[lane::THETA_AV] = 1.0;
        th[lane::THETA_R] = -1.0;
        Vec nth(sd, 0.0);
        nth[lane::THETA_AV] = -1.0;
        nth[lane::THETA_R] = 1.0;
        Formula d_band_s = abs_le(sd, lane::D, sp.settle_d);
        Formula settle_s = Formula::conj({Formula::predicate(th, sp.settle_theta),
                                          Formula::predicate(nth, sp.settle_theta),
                                          std::move(d_band_s.kids[0]),
                                          std::move(d_band_s.kids[1])});
        Formula phi_s = build(abs_le(sd, lane::D, sp.d_max), std::move(settle_s));

        const int md = lane::MODEL_DIM;
        Formula th_band_m = abs_le(md, 1, sp.settle_theta);
        Formula d_band_m = abs_le(md, 0, sp.settle_d);
        Formula settle_m = Formula::conj(
            {std::move(th_band_m.kids[0]), std::move(th_band_m.kids[1]),
             std::move(d_band_m.kids[0]), std::move(d_band_m.kids[1])});
        Formula phi_m = build(abs_le(md, 0, sp.d_max), std::move(settle_m));
        return {std::move(phi_s), std::move(phi_m)};
    }

    const int sd = brake::STATE_DIM;
    Formula phi_s = Formula::always(
        0, H,
        Formula::conj({Formula::predicate(unit(sd, brake::D, -1.0), -sp.eps1),
                       Formula::predicate(unit(sd, brake::D_CAR, -1.0), -sp.eps2)}));
    const int md = brake::MODEL_DIM;
    Formula phi_m =
        Formula::always(0, H, Formula::predicate(unit(md, 0, -1.0), -sp.eps1));
    if (!sp.phi_m_extra.empty()) {
        auto extra = parse_formula(sp.phi_m_extra, state_var_names(id, true));
        if (window_span(extra) > H)
            throw std::runtime_error("phi_m_extra window exceeds the horizon");
        phi_m = Formula::conj({std::move(phi_m), std::move(extra)});
    }
    return {std::move(phi_s), std::move(phi_m)};
}

}  // namespace surro
