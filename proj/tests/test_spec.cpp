#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "surro/spec.hpp"

using namespace surro;

static std::vector<Vec> scalar_trace(std::initializer_list<double> ds) {
    std::vector<Vec> xs;
    for (double d : ds) xs.push_back({d});
    return xs;
}

TEST_CASE("predicate and window robustness on known traces") {
    // d <= 1 over d = (0.5, 0.9, 1.3)
    auto d_le_1 = Formula::predicate({1.0}, 1.0);
    auto xs = scalar_trace({0.5, 0.9, 1.3});

    auto alw = Formula::always(0, 2, d_le_1);
    CHECK(robustness(alw, xs, 0) == Catch::Approx(-0.3).margin(1e-15));

    auto evt = Formula::eventually(0, 2, d_le_1);
    CHECK(robustness(evt, xs, 0) == Catch::Approx(0.5).margin(1e-15));

    CHECK_FALSE(evaluate_bool(alw, xs));
    CHECK(evaluate_bool(evt, xs));
}

TEST_CASE("empty conjunction is satisfied") {
    auto top = Formula::conj({});
    auto xs = scalar_trace({0.0});
    CHECK(evaluate_bool(top, xs));
    CHECK(robustness(top, xs, 0) > 0);
}

TEST_CASE("tie counts as satisfied") {
    auto p = Formula::predicate({1.0}, 1.0);
    auto xs = scalar_trace({1.0});
    CHECK(robustness(p, xs, 0) == 0.0);
    CHECK(evaluate_bool(p, xs));
}

TEST_CASE("window exceeding the trace is rejected") {
    auto p = Formula::predicate({1.0}, 0.0);
    auto alw = Formula::always(0, 5, p);
    auto xs = scalar_trace({0.0, 0.0, 0.0});
    CHECK_THROWS(robustness(alw, xs, 0));
    auto nested = Formula::eventually(0, 1, Formula::always(0, 1, p));
    CHECK_NOTHROW(robustness(nested, xs, 0));
    CHECK_THROWS(robustness(nested, xs, 1));
}

TEST_CASE("agreement with the recursive reference on random instances") {
    Rng rng(12345);
    for (int trial = 0; trial < 300; ++trial) {
        int len = 2 + static_cast<int>(rng.index(19));
        int dim = 1 + static_cast<int>(rng.index(3));
        auto f = oracle::random_formula(rng, 3, dim, len - 1);
        auto xs = oracle::random_states(rng, len, dim);
        double want = oracle::robustness(f, xs, 0);
        double got = robustness(f, xs, 0);
        if (std::isinf(want)) {
            CHECK(got == want);
        } else {
            CHECK(got == Catch::Approx(want).margin(1e-12));
        }
        CHECK(evaluate_bool(f, xs) == (got >= 0.0));
    }
}

static void bump_offsets(Formula& f, double eps) {
    if (f.kind == Formula::Kind::pred) f.pred.b += eps;
    for (auto& kid : f.kids) bump_offsets(kid, eps);
}

TEST_CASE("uniform margin bump shifts robustness exactly") {
    Rng rng(777);
    for (int trial = 0; trial < 100; ++trial) {
        int len = 2 + static_cast<int>(rng.index(19));
        auto f = oracle::random_formula(rng, 3, 2, len - 1);
        auto xs = oracle::random_states(rng, len, 2);
        double base = robustness(f, xs, 0);
        if (std::isinf(base)) continue;
        const double eps = 0.25;
        auto bumped = f;
        bump_offsets(bumped, eps);
        CHECK(robustness(bumped, xs, 0) == Catch::Approx(base + eps).margin(1e-12));
    }
}

TEST_CASE("built-in lane keeping formulas") {
    SpecParams sp;
    auto [phi_s, phi_m] = builtin_specs(ScenarioId::lane_keeping, sp, 160, 0.05);

    // shape: And(Always[0,160](...), Eventually[0,80](Always[0,80](...)))
    REQUIRE(phi_s.kind == Formula::Kind::conj);
    REQUIRE(phi_s.kids.size() == 2);
    CHECK(phi_s.kids[0].kind == Formula::Kind::always);
    CHECK(phi_s.kids[0].i2 == 160);
    REQUIRE(phi_s.kids[1].kind == Formula::Kind::eventually);
    CHECK(phi_s.kids[1].i2 == 80);
    REQUIRE(phi_s.kids[1].kids[0].kind == Formula::Kind::always);
    CHECK(phi_s.kids[1].kids[0].i2 == 80);

    // a trace that settles immediately and stays centered satisfies phi_s
    std::vector<Vec> good(161, Vec(lane::STATE_DIM, 0.0));
    CHECK(evaluate_bool(phi_s, good));

    // drifting past |d| = 1 violates it
    auto bad = good;
    bad[40][lane::D] = 1.2;
    CHECK_FALSE(evaluate_bool(phi_s, bad));

    // model-side formula reads the 3-dim model state
    std::vector<Vec> good_m(161, Vec(lane::MODEL_DIM, 0.0));
    CHECK(evaluate_bool(phi_m, good_m));
    auto bad_m = good_m;
    for (auto& x : bad_m) x[1] = 0.2;  // theta never settles
    CHECK_FALSE(evaluate_bool(phi_m, bad_m));
}

TEST_CASE("built-in braking formulas") {
    SpecParams sp;
    sp.eps1 = 0.5;
    sp.phi_m_extra = "";
    auto [phi_s, phi_m] = builtin_specs(ScenarioId::braking, sp, 240, 0.05);

    // phi_m with no extra clause is a single Always over d
    REQUIRE(phi_m.kind == Formula::Kind::always);
    CHECK(phi_m.i2 == 240);
    REQUIRE(phi_m.kids[0].kind == Formula::Kind::pred);
    CHECK(phi_m.kids[0].pred.a.size() == brake::MODEL_DIM);
    CHECK(phi_m.kids[0].pred.a[0] == -1.0);
    CHECK(phi_m.kids[0].pred.a[1] == 0.0);
    CHECK(phi_m.kids[0].pred.b == -0.5);

    // reaching d = 0 violates phi_s
    std::vector<Vec> xs(241, Vec{10.0, 5.0, 8.0, 5.0});
    xs[100][brake::D] = 0.0;
    CHECK_FALSE(evaluate_bool(phi_s, xs));
    xs[100][brake::D] = 10.0;
    CHECK(evaluate_bool(phi_s, xs));

    // d_car is only in phi_s
    xs[50][brake::D_CAR] = 0.0;
    CHECK_FALSE(evaluate_bool(phi_s, xs));
    std::vector<Vec> xm(241, Vec{10.0, 5.0});
    CHECK(evaluate_bool(phi_m, xm));

    // the extra clause is conjoined when present
    sp.phi_m_extra = "(eventually 0 240 (le d 5.0))";
    auto [phi_s2, phi_m2] = builtin_specs(ScenarioId::braking, sp, 240, 0.05);
    REQUIRE(phi_m2.kind == Formula::Kind::conj);
    REQUIRE(phi_m2.kids.size() == 2);
    CHECK(phi_m2.kids[1].kind == Formula::Kind::eventually);
    CHECK_FALSE(evaluate_bool(phi_m2, xm));  // d stays at 10, never reaches 5
}

TEST_CASE("formula text parsing") {
    auto vars = state_var_names(ScenarioId::lane_keeping, false);
    auto f = parse_formula("(always 0 160 (le (abs d) 1))", vars);
    REQUIRE(f.kind == Formula::Kind::always);
    CHECK(f.i1 == 0);
    CHECK(f.i2 == 160);
    REQUIRE(f.kids[0].kind == Formula::Kind::conj);
    REQUIRE(f.kids[0].kids.size() == 2);

    std::vector<Vec> xs(161, Vec(lane::STATE_DIM, 0.0));
    xs[10][lane::D] = 0.4;
    CHECK(robustness(f, xs, 0) == Catch::Approx(0.6).margin(1e-15));
    xs[10][lane::D] = -0.4;
    CHECK(robustness(f, xs, 0) == Catch::Approx(0.6).margin(1e-15));

    auto g = parse_formula("(and (ge v 1) (le (- theta_av theta_r) 0.1))", vars);
    std::vector<Vec> ys(1, Vec(lane::STATE_DIM, 0.0));
    ys[0][lane::V] = 3.0;
    ys[0][lane::THETA_AV] = 0.25;
    ys[0][lane::THETA_R] = 0.2;
    CHECK(robustness(g, ys, 0) == Catch::Approx(0.05).margin(1e-12));

    auto h = parse_formula("(le (+ (* 2 v) 1) 10)", vars);
    CHECK(robustness(h, ys, 0) == Catch::Approx(3.0).margin(1e-12));

    CHECK_THROWS(parse_formula("(le nope 1)", vars));
    CHECK_THROWS(parse_formula("(always 3 1 (le d 1))", vars));
    CHECK_THROWS(parse_formula("(ge (abs d) 1)", vars));
    CHECK_THROWS(parse_formula("(le d 1", vars));
}
