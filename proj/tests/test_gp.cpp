#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "surro/gp.hpp"

using namespace surro;

TEST_CASE("gp interpolates training data and widens away from it") {
    Gp gp(1);
    for (double x : {0.1, 0.2, 0.3, 0.4, 0.5})
        gp.add({x}, std::sin(2.0 * M_PI * x));
    CHECK(gp.size() == 5);

    for (double x : {0.1, 0.3, 0.5}) {
        auto pr = gp.predict({x});
        CHECK(std::abs(pr.mean - std::sin(2.0 * M_PI * x)) < 0.02);
        CHECK(pr.sd < 0.05);
    }
    auto near = gp.predict({0.3});
    auto far = gp.predict({0.95});
    CHECK(far.sd > 10.0 * near.sd);
}

TEST_CASE("empty gp returns the prior") {
    Gp gp(2);
    auto pr = gp.predict({0.5, 0.5});
    CHECK(pr.mean == 0.0);
    CHECK(pr.sd == 1.0);
}

TEST_CASE("prediction is invariant to how the data was fed") {
    std::vector<Vec> xs = {{0.1, 0.9}, {0.4, 0.2}, {0.8, 0.5}, {0.3, 0.3},
                           {0.6, 0.7}, {0.2, 0.1}, {0.9, 0.9}};
    Vec ys = {1.0, -0.5, 0.3, 0.7, -1.2, 0.05, 2.0};

    Gp one(2), two(2);
    for (std::size_t i = 0; i < xs.size(); ++i) one.add(xs[i], ys[i]);
    two.add_all(xs, ys);

    for (double a : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        auto p1 = one.predict({a, 1.0 - a});
        auto p2 = two.predict({a, 1.0 - a});
        CHECK(p1.mean == p2.mean);
        CHECK(p1.sd == p2.sd);
    }
}

TEST_CASE("duplicate and near-duplicate points stay numerically stable") {
    Gp gp(1);
    for (int i = 0; i < 50; ++i) gp.add({0.5}, 1.0 + 0.001 * i);
    for (int i = 0; i < 20; ++i) gp.add({0.5 + 1e-12 * i}, -1.0);
    auto pr = gp.predict({0.5});
    CHECK(std::isfinite(pr.mean));
    CHECK(std::isfinite(pr.sd));
    CHECK(pr.sd >= 0.0);
    auto pr2 = gp.predict({0.9});
    CHECK(std::isfinite(pr2.mean));
}

TEST_CASE("all-equal observations keep a usable posterior") {
    Gp gp(1);
    for (double x : {0.1, 0.5, 0.9}) gp.add({x}, 3.0);
    auto pr = gp.predict({0.5});
    CHECK(std::isfinite(pr.mean));
    CHECK(std::isfinite(pr.sd));
    CHECK(std::abs(pr.mean - 3.0) < 1e-6);
}

TEST_CASE("expected improvement toward lower values") {
    CHECK(expected_improvement(0.0, 1.0, 0.0) ==
          Catch::Approx(0.3989422804014327).margin(1e-12));
    CHECK(expected_improvement(2.0, 1.0, 0.0) ==
          Catch::Approx(0.008490702616829651).margin(1e-9));
    CHECK(expected_improvement(-1.0, 0.0, 0.0) == 1.0);
    CHECK(expected_improvement(1.0, 0.0, 0.0) == 0.0);
    CHECK(expected_improvement(-0.5, 1.0, 0.0) >
          expected_improvement(0.0, 1.0, 0.0));
    CHECK(expected_improvement(0.0, 2.0, 0.0) >
          expected_improvement(0.0, 1.0, 0.0));
    CHECK(expected_improvement(5.0, 1.0, 0.0) >= 0.0);
}
