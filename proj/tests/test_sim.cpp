#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "surro/sim.hpp"

using namespace surro;

TEST_CASE("braking dynamics single steps") {
    Scenario sc = default_scenario(ScenarioId::braking);
    Vec x{50.0, 10.0, 12.0, 10.0};

    auto x1 = braking_dynamics(x, 0.0, 0.05, sc);
    CHECK(x1[brake::D] == Catch::Approx(49.5).margin(1e-15));
    CHECK(x1[brake::V] == 10.0);

    auto x2 = braking_dynamics(x, 2.5, 0.05, sc);
    CHECK(x2[brake::V] == Catch::Approx(9.875).margin(1e-15));

    Vec slow{50.0, 0.1, 12.0, 0.0};
    auto x3 = braking_dynamics(slow, 2.5, 0.05, sc);
    CHECK(x3[brake::V] == 0.0);
}

TEST_CASE("full braking stops in exactly 4 seconds from 10 m/s") {
    Scenario sc = default_scenario(ScenarioId::braking);
    Vec x{100.0, 10.0, 12.0, 10.0};
    int steps_to_stop = 0;
    for (int i = 0; i < 120; ++i) {
        if (x[brake::V] > 0.0) ++steps_to_stop;
        x = braking_dynamics(x, 2.5, 0.05, sc);
    }
    CHECK(steps_to_stop == 80);  // 4.0 s at dt = 0.05
    CHECK(x[brake::V] == 0.0);
}

TEST_CASE("lane dynamics") {
    Scenario sc = default_scenario(ScenarioId::lane_keeping);

    Vec straight(lane::STATE_DIM, 0.0);
    straight[lane::V] = 5.0;
    auto s1 = lane_keeping_dynamics(straight, 0.0, 0.05, sc);
    CHECK(s1[lane::D] == 0.0);
    CHECK(s1[lane::THETA_AV] == 0.0);
    CHECK(s1[lane::X] == Catch::Approx(0.25).margin(1e-15));

    Vec tilted(lane::STATE_DIM, 0.0);
    tilted[lane::V] = 20.0 / 3.6;
    tilted[lane::THETA_AV] = 0.1;
    auto t1 = lane_keeping_dynamics(tilted, 0.0, 0.05, sc);
    CHECK(t1[lane::D] == Catch::Approx((20.0 / 3.6) * std::sin(0.1) * 0.05).margin(1e-15));
    CHECK(t1[lane::V] == tilted[lane::V]);

    // odd symmetry of the lateral motion
    Vec m = tilted;
    m[lane::THETA_AV] = -m[lane::THETA_AV];
    m[lane::D] = -m[lane::D];
    auto t2 = lane_keeping_dynamics(m, 0.2, 0.05, sc);
    auto t3 = lane_keeping_dynamics(tilted, -0.2, 0.05, sc);
    CHECK(t2[lane::D] == -t3[lane::D]);
    CHECK(t2[lane::THETA_AV] == -t3[lane::THETA_AV]);
    CHECK(t2[lane::X] == t3[lane::X]);
    CHECK(t2[lane::Y] == -t3[lane::Y]);
}

TEST_CASE("rear car ideal braking law") {
    CHECK(rear_car_policy(10.0, 21.0, 1.0) == Catch::Approx(2.5).margin(1e-15));
    CHECK(rear_car_policy(0.0, 30.0, 1.0) == 0.0);
    CHECK(rear_car_policy(5.0, 0.5, 1.0) == 2.5);  // past the stop point
    CHECK(rear_car_policy(2.0, 50.0, 1.0) == Catch::Approx(4.0 / 98.0).margin(1e-12));
}

TEST_CASE("lane controller") {
    Scenario sc = default_scenario(ScenarioId::lane_keeping);
    CHECK(controller_lane({-3.93, -0.63}, {5.0, 0.1, 0.2}, sc.steer_max) == -0.5);
    CHECK(controller_lane({-3.93, -0.63}, {5.0, 0.0, 0.0}, sc.steer_max) == 0.0);
    CHECK(controller_lane({0.0, 0.0}, {5.0, 0.2, 0.9}, sc.steer_max) == 0.0);
    CHECK(controller_lane({-1.0, -0.5}, {5.0, 0.1, 0.2}, sc.steer_max) ==
          Catch::Approx(-0.2).margin(1e-15));
}

TEST_CASE("braking controller") {
    Scenario sc = default_scenario(ScenarioId::braking);
    const double inf = std::numeric_limits<double>::infinity();

    // no detection: cruise
    CHECK(controller_brake({16.5, 7.6}, {10.0, inf}, sc.brake_margin) == 0.0);
    // inside trust range: optimal-force braking, clamped
    CHECK(controller_brake({16.5, 7.6}, {10.0, 10.0}, sc.brake_margin) == 2.5);
    double expect = 25.0 / (2.0 * (16.0 - sc.brake_margin));
    CHECK(controller_brake({16.5, 7.6}, {5.0, 16.0}, sc.brake_margin) ==
          Catch::Approx(expect).margin(1e-12));
    // beyond trust range: approach at target speed
    CHECK(controller_brake({16.5, 7.6}, {10.0, 20.0}, sc.brake_margin) ==
          Catch::Approx(2.4).margin(1e-15));
    CHECK(controller_brake({16.5, 7.6}, {7.0, 20.0}, sc.brake_margin) == 0.0);
    // degenerate measured distance: max braking
    CHECK(controller_brake({16.5, 7.6}, {10.0, -1.0}, sc.brake_margin) == 2.5);
}

TEST_CASE("lane perception error regions") {
    Emulator em = default_emulator(ScenarioId::lane_keeping);
    Vec x(lane::STATE_DIM, 0.0);
    x[lane::V] = 5.0;

    Rng rng(3);
    for (int i = 0; i < 300; ++i) {
        x[lane::D] = rng.uniform(-0.3, 0.3);
        x[lane::THETA_AV] = rng.uniform(-0.15, 0.15);
        auto y = em.measure(x, {});
        CHECK(y[0] == x[lane::V]);
        CHECK(y[1] == x[lane::THETA_AV]);
        CHECK(std::abs(y[2] - x[lane::D]) <= 0.03 + 1e-12);
    }
    for (int i = 0; i < 300; ++i) {
        double d = rng.uniform(0.35, 0.9);
        x[lane::D] = d;
        x[lane::THETA_AV] = rng.uniform(-0.1, 0.1);
        auto y = em.measure(x, {});
        double e = y[2] - d;
        CHECK(e >= 0.25);
        CHECK(e < 0.75);
        // mirrored state gets the exactly mirrored estimate
        Vec xm = x;
        xm[lane::D] = -x[lane::D];
        xm[lane::THETA_AV] = -x[lane::THETA_AV];
        auto ym = em.measure(xm, {});
        CHECK(ym[2] == -y[2]);
    }
    auto y1 = em.measure(x, {});
    auto y2 = em.measure(x, {});
    CHECK(y1 == y2);
}

TEST_CASE("braking perception error regions") {
    Emulator em = default_emulator(ScenarioId::braking);
    Vec env{0.2, 10.0};
    Rng rng(4);

    for (int i = 0; i < 200; ++i) {
        Vec x{rng.uniform(1.0, 16.0), rng.uniform(5.0, 12.0), 10.0, 10.0};
        auto y = em.measure(x, env);
        CHECK(y[0] == x[brake::V]);
        CHECK(std::abs(y[1] - x[brake::D]) / x[brake::D] <= 0.05 + 1e-12);
    }
    // color confusion band: severe underestimate
    Vec conf_env{0.9, 10.0};
    for (int i = 0; i < 200; ++i) {
        Vec x{rng.uniform(17.0, 35.0), rng.uniform(5.0, 12.0), 10.0, 10.0};
        auto y = em.measure(x, conf_env);
        double rel = y[1] / x[brake::D];
        CHECK(rel >= 0.4 - 1e-12);
        CHECK(rel <= 0.7 + 1e-12);
    }
    Vec probe{25.0, 10.0, 10.0, 10.0};
    auto yc = em.measure(probe, conf_env);
    CHECK(yc[1] >= 10.0);
    CHECK(yc[1] <= 17.5);

    // long range: deterministic miss gate, about 70 percent dropouts
    int misses = 0, finite = 0;
    for (int i = 0; i < 500; ++i) {
        Vec x{36.0 + 0.05 * i, rng.uniform(5.0, 12.0), 10.0, 10.0};
        auto y = em.measure(x, env);
        if (std::isinf(y[1]))
            ++misses;
        else
            ++finite;
    }
    CHECK(misses > 250);
    CHECK(misses < 450);
    CHECK(finite > 0);

    // finite estimates stay positive even past the cones
    for (int i = 0; i < 50; ++i) {
        Vec x{rng.uniform(-2.0, 0.5), rng.uniform(0.0, 5.0), 10.0, 10.0};
        auto y = em.measure(x, env);
        CHECK(y[1] > 0.0);
    }

    auto ya = em.measure(probe, env);
    auto yb = em.measure(probe, env);
    CHECK(ya == yb);
}

TEST_CASE("closed-loop simulation shape and replay") {
    Scenario sc = default_scenario(ScenarioId::lane_keeping);
    Emulator em = default_emulator(ScenarioId::lane_keeping);
    Vec x0(lane::STATE_DIM, 0.0);
    x0[lane::V] = 5.0;
    x0[lane::THETA_AV] = 0.1;
    x0[lane::D] = 0.2;

    auto tr = simulate(sc, em, {-2.0, -0.8}, x0, {});
    REQUIRE_FALSE(tr.fault);
    CHECK(tr.states.size() == 161);
    CHECK(tr.outputs.size() == 161);
    CHECK(tr.inputs.size() == 160);
    CHECK(replay_check(tr, sc));

    auto broken = tr;
    broken.states[80][lane::D] += 1.0;
    CHECK_FALSE(replay_check(broken, sc));

    Scenario tiny = sc;
    tiny.H = 0;
    auto tr0 = simulate(tiny, em, {-2.0, -0.8}, x0, {});
    CHECK(tr0.states.size() == 1);
    CHECK(tr0.inputs.empty());
    CHECK(replay_check(tr0, tiny));

    // bitwise reproducibility
    auto tr2 = simulate(sc, em, {-2.0, -0.8}, x0, {});
    CHECK(tr.states == tr2.states);
    CHECK(tr.outputs == tr2.outputs);
    CHECK(tr.inputs == tr2.inputs);
}

TEST_CASE("uncontrolled lane drift grows monotonically") {
    Scenario sc = default_scenario(ScenarioId::lane_keeping);
    Emulator em = default_emulator(ScenarioId::lane_keeping);
    Vec x0(lane::STATE_DIM, 0.0);
    x0[lane::V] = 6.0;
    x0[lane::THETA_AV] = 0.2;

    auto tr = simulate(sc, em, {0.0, 0.0}, x0, {});
    for (int i = 1; i <= 20; ++i) {
        CHECK(std::abs(tr.states[i][lane::D]) >
              std::abs(tr.states[i - 1][lane::D]));
    }
}

TEST_CASE("lane mirror symmetry of the full closed loop") {
    Scenario sc = default_scenario(ScenarioId::lane_keeping);
    Emulator em = default_emulator(ScenarioId::lane_keeping);
    Vec x0(lane::STATE_DIM, 0.0);
    x0[lane::V] = 5.5;
    x0[lane::THETA_AV] = 0.17;
    x0[lane::D] = 0.31;
    Vec x0m = x0;
    x0m[lane::THETA_AV] = -x0[lane::THETA_AV];
    x0m[lane::D] = -x0[lane::D];

    auto tr = simulate(sc, em, {-2.0, -0.8}, x0, {});
    auto trm = simulate(sc, em, {-2.0, -0.8}, x0m, {});
    REQUIRE(tr.states.size() == trm.states.size());
    for (std::size_t i = 0; i < tr.states.size(); ++i) {
        CHECK(trm.states[i][lane::D] == -tr.states[i][lane::D]);
        CHECK(trm.states[i][lane::THETA_AV] == -tr.states[i][lane::THETA_AV]);
        CHECK(trm.states[i][lane::X] == tr.states[i][lane::X]);
    }
    for (std::size_t i = 0; i < tr.inputs.size(); ++i) {
        CHECK(trm.inputs[i][0] == -tr.inputs[i][0]);
    }
}

TEST_CASE("braking episode couples the rear car speed to the ego") {
    Scenario sc = default_scenario(ScenarioId::braking);
    Vec x0{50.0, 9.0, 12.0, 0.0};
    couple_x0(ScenarioId::braking, x0);
    CHECK(x0[brake::V_REAR] == 9.0);

    Vec xl(lane::STATE_DIM, 1.0);
    Vec before = xl;
    couple_x0(ScenarioId::lane_keeping, xl);
    CHECK(xl == before);

    Emulator em = default_emulator(ScenarioId::braking);
    auto tr = simulate(sc, em, {0.0, 100.0}, x0, {0.2, 10.0});
    CHECK(tr.states[1][brake::D] == Catch::Approx(50.0 - 0.05 * 9.0).margin(1e-12));
    CHECK(tr.states[1][brake::V] == 9.0);  // u stays 0 under this parameterization
    CHECK(replay_check(tr, sc));
}

TEST_CASE("simulation fault is flagged on divergence") {
    Scenario sc = default_scenario(ScenarioId::lane_keeping);
    Emulator em = default_emulator(ScenarioId::lane_keeping);
    Vec x0(lane::STATE_DIM, 0.0);
    x0[lane::V] = 1e308;  // forces overflow in the position bookkeeping
    auto tr = simulate(sc, em, {0.0, 0.0}, x0, {});
    CHECK(tr.fault);
    CHECK(tr.states.size() < 161);
}
