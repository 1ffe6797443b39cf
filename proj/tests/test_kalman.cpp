#include "motkit/kalman.hpp"
#include "motkit/rng.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace motkit;

TEST_CASE("initiate sets center, aspect, height and zero velocity") {
    KalmanFilter kf;
    const auto s = kf.initiate({0, 0, 10, 20});
    CHECK(s.mean(0) == 5.0);
    CHECK(s.mean(1) == 10.0);
    CHECK(s.mean(2) == 0.5);
    CHECK(s.mean(3) == 20.0);
    for (int i = 4; i < 8; ++i) CHECK(s.mean(i) == 0.0);

    const auto s2 = kf.initiate({0, 0, 10, 20});
    CHECK(s.mean == s2.mean);
    CHECK(s.covariance == s2.covariance);

    CHECK_THROWS_AS(kf.initiate({0, 0, 0, 10}), std::invalid_argument);
}

TEST_CASE("covariance stays symmetric with nonnegative diagonal") {
    KalmanFilter kf;
    auto s = kf.initiate({5, 5, 12, 24});
    Rng rng(9);
    for (int i = 0; i < 30; ++i) {
        s = kf.predict(s);
        CHECK((s.covariance - s.covariance.transpose()).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(s.covariance.diagonal().minCoeff() >= 0.0);
        s = kf.update(s, {rng.uniform(0.0, 10.0), rng.uniform(0.0, 10.0), 12, 24});
        CHECK((s.covariance - s.covariance.transpose()).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(s.covariance.diagonal().minCoeff() >= 0.0);
    }
}

TEST_CASE("predict advances by the velocity and inflates covariance") {
    KalmanFilter kf;
    auto s = kf.initiate({0, 0, 10, 20});

    const auto still = kf.predict(s);
    CHECK(still.mean(0) == s.mean(0));
    CHECK(still.mean(1) == s.mean(1));
    CHECK(still.covariance.trace() > s.covariance.trace());

    s.mean(4) = 1.0;  // vcx
    const auto moved = kf.predict(s);
    CHECK(moved.mean(0) == s.mean(0) + 1.0);
    CHECK(moved.mean(1) == s.mean(1));
}

TEST_CASE("update with the predicted position leaves the mean in place") {
    KalmanFilter kf;
    const auto s = kf.initiate({0, 0, 10, 20});
    const auto updated = kf.update(s, {0, 0, 10, 20});
    CHECK(updated.mean(0) == Catch::Approx(s.mean(0)).margin(1e-12));
    CHECK(updated.mean(1) == Catch::Approx(s.mean(1)).margin(1e-12));
    CHECK(updated.covariance.trace() <= s.covariance.trace());
}

TEST_CASE("repeated identical measurements contract the position error") {
    KalmanFilter kf;
    auto s = kf.initiate({0, 0, 10, 20});
    const BoundingBox target{40, 30, 10, 20};  // center (45, 40)

    // The first two cycles carry the velocity-estimation transient of a
    // constant-velocity filter started at zero velocity; from there the
    // error must shrink every single frame.
    for (int i = 0; i < 3; ++i) {
        s = kf.predict(s);
        s = kf.update(s, target);
    }
    double prev_err = std::hypot(s.mean(0) - 45.0, s.mean(1) - 40.0);
    const double settled_err = prev_err;
    for (int i = 0; i < 50; ++i) {
        s = kf.predict(s);
        s = kf.update(s, target);
        const double err = std::hypot(s.mean(0) - 45.0, s.mean(1) - 40.0);
        CHECK(err <= prev_err + 1e-12);
        prev_err = err;
    }
    CHECK(prev_err < 0.01 * settled_err);
}

TEST_CASE("gating distance and cost gating") {
    KalmanFilter kf;
    const auto s = kf.initiate({0, 0, 10, 20});

    SECTION("detection at the predicted mean is never gated") {
        CHECK(kf.gating_distance(s, {0, 0, 10, 20}) < 1e-9);
        Detection det;
        det.box = {0, 0, 10, 20};
        CostMatrix costs(1, 1, 0.25);
        const auto gated = gate_cost_matrix(costs, kf, {s}, {det}, KalmanFilter::kDefaultGate);
        CHECK(gated.at(0, 0) == 0.25);
    }

    SECTION("far detection with tight covariance becomes infeasible") {
        // Position std at initiation is 2*h/20 = 2; a 500 px offset is
        // hundreds of sigmas away, far beyond the 9.4877 gate.
        Detection det;
        det.box = {500, 500, 10, 20};
        CHECK(kf.gating_distance(s, det.box) > KalmanFilter::kDefaultGate);
        CostMatrix costs(1, 1, 0.25);
        const auto gated = gate_cost_matrix(costs, kf, {s}, {det}, KalmanFilter::kDefaultGate);
        CHECK(gated.at(0, 0) == CostMatrix::infeasible());
    }

    SECTION("infinite gate leaves the matrix unchanged") {
        Detection det;
        det.box = {500, 500, 10, 20};
        CostMatrix costs(1, 1, 0.25);
        const auto gated = gate_cost_matrix(costs, kf, {s}, {det},
                                            std::numeric_limits<double>::infinity());
        CHECK(gated.costs == costs.costs);
    }

    SECTION("gating only ever writes +inf") {
        Rng rng(31);
        std::vector<KalmanState> states;
        std::vector<Detection> dets;
        for (int i = 0; i < 4; ++i)
            states.push_back(kf.initiate({rng.uniform(0.0, 100.0), rng.uniform(0.0, 100.0),
                                          10, 20}));
        for (int i = 0; i < 5; ++i) {
            Detection det;
            det.box = {rng.uniform(0.0, 300.0), rng.uniform(0.0, 300.0), 10, 20};
            dets.push_back(det);
        }
        CostMatrix costs(5, 4);
        for (double& v : costs.costs) v = rng.uniform(0.0, 1.0);
        const auto gated = gate_cost_matrix(costs, kf, states, dets, 9.4877);
        for (std::size_t i = 0; i < costs.costs.size(); ++i)
            CHECK((gated.costs[i] == costs.costs[i] ||
                   gated.costs[i] == CostMatrix::infeasible()));
    }

    SECTION("dimension mismatch") {
        CostMatrix costs(2, 1);
        Detection det;
        det.box = {0, 0, 10, 20};
        CHECK_THROWS_AS(gate_cost_matrix(costs, kf, {s}, {det}, 9.4877),
                        std::invalid_argument);
    }
}
