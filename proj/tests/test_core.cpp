#include "motkit/core.hpp"
#include "motkit/rng.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace motkit;

namespace {

BoundingBox random_box(Rng& rng) {
    return {rng.uniform(-50.0, 50.0), rng.uniform(-50.0, 50.0), rng.uniform(0.0, 40.0),
            rng.uniform(0.0, 40.0)};
}

} // namespace

TEST_CASE("iou basics") {
    const BoundingBox unit{0, 0, 1, 1};
    CHECK(iou(unit, unit) == 1.0);

    const BoundingBox far_away{10, 10, 1, 1};
    CHECK(iou(unit, far_away) == 0.0);

    // Two 1x1 boxes offset by 0.5 in x: intersection 0.5, union 1.5.
    const BoundingBox shifted{0.5, 0, 1, 1};
    CHECK(iou(unit, shifted) == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("iou degenerate boxes") {
    const BoundingBox empty{0, 0, 0, 0};
    CHECK(iou(empty, empty) == 0.0);
    CHECK(iou(empty, {0, 0, 1, 1}) == 0.0);
}

TEST_CASE("iou is symmetric and self-iou is 1") {
    Rng rng(42);
    for (int i = 0; i < 500; ++i) {
        const BoundingBox a = random_box(rng);
        const BoundingBox b = random_box(rng);
        CHECK(iou(a, b) == iou(b, a));
        // Exactly 1 mathematically; float rounding of left+width leaves
        // ~1 ulp of dust on non-representable extents.
        if (a.area() > 0.0) CHECK(iou(a, a) == Catch::Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("cosine similarity basics") {
    Embedding ex(2), ey(2), diag(2);
    ex << 1, 0;
    ey << 0, 1;
    diag << 1, 1;
    CHECK(cosine_similarity(ex, ex) == 1.0);
    CHECK(cosine_similarity(ex, ey) == 0.0);
    CHECK(cosine_similarity(diag, ex) == Catch::Approx(0.70710678).margin(1e-8));
}

TEST_CASE("cosine similarity guards") {
    Embedding a(2), b(3);
    a << 1, 0;
    b << 1, 0, 0;
    CHECK_THROWS_AS(cosine_similarity(a, b), std::invalid_argument);

    const Embedding zero = Embedding::Zero(2);
    CHECK(cosine_similarity(zero, a) == 0.0);
}

TEST_CASE("cosine similarity is scale invariant") {
    Rng rng(7);
    for (int i = 0; i < 200; ++i) {
        Embedding u(4), v(4);
        for (int d = 0; d < 4; ++d) {
            u(d) = rng.uniform(-1.0, 1.0);
            v(d) = rng.uniform(-1.0, 1.0);
        }
        const double k = rng.uniform(0.1, 10.0);
        CHECK(cosine_similarity(k * u, v) == Catch::Approx(cosine_similarity(u, v)).margin(1e-12));
    }
}

TEST_CASE("l2_normalize") {
    Embedding v(2);
    v << 3, 4;
    const auto n = l2_normalize(v);
    CHECK_FALSE(n.degenerate);
    CHECK(n.value(0) == Catch::Approx(0.6).margin(1e-15));
    CHECK(n.value(1) == Catch::Approx(0.8).margin(1e-15));

    // Idempotent on nonzero inputs.
    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
        Embedding u(5);
        for (int d = 0; d < 5; ++d) u(d) = rng.uniform(-2.0, 2.0);
        if (u.norm() < 1e-6) continue;
        const auto once = l2_normalize(u);
        const auto twice = l2_normalize(once.value);
        CHECK((once.value - twice.value).lpNorm<Eigen::Infinity>() < 1e-12);
        CHECK(once.value.norm() == Catch::Approx(1.0).margin(1e-9));
    }

    const auto zero = l2_normalize(Embedding::Zero(3));
    CHECK(zero.degenerate);
    CHECK(zero.value.isZero());
}
