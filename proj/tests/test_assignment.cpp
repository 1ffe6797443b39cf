#include "motkit/assignment.hpp"
#include "motkit/rng.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>

using namespace motkit;

namespace {

// Costs on a dyadic grid (multiples of 1/64) so sums are exact doubles
// and the oracle comparison can demand bitwise equality.
CostMatrix random_grid_matrix(Rng& rng, int max_dim = 7) {
    const int rows = 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(max_dim)));
    const int cols = 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(max_dim)));
    CostMatrix m(rows, cols);
    for (double& v : m.costs) v = static_cast<double>(rng.uniform_index(65)) / 64.0;
    return m;
}

// Counts optimal (max-cardinality, min-cost) assignments; test-local.
int count_optima(const CostMatrix& m, double best_cost, int best_card) {
    int count = 0;
    std::vector<char> used(static_cast<std::size_t>(m.cols), 0);
    auto rec = [&](auto&& self, int row, int card, double cost) -> void {
        if (row == m.rows) {
            if (card == best_card && cost == best_cost) ++count;
            return;
        }
        for (int c = 0; c < m.cols; ++c) {
            if (used[static_cast<std::size_t>(c)] || !std::isfinite(m.at(row, c))) continue;
            used[static_cast<std::size_t>(c)] = 1;
            self(self, row + 1, card + 1, cost + m.at(row, c));
            used[static_cast<std::size_t>(c)] = 0;
        }
        self(self, row + 1, card, cost);
    };
    rec(rec, 0, 0, 0.0);
    return count;
}

void check_partition(const CostMatrix& m, const AssignmentResult& r) {
    std::set<int> rows, cols;
    for (const auto& [row, col] : r.matches) {
        CHECK(rows.insert(row).second);
        CHECK(cols.insert(col).second);
        CHECK(std::isfinite(m.at(row, col)));
    }
    for (int row : r.unmatched_rows) CHECK(rows.insert(row).second);
    for (int col : r.unmatched_cols) CHECK(cols.insert(col).second);
    CHECK(static_cast<int>(rows.size()) == m.rows);
    CHECK(static_cast<int>(cols.size()) == m.cols);
}

} // namespace

TEST_CASE("solve_min_cost zero diagonal") {
    CostMatrix m(3, 3, 1.0);
    for (int i = 0; i < 3; ++i) m.at(i, i) = 0.0;
    const auto r = solve_min_cost(m);
    REQUIRE(r.matches.size() == 3);
    for (const auto& [row, col] : r.matches) CHECK(row == col);
    CHECK(r.total_cost == 0.0);
}

TEST_CASE("solve_min_cost 2x2") {
    // Brute force over the two permutations: 1+1=2 beats 2+2=4.
    CostMatrix m(2, 2);
    m.at(0, 0) = 1;
    m.at(0, 1) = 2;
    m.at(1, 0) = 2;
    m.at(1, 1) = 1;
    const auto r = solve_min_cost(m);
    REQUIRE(r.matches.size() == 2);
    CHECK(r.matches[0] == std::pair<int, int>(0, 0));
    CHECK(r.matches[1] == std::pair<int, int>(1, 1));
    CHECK(r.total_cost == 2.0);
}

TEST_CASE("solve_min_cost empty side") {
    const auto r = solve_min_cost(CostMatrix(0, 4));
    CHECK(r.matches.empty());
    CHECK(r.unmatched_cols.size() == 4);
}

TEST_CASE("solve_min_cost rejects negative costs") {
    CostMatrix m(1, 1, -1.0);
    CHECK_THROWS_AS(solve_min_cost(m), std::invalid_argument);
}

TEST_CASE("solve_with_threshold") {
    SECTION("full rejection") {
        CostMatrix m(2, 2, 0.9);
        const auto r = solve_with_threshold(m, 0.5);
        CHECK(r.matches.empty());
        CHECK(r.unmatched_rows.size() == 2);
        CHECK(r.unmatched_cols.size() == 2);
    }
    SECTION("diagonal survives") {
        CostMatrix m(2, 2, 0.9);
        m.at(0, 0) = 0.1;
        m.at(1, 1) = 0.1;
        const auto r = solve_with_threshold(m, 0.5);
        REQUIRE(r.matches.size() == 2);
        CHECK(r.matches[0] == std::pair<int, int>(0, 0));
        CHECK(r.matches[1] == std::pair<int, int>(1, 1));
    }
    SECTION("boundary is inclusive") {
        CostMatrix m(1, 1, 0.5);
        const auto r = solve_with_threshold(m, 0.5);
        REQUIRE(r.matches.size() == 1);
    }
}

TEST_CASE("brute force oracle basics") {
    SECTION("1x1") {
        CostMatrix m(1, 1, 0.25);
        const auto r = brute_force_oracle(m);
        REQUIRE(r.matches.size() == 1);
        CHECK(r.total_cost == 0.25);
    }
    SECTION("all infeasible") {
        CostMatrix m(2, 2, CostMatrix::infeasible());
        const auto r = brute_force_oracle(m);
        CHECK(r.matches.empty());
    }
    SECTION("size limit") {
        CHECK_THROWS_AS(brute_force_oracle(CostMatrix(9, 2)), std::invalid_argument);
    }
}

TEST_CASE("solver equals oracle on random grid matrices") {
    Rng rng(2024);
    for (int trial = 0; trial < 300; ++trial) {
        const CostMatrix m = random_grid_matrix(rng);
        const auto fast = solve_min_cost(m);
        const auto slow = brute_force_oracle(m);
        REQUIRE(fast.total_cost == slow.total_cost);  // exact: dyadic grid
        REQUIRE(fast.matches.size() == slow.matches.size());
        check_partition(m, fast);
    }
}

TEST_CASE("solver equals oracle with infeasible entries") {
    Rng rng(77);
    for (int trial = 0; trial < 200; ++trial) {
        CostMatrix m = random_grid_matrix(rng, 6);
        for (double& v : m.costs)
            if (rng.bernoulli(0.3)) v = CostMatrix::infeasible();
        const auto fast = solve_min_cost(m);
        const auto slow = brute_force_oracle(m);
        CHECK(fast.total_cost == slow.total_cost);
        CHECK(fast.matches.size() == slow.matches.size());  // max feasible cardinality
        check_partition(m, fast);
    }
}

TEST_CASE("threshold monotonicity") {
    Rng rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        const CostMatrix m = random_grid_matrix(rng, 6);
        std::size_t prev = 0;
        for (double kappa : {0.1, 0.3, 0.5, 0.7, 0.9, 1.0}) {
            const auto r = solve_with_threshold(m, kappa);
            CHECK(r.matches.size() >= prev);
            prev = r.matches.size();
            for (const auto& [row, col] : r.matches) CHECK(m.at(row, col) <= kappa);
        }
    }
}

TEST_CASE("row permutation equivariance on unique optima") {
    Rng rng(5150);
    int tested = 0;
    for (int trial = 0; trial < 200 && tested < 60; ++trial) {
        const int n = 2 + static_cast<int>(rng.uniform_index(4));
        CostMatrix m(n, n);
        for (double& v : m.costs) v = static_cast<double>(rng.uniform_index(1024)) / 1024.0;

        const auto base = solve_min_cost(m);
        if (count_optima(m, base.total_cost, static_cast<int>(base.matches.size())) != 1)
            continue;  // equivariance is only well-defined for unique optima
        ++tested;

        std::vector<int> perm(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
        for (int i = n - 1; i > 0; --i)
            std::swap(perm[static_cast<std::size_t>(i)],
                      perm[static_cast<std::size_t>(rng.uniform_index(static_cast<std::uint64_t>(i) + 1))]);

        CostMatrix shuffled(n, n);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c)
                shuffled.at(r, c) = m.at(perm[static_cast<std::size_t>(r)], c);

        const auto permuted = solve_min_cost(shuffled);
        REQUIRE(permuted.total_cost == base.total_cost);
        std::vector<int> base_cols(static_cast<std::size_t>(n), -1);
        for (const auto& [row, col] : base.matches) base_cols[static_cast<std::size_t>(row)] = col;
        for (const auto& [row, col] : permuted.matches)
            CHECK(base_cols[static_cast<std::size_t>(perm[static_cast<std::size_t>(row)])] == col);
    }
    CHECK(tested >= 50);
}
