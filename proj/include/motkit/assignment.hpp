// Minimum-cost bipartite assignment (Jonker-Volgenant style shortest
// augmenting paths) with threshold rejection, plus an exhaustive oracle
// for testing.
//
// Semantics: among all feasible matchings of maximum cardinality
// (feasible = finite cost entries), return one of minimum total cost.
// Entries equal to +inf are never matched. Rectangular inputs are padded
// internally with a large-but-finite dummy cost; dummy matches are
// reported as unmatched. The solver is deterministic: rows are augmented
// in ascending index and column ties resolve toward the lower index.
//
// With costs drawn from a dyadic grid (as the tests do) every
// intermediate value is exactly representable, so optimal totals compare
// exactly against the oracle.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace motkit {

struct CostMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> costs;  // row-major, rows * cols entries

    CostMatrix() = default;
    CostMatrix(int r, int c, double fill = 0.0)
        : rows(r), cols(c), costs(static_cast<std::size_t>(r) * c, fill) {}

    static constexpr double infeasible() {
        return std::numeric_limits<double>::infinity();
    }

    double& at(int r, int c) { return costs[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return costs[static_cast<std::size_t>(r) * cols + c]; }
};

struct AssignmentResult {
    std::vector<std::pair<int, int>> matches;  // (row, col), sorted by row
    std::vector<int> unmatched_rows;
    std::vector<int> unmatched_cols;
    double total_cost = 0.0;
};

namespace detail {

inline AssignmentResult finalize(const CostMatrix& m, const std::vector<int>& row_to_col) {
    AssignmentResult out;
    std::vector<char> col_used(static_cast<std::size_t>(m.cols), 0);
    for (int r = 0; r < m.rows; ++r) {
        const int c = row_to_col[static_cast<std::size_t>(r)];
        if (c >= 0 && c < m.cols && std::isfinite(m.at(r, c))) {
            out.matches.emplace_back(r, c);
            out.total_cost += m.at(r, c);
            col_used[static_cast<std::size_t>(c)] = 1;
        } else {
            out.unmatched_rows.push_back(r);
        }
    }
    for (int c = 0; c < m.cols; ++c)
        if (!col_used[static_cast<std::size_t>(c)]) out.unmatched_cols.push_back(c);
    return out;
}

} // namespace detail

// Global minimum-cost assignment as described in the header comment.
inline AssignmentResult solve_min_cost(const CostMatrix& m) {
    for (double v : m.costs)
        if (!(v >= 0.0))  // rejects negatives and NaN, admits +inf
            throw std::invalid_argument("solve_min_cost: costs must be >= 0 or +inf");

    if (m.rows == 0 || m.cols == 0)
        return detail::finalize(m, std::vector<int>(static_cast<std::size_t>(m.rows), -1));

    // Dummy cost dominating any feasible total, so the solver prefers
    // maximum feasible cardinality first, then minimum finite cost.
    double finite_sum = 0.0;
    for (double v : m.costs)
        if (std::isfinite(v)) finite_sum += v;
    const double big = finite_sum + 1.0;

    const int n = std::max(m.rows, m.cols);
    std::vector<double> a(static_cast<std::size_t>(n) * n, big);
    for (int r = 0; r < m.rows; ++r)
        for (int c = 0; c < m.cols; ++c)
            if (std::isfinite(m.at(r, c)))
                a[static_cast<std::size_t>(r) * n + c] = m.at(r, c);

    // Shortest augmenting path over the square padded matrix.
    // 1-based potentials, p[j] = row matched to column j.
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<double> v(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<int> p(static_cast<std::size_t>(n) + 1, 0);
    std::vector<int> way(static_cast<std::size_t>(n) + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(n) + 1, inf);
        std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            const int i0 = p[static_cast<std::size_t>(j0)];
            int j1 = 0;
            double delta = inf;
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double cur =
                    a[static_cast<std::size_t>(i0 - 1) * n + (j - 1)] - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<std::size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<std::size_t>(j0)];
            p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0);
    }

    std::vector<int> row_to_col(static_cast<std::size_t>(m.rows), -1);
    for (int j = 1; j <= n; ++j) {
        const int r = p[static_cast<std::size_t>(j)] - 1;
        if (r >= 0 && r < m.rows) row_to_col[static_cast<std::size_t>(r)] = j - 1;
    }
    return detail::finalize(m, row_to_col);
}

// Rejects entries above kappa before solving; matched pairs therefore all
// satisfy cost <= kappa (boundary inclusive).
inline AssignmentResult solve_with_threshold(const CostMatrix& m, double kappa) {
    if (!(kappa >= 0.0))
        throw std::invalid_argument("solve_with_threshold: kappa must be >= 0");
    CostMatrix gated = m;
    for (double& v : gated.costs)
        if (v > kappa) v = CostMatrix::infeasible();
    return solve_min_cost(gated);
}

// Exhaustive reference solver for matrices up to 8x8: enumerates every
// injective feasible assignment and keeps the maximum-cardinality one of
// minimum cost (ties broken lexicographically by (row, col) pairs).
inline AssignmentResult brute_force_oracle(const CostMatrix& m) {
    if (std::max(m.rows, m.cols) > 8)
        throw std::invalid_argument("brute_force_oracle: limited to 8x8");

    std::vector<int> best(static_cast<std::size_t>(m.rows), -1);
    int best_card = -1;
    double best_cost = 0.0;

    std::vector<int> cur(static_cast<std::size_t>(m.rows), -1);
    std::vector<char> col_used(static_cast<std::size_t>(m.cols), 0);

    auto better = [&](int card, double cost) {
        if (card != best_card) return card > best_card;
        if (cost != best_cost) return cost < best_cost;
        return cur < best;  // lexicographic row_to_col comparison
    };

    auto recurse = [&](auto&& self, int row, int card, double cost) -> void {
        if (row == m.rows) {
            if (better(card, cost)) {
                best = cur;
                best_card = card;
                best_cost = cost;
            }
            return;
        }
        // Bound: even matching every remaining row cannot beat best_card.
        if (card + (m.rows - row) < best_card) return;
        for (int c = 0; c < m.cols; ++c) {
            if (col_used[static_cast<std::size_t>(c)] || !std::isfinite(m.at(row, c))) continue;
            col_used[static_cast<std::size_t>(c)] = 1;
            cur[static_cast<std::size_t>(row)] = c;
            self(self, row + 1, card + 1, cost + m.at(row, c));
            cur[static_cast<std::size_t>(row)] = -1;
            col_used[static_cast<std::size_t>(c)] = 0;
        }
        self(self, row + 1, card, cost);  // leave this row unmatched
    };
    recurse(recurse, 0, 0, 0.0);

    return detail::finalize(m, best);
}

} // namespace motkit
