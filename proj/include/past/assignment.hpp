#pragma once

// Gated minimum-cost bipartite assignment (Hungarian algorithm).
//
// Pairs whose cost exceeds the gate are forbidden. The number of matched pairs is maximized
// first and total cost second. Among equal-cost optima the result is the lexicographically
// smallest assignment in row order (each row prefers its lowest column, "unmatched" last).

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

namespace past {

struct Assignment {
    std::vector<std::pair<int, int>> matches;  // (row, col), ascending row
    std::vector<int> unmatched_rows;
    std::vector<int> unmatched_cols;
    double total_cost{0.0};
};

namespace detail {

/// Square Hungarian on an n x n row-major matrix; +inf marks forbidden cells. Returns the
/// column of each row and the optimal value. A finite-cost perfect matching must exist.
inline std::pair<std::vector<int>, double> hungarian_square(const std::vector<double>& a, int n) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = a[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> col_of(n, -1);
    double total = 0.0;
    for (int j = 1; j <= n; ++j) {
        col_of[p[j] - 1] = j - 1;
        total += a[(p[j] - 1) * n + (j - 1)];
    }
    return {std::move(col_of), total};
}

}  // namespace detail

/// `cost` holds one row of `cols` entries per row item. Cells with cost > gate are never matched.
inline Assignment gated_assignment(const std::vector<std::vector<double>>& cost, std::size_t cols,
                                   double gate) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    const int n = static_cast<int>(cost.size());
    const int m = static_cast<int>(cols);
    Assignment out;
    if (n == 0 || m == 0) {
        for (int i = 0; i < n; ++i) out.unmatched_rows.push_back(i);
        for (int j = 0; j < m; ++j) out.unmatched_cols.push_back(j);
        return out;
    }

    // Square embedding: rows [0,n) are real rows, [n,n+m) are slack rows for unmatched columns;
    // columns [0,m) are real, [m,m+n) are slack columns for unmatched rows. Leaving one row or
    // column unmatched costs `miss`, large enough that one more match always wins.
    const int size = n + m;
    const double miss = (std::min(n, m) + 1.0) * std::max(gate, 1.0);
    std::vector<double> base(static_cast<std::size_t>(size) * size, inf);
    auto at = [&](std::vector<double>& a, int r, int c) -> double& { return a[r * size + c]; };
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j)
            if (cost[i][j] <= gate) at(base, i, j) = cost[i][j];
        at(base, i, m + i) = miss;
    }
    for (int j = 0; j < m; ++j) {
        at(base, n + j, j) = miss;
        for (int k = 0; k < n; ++k) at(base, n + j, m + k) = 0.0;
    }

    auto [col_of, best] = detail::hungarian_square(base, size);
    const double tol = 1e-9 * (1.0 + std::abs(best));

    // Lexicographic refinement: pin each row to the smallest option that keeps the optimum.
    std::vector<double> pinned = base;
    for (int i = 0; i < n; ++i) {
        const int current = col_of[i] < m ? col_of[i] : m;  // m stands for "unmatched"
        int chosen = current;
        for (int j = 0; j < current; ++j) {
            if (at(pinned, i, j) == inf) continue;
            std::vector<double> trial = pinned;
            for (int c = 0; c < size; ++c)
                if (c != j) at(trial, i, c) = inf;
            for (int r = 0; r < size; ++r)
                if (r != i) at(trial, r, j) = inf;
            auto [cols, value] = detail::hungarian_square(trial, size);
            if (value <= best + tol) {
                chosen = j;
                col_of = std::move(cols);
                pinned = std::move(trial);
                break;
            }
        }
        if (chosen == current) {
            const int c = col_of[i];
            for (int cc = 0; cc < size; ++cc)
                if (cc != c) at(pinned, i, cc) = inf;
            for (int r = 0; r < size; ++r)
                if (r != i) at(pinned, r, c) = inf;
        }
    }

    std::vector<char> col_used(m, 0);
    for (int i = 0; i < n; ++i) {
        const int j = col_of[i];
        if (j < m) {
            out.matches.emplace_back(i, j);
            out.total_cost += cost[i][j];
            col_used[j] = 1;
        } else {
            out.unmatched_rows.push_back(i);
        }
    }
    for (int j = 0; j < m; ++j)
        if (!col_used[j]) out.unmatched_cols.push_back(j);
    return out;
}

}  // namespace past
