#pragma once

// Brute-force reference implementations. Deliberately naive: each follows the
// textbook definition directly so it shares no code path with the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <utility>
#include <vector>

namespace easel::oracle {

// Nominal alpha as 1 - D_o / D_e, enumerating ordered value pairs. Units with
// fewer than two values are dropped. Returns nullopt when D_e is zero.
inline std::optional<double> alpha(const std::vector<std::vector<std::optional<int>>>& table) {
    std::vector<std::vector<int>> units;
    for (const auto& row : table) {
        std::vector<int> u;
        for (const auto& v : row)
            if (v) u.push_back(*v);
        if (u.size() >= 2) units.push_back(u);
    }
    std::vector<int> all;
    for (const auto& u : units) all.insert(all.end(), u.begin(), u.end());
    const double n = static_cast<double>(all.size());
    double observed = 0;
    for (const auto& u : units) {
        double d = 0;
        for (std::size_t i = 0; i < u.size(); ++i)
            for (std::size_t j = 0; j < u.size(); ++j)
                if (i != j && u[i] != u[j]) d += 1;
        observed += d / static_cast<double>(u.size() - 1);
    }
    observed /= n;
    double expected = 0;
    for (std::size_t i = 0; i < all.size(); ++i)
        for (std::size_t j = 0; j < all.size(); ++j)
            if (i != j && all[i] != all[j]) expected += 1;
    expected /= n * (n - 1);
    if (expected == 0) return std::nullopt;
    return 1.0 - observed / expected;
}

inline double cosine(const std::vector<double>& u, const std::vector<double>& v) {
    double dot = 0, uu = 0, vv = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        uu += u[i] * u[i];
        vv += v[i] * v[i];
    }
    return dot / (std::sqrt(uu) * std::sqrt(vv));
}

inline double cliffs(const std::vector<double>& xs, const std::vector<double>& ys) {
    long long gt = 0, lt = 0;
    for (double x : xs)
        for (double y : ys) {
            if (x > y) ++gt;
            if (x < y) ++lt;
        }
    return static_cast<double>(gt - lt) / static_cast<double>(xs.size() * ys.size());
}

struct Signed {
    double w_plus = 0, w_minus = 0, p = 1;
    std::size_t n = 0;
};

// Classic signed-rank test: zero differences dropped, midranks by counting,
// two-sided exact p as P(|S - mean| >= |W+ - mean|) over all 2^n sign flips.
inline Signed signed_rank(const std::vector<std::pair<double, double>>& pairs) {
    std::vector<double> d;
    for (const auto& [a, b] : pairs)
        if (a - b != 0) d.push_back(a - b);
    Signed out;
    out.n = d.size();
    std::vector<double> rank(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        double less = 0, equal = 0;
        for (std::size_t j = 0; j < d.size(); ++j) {
            if (std::abs(d[j]) < std::abs(d[i])) less += 1;
            if (std::abs(d[j]) == std::abs(d[i])) equal += 1;
        }
        rank[i] = less + (equal + 1) / 2;
        (d[i] > 0 ? out.w_plus : out.w_minus) += rank[i];
    }
    double total = 0;
    for (double r : rank) total += r;
    const double mean = total / 2;
    const double observed = std::abs(out.w_plus - mean);
    const std::size_t n = d.size();
    std::size_t extreme = 0;
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
        double s = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (std::size_t{1} << i)) s += rank[i];
        if (std::abs(s - mean) >= observed - 1e-9) ++extreme;
    }
    out.p = static_cast<double>(extreme) / static_cast<double>(std::size_t{1} << n);
    return out;
}

} // namespace easel::oracle
