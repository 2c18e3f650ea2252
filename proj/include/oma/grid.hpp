#pragma once

#include "oma/contract.hpp"
#include "oma/errors.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace oma {

// Discretized value function at one event date: V(t_n, x) sampled on an
// ascending account-value axis. Linear interpolation; flat extrapolation on
// the right; the axis starts at x = 0 so there is no left tail.
struct ValueGrid {
    std::vector<double> x;
    std::vector<double> value;
    int date_index = 0; // which t_n this grid represents
    double time = 0.0;

    void validate() const {
        OMA_REQUIRE(x.size() >= 4, "grid: need at least 4 nodes");
        OMA_REQUIRE(x.size() == value.size(), "grid: x/value size mismatch");
        OMA_REQUIRE(x.front() >= 0.0, "grid: nodes must be >= 0");
        for (std::size_t i = 1; i < x.size(); ++i)
            OMA_REQUIRE(x[i] > x[i - 1], "grid: nodes must be strictly ascending");
        for (double v : value)
            OMA_NUMERIC_CHECK(std::isfinite(v), "grid: non-finite value");
    }

    double x_max() const { return x.back(); }

    double interpolate(double xq) const {
        if (xq <= x.front()) return value.front();
        if (xq >= x.back()) return value.back();
        const auto it = std::upper_bound(x.begin(), x.end(), xq);
        const std::size_t i = static_cast<std::size_t>(it - x.begin());
        const double w = (xq - x[i - 1]) / (x[i] - x[i - 1]);
        return value[i - 1] + w * (value[i] - value[i - 1]);
    }
};

struct GridSpec {
    int n_nodes = 801;
    double x_max_multiple = 6.0; // x_max = multiple * max(x0, G)
    double x_max_override = 0.0; // used instead when > 0

    double x_max(const ContractSpec& c) const {
        if (x_max_override > 0.0) return x_max_override;
        return x_max_multiple * std::max(c.initial_account, c.guarantee);
    }
};

// Drop interior nodes that are collinear with their neighbours. The
// interpolant is unchanged; closed-form segment integration then only pays
// for true breakpoints (the terminal payoff collapses to its kink).
inline ValueGrid simplify_claim(const ValueGrid& g) {
    if (g.x.size() <= 2) return g;
    ValueGrid out;
    out.date_index = g.date_index;
    out.time = g.time;
    out.x.push_back(g.x.front());
    out.value.push_back(g.value.front());
    double scale = 1.0;
    for (double v : g.value) scale = std::max(scale, std::abs(v));
    for (std::size_t j = 1; j + 1 < g.x.size(); ++j) {
        const double w = (g.x[j] - out.x.back()) / (g.x[j + 1] - out.x.back());
        const double lerp = out.value.back() + w * (g.value[j + 1] - out.value.back());
        if (std::abs(g.value[j] - lerp) > 1e-13 * scale) {
            out.x.push_back(g.x[j]);
            out.value.push_back(g.value[j]);
        }
    }
    out.x.push_back(g.x.back());
    out.value.push_back(g.value.back());
    return out;
}

// Leading nodes covering [0, x] plus one beyond: queries in [0, x] see the
// same interpolant as the full axis. At least 4 nodes for grid validity.
inline std::vector<double> axis_prefix(const std::vector<double>& axis, double x) {
    auto it = std::upper_bound(axis.begin(), axis.end(), x);
    if (it != axis.end()) ++it;
    const auto n = std::max<std::ptrdiff_t>(it - axis.begin(), 4);
    return {axis.begin(), axis.begin() + std::min<std::ptrdiff_t>(
                              n, static_cast<std::ptrdiff_t>(axis.size()))};
}

// Uniform axis on [0, x_max] with the contract's payoff kink (x = G)
// inserted so the terminal data is represented exactly.
inline std::vector<double> make_axis(const GridSpec& spec, const ContractSpec& c) {
    OMA_REQUIRE(spec.n_nodes >= 4, "grid: fewer than 4 nodes");
    const double xmax = spec.x_max(c);
    OMA_REQUIRE(xmax > 0.0, "grid: x_max must be > 0");
    std::vector<double> axis(spec.n_nodes);
    const double h = xmax / (spec.n_nodes - 1);
    for (int i = 0; i < spec.n_nodes; ++i) axis[i] = i * h;
    axis.back() = xmax;
    if (c.guarantee > 0.0 && c.guarantee < xmax) axis.push_back(c.guarantee);
    std::sort(axis.begin(), axis.end());
    axis.erase(std::unique(axis.begin(), axis.end(),
                           [h](double a, double b) { return b - a < 1e-9 * h; }),
               axis.end());
    return axis;
}

} // namespace oma
