#pragma once

#include "oma/errors.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace oma {

// Guaranteed-withdrawal contract: equally spaced withdrawal dates
// t_1..t_{N-1}, maturity t_N, inception t_0 (not a withdrawal date).
struct ContractSpec {
    double penalty_eta = 0.6;     // fraction of a withdrawal forfeited
    double guarantee = 50.0;      // maturity floor G
    int n_periods = 2;            // N
    double period_delta = 1.0;    // years between event dates
    double initial_account = 100.0;

    void validate() const {
        OMA_REQUIRE(penalty_eta >= 0.0 && penalty_eta <= 1.0,
                    "contract: eta must lie in [0,1]");
        OMA_REQUIRE(guarantee >= 0.0, "contract: guarantee must be >= 0");
        OMA_REQUIRE(n_periods >= 2, "contract: n_periods must be >= 2");
        OMA_REQUIRE(period_delta > 0.0, "contract: delta must be > 0");
        OMA_REQUIRE(initial_account > 0.0, "contract: x0 must be > 0");
    }

    double time(int n) const { return n * period_delta; }
    double maturity() const { return time(n_periods); }

    // Optimizers probe the boundary; absorb float noise up to
    // 1e-12*max(1,x) and clamp, reject anything worse.
    double check_withdrawal(double x, double a) const {
        OMA_REQUIRE(x >= 0.0, "contract: account value must be >= 0");
        const double tol = 1e-12 * std::max(1.0, x);
        OMA_REQUIRE(a >= -tol && a <= x + tol,
                    "contract: withdrawal outside feasible set [0, x]");
        return std::clamp(a, 0.0, x);
    }

    // K(x,a) = max(x-a, 0)
    double transition(double x, double a) const {
        a = check_withdrawal(x, a);
        return std::max(x - a, 0.0);
    }

    // A_n(x) = [0, x]
    std::pair<double, double> feasible_set(double x) const {
        OMA_REQUIRE(x >= 0.0, "contract: account value must be >= 0");
        return {0.0, x};
    }

    // f_n(x,a) = a(1-eta)
    double intermediate_payoff(double x, double a) const {
        a = check_withdrawal(x, a);
        return a * (1.0 - penalty_eta);
    }

    // g(x) = x + max(G-x, 0) = max(x, G)
    double terminal_payoff(double x) const {
        OMA_REQUIRE(x >= 0.0, "contract: account value must be >= 0");
        return std::max(x, guarantee);
    }
};

} // namespace oma
