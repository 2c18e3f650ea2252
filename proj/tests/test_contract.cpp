#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oma/contract.hpp"

#include <random>

using namespace oma;

namespace {
ContractSpec table2() {
    ContractSpec c; // eta = 0.6, G = 50, N = 2, delta = 1, x0 = 100
    c.validate();
    return c;
}
} // namespace

TEST_CASE("transition K(x,a) = max(x-a,0)") {
    const ContractSpec c = table2();
    CHECK(c.transition(100.0, 30.0) == 70.0);
    CHECK(c.transition(50.0, 50.0) == 0.0);
    CHECK(c.transition(10.0, 0.0) == 10.0);
    CHECK_THROWS(c.transition(100.0, -1.0));
    CHECK_THROWS(c.transition(100.0, 100.5));
    // boundary noise within 1e-12*max(1,x) is clamped, not rejected
    CHECK(c.transition(100.0, 100.0 + 5e-11) == 0.0);
}

TEST_CASE("feasible set [0, x]") {
    const ContractSpec c = table2();
    CHECK(c.feasible_set(100.0) == std::pair{0.0, 100.0});
    CHECK(c.feasible_set(0.0) == std::pair{0.0, 0.0});
    CHECK(c.feasible_set(37.5) == std::pair{0.0, 37.5});
    CHECK_THROWS(c.feasible_set(-1.0));
}

TEST_CASE("intermediate payoff a(1-eta)") {
    ContractSpec c = table2();
    CHECK(c.intermediate_payoff(100.0, 10.0) == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(c.intermediate_payoff(100.0, 0.0) == 0.0);
    c.penalty_eta = 0.0;
    CHECK(c.intermediate_payoff(10.0, 10.0) == 10.0);
    CHECK_THROWS(c.intermediate_payoff(10.0, 11.0));
}

TEST_CASE("terminal payoff max(x, G)") {
    const ContractSpec c = table2();
    CHECK(c.terminal_payoff(30.0) == 50.0);
    CHECK(c.terminal_payoff(80.0) == 80.0);
    CHECK(c.terminal_payoff(50.0) == 50.0);
    CHECK_THROWS(c.terminal_payoff(-0.01));
}

TEST_CASE("payoff properties on random states") {
    const ContractSpec c = table2();
    std::mt19937 gen(1234);
    std::uniform_real_distribution<double> ux(0.0, 200.0);
    std::uniform_real_distribution<double> ua(0.0, 1.0);
    for (int i = 0; i < 2000; ++i) {
        const double x = ux(gen);
        const double a = ua(gen) * x;
        // account conservation before penalty
        CHECK(c.transition(x, a) + a == doctest::Approx(x).epsilon(1e-12));
        // payoff lower bounds
        CHECK(c.terminal_payoff(x) >= x);
        if (x <= c.guarantee) CHECK(c.terminal_payoff(x) >= c.guarantee);
        // linearity in a with slope (1-eta)
        CHECK(c.intermediate_payoff(x, a) ==
              doctest::Approx(a * (1.0 - c.penalty_eta)).epsilon(1e-12));
    }
    // convex and nondecreasing terminal payoff: second differences >= 0
    for (double x = 0.0; x < 150.0; x += 0.5) {
        const double h = 0.25;
        const double d2 = c.terminal_payoff(x + 2 * h) -
                          2.0 * c.terminal_payoff(x + h) + c.terminal_payoff(x);
        CHECK(d2 >= -1e-12);
        CHECK(c.terminal_payoff(x + h) >= c.terminal_payoff(x));
    }
}

TEST_CASE("contract validation rejects bad parameters") {
    ContractSpec c = table2();
    c.penalty_eta = 1.5;
    CHECK_THROWS(c.validate());
    c = table2();
    c.n_periods = 1;
    CHECK_THROWS(c.validate());
    c = table2();
    c.period_delta = 0.0;
    CHECK_THROWS(c.validate());
    c = table2();
    c.guarantee = -1.0;
    CHECK_THROWS(c.validate());
}
