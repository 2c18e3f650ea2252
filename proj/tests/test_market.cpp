#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oma/io.hpp"
#include "oma/market.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

using namespace oma;

namespace {

HestonParams table1() { return HestonParams{}; } // r0 k0.1 th0.04 nu0.1 a0.04 rho-0.69

struct Moments {
    double mean, se;
};

Moments column_moments(const PathSet& ps, std::size_t col, bool variance_plane) {
    double acc = 0.0, acc2 = 0.0;
    for (std::size_t m = 0; m < ps.n_paths; ++m) {
        const double x = variance_plane ? ps.var_at(m, col) : ps.at(m, col);
        acc += x;
        acc2 += x * x;
    }
    const double n = static_cast<double>(ps.n_paths);
    const double mean = acc / n;
    const double var = std::max(acc2 / n - mean * mean, 0.0);
    return {mean, std::sqrt(var / n)};
}

} // namespace

TEST_CASE("heston simulation is seed-deterministic and path-count independent") {
    const HestonParams p = table1();
    const PathSet a = simulate_heston(p, 100.0, 0.0, 1.0, 50, 20, 42);
    const PathSet b = simulate_heston(p, 100.0, 0.0, 1.0, 50, 20, 42);
    CHECK(a.asset == b.asset);
    CHECK(a.variance == b.variance);

    const PathSet wide = simulate_heston(p, 100.0, 0.0, 1.0, 50, 60, 42);
    bool prefix_equal = true;
    for (std::size_t m = 0; m < a.n_paths; ++m)
        for (std::size_t i = 0; i < a.n_times(); ++i)
            prefix_equal = prefix_equal && wide.at(m, i) == a.at(m, i);
    CHECK(prefix_equal);

    const PathSet serial = simulate_heston(p, 100.0, 0.0, 1.0, 50, 20, 42, Exec::serial);
    CHECK(serial.asset == a.asset);
    CHECK(serial.variance == a.variance);
}

TEST_CASE("degenerate heston (nu = 0, alpha0 = theta) is the BS market") {
    HestonParams p = table1();
    p.vol_of_vol_nu = 0.0;
    p.alpha0 = p.theta;
    const PathSet ps = simulate_heston(p, 100.0, 0.0, 1.0, 250, 20000, 11);
    for (std::size_t m = 0; m < 200; ++m)
        for (std::size_t i = 0; i < ps.n_times(); ++i)
            CHECK(ps.var_at(m, i) == p.theta);

    // lognormal marginals: ln X_T ~ N(ln x0 - theta T / 2, theta T)
    double acc = 0.0, acc2 = 0.0;
    const std::size_t last = ps.n_times() - 1;
    for (std::size_t m = 0; m < ps.n_paths; ++m) {
        const double lx = std::log(ps.at(m, last));
        acc += lx;
        acc2 += lx * lx;
    }
    const double n = static_cast<double>(ps.n_paths);
    const double mean = acc / n;
    const double var = acc2 / n - mean * mean;
    const double expect_mean = std::log(100.0) - 0.5 * p.theta;
    const double se_mean = std::sqrt(p.theta / n);
    CHECK(std::abs(mean - expect_mean) < 3.0 * se_mean);
    const double se_var = p.theta * std::sqrt(2.0 / n); // var of sample variance
    CHECK(std::abs(var - p.theta) < 3.0 * se_var);
}

TEST_CASE("discounted asset is a martingale at every grid time") {
    const HestonParams p = table1();
    const PathSet ps = simulate_heston(p, 100.0, 0.0, 1.0, 250, 100000, 7);
    for (std::size_t i : {std::size_t{50}, std::size_t{125}, std::size_t{250}}) {
        const Moments m = column_moments(ps, i, false);
        CHECK(std::abs(m.mean - 100.0) < 3.0 * m.se);
    }
}

TEST_CASE("terminal variance matches the exact CIR mean and has spread") {
    HestonParams p = table1();
    p.alpha0 = 0.09; // away from theta so the mean reversion is visible
    const PathSet ps = simulate_heston(p, 100.0, 0.0, 1.0, 250, 20000, 3);
    const Moments m = column_moments(ps, ps.n_times() - 1, true);
    const double exact =
        p.alpha0 * std::exp(-p.kappa) + p.theta * (1.0 - std::exp(-p.kappa));
    CHECK(std::abs(m.mean - exact) < 3.0 * m.se);
    CHECK(m.se > 0.0);
    CHECK(m.mean < p.alpha0);
    CHECK(m.mean > p.theta);
}

TEST_CASE("quadratic variation consistency (paired per path)") {
    const HestonParams p = table1();
    const PathSet ps = simulate_heston(p, 100.0, 0.0, 1.0, 250, 5000, 13);
    const double du = ps.dt();
    double acc = 0.0, acc2 = 0.0;
    for (std::size_t m = 0; m < ps.n_paths; ++m) {
        double qv = 0.0, iv = 0.0;
        for (std::size_t i = 0; i + 1 < ps.n_times(); ++i) {
            const double ret = ps.at(m, i + 1) / ps.at(m, i) - 1.0;
            qv += ret * ret;
            iv += ps.var_at(m, i) * du;
        }
        const double d = qv - iv;
        acc += d;
        acc2 += d * d;
    }
    const double n = static_cast<double>(ps.n_paths);
    const double mean = acc / n;
    const double se = std::sqrt(std::max(acc2 / n - mean * mean, 0.0) / n);
    CHECK(std::abs(mean) < 3.0 * se);
}

TEST_CASE("heston_put: degenerate, near-degenerate and deep OTM") {
    HestonParams p = table1();
    p.vol_of_vol_nu = 0.0;
    p.alpha0 = p.theta;
    CHECK(std::abs(heston_put(1.0, 50.0, p.theta, p, 50.0) -
                   bs_put(1.0, 50.0, 50.0, p.theta, 0.0)) < 1e-8);

    // tiny but nonzero nu goes through the characteristic function
    HestonParams q = table1();
    q.vol_of_vol_nu = 1e-6;
    q.alpha0 = q.theta;
    CHECK(std::abs(heston_put(1.0, 50.0, q.theta, q, 50.0) -
                   bs_put(1.0, 50.0, 50.0, q.theta, 0.0)) < 1e-6);

    CHECK(heston_put(1.0, 500.0, 0.04, table1(), 50.0) < 1e-6);
    CHECK_THROWS(heston_put(0.0, 50.0, 0.04, table1(), 50.0));
}

TEST_CASE("heston put/call parity and monotonicity panel") {
    const HestonParams p = table1();
    for (double spot : {30.0, 50.0, 80.0}) {
        const double put = heston_put(1.0, spot, 0.04, p, 50.0);
        const double call = heston_call(1.0, spot, 0.04, p, 50.0);
        CHECK(std::abs(call - put - (spot - 50.0)) < 1e-10);
    }
    double prev = 1e99;
    for (double spot : {30.0, 40.0, 50.0, 65.0, 85.0}) {
        const double put = heston_put(1.0, spot, 0.04, p, 50.0);
        CHECK(put < prev);
        prev = put;
    }
    prev = -1.0;
    for (double strike : {30.0, 45.0, 55.0, 70.0}) {
        const double put = heston_put(1.0, 50.0, 0.04, p, strike);
        CHECK(put > prev);
        prev = put;
    }
    // bounds
    const double put = heston_put(1.0, 50.0, 0.04, p, 50.0);
    CHECK(put >= 0.0);
    CHECK(put < 50.0);
}

TEST_CASE("heston_put against a seeded Monte Carlo check") {
    const HestonParams p = table1();
    const double analytic = heston_put(1.0, 50.0, 0.04, p, 50.0);
    const PathSet ps = simulate_heston(p, 50.0, 0.0, 1.0, 250, 100000, 17);
    double acc = 0.0, acc2 = 0.0;
    const std::size_t last = ps.n_times() - 1;
    for (std::size_t m = 0; m < ps.n_paths; ++m) {
        const double pay = std::max(50.0 - ps.at(m, last), 0.0);
        acc += pay;
        acc2 += pay * pay;
    }
    const double n = static_cast<double>(ps.n_paths);
    const double mean = acc / n;
    const double se = std::sqrt((acc2 / n - mean * mean) / n);
    CHECK(std::abs(analytic - mean) < 3.0 * se);
}

TEST_CASE("conditional claim prices per model") {
    const ContractSpec spec;
    const std::vector<double> axis = make_axis(GridSpec{}, spec);
    const ValueGrid terminal = make_terminal_grid(spec, axis);

    const MarketModel bs = BsMarket{0.07, 0.0};
    const double got = conditional_claim_price(bs, 1, 60.0, std::nullopt, spec, terminal);
    CHECK(std::abs(got - (60.0 + bs_put(1.0, 60.0, 50.0, 0.07, 0.0))) < 2e-3);

    const MarketModel heston = table1();
    const double hp = conditional_claim_price(heston, 1, 50.0, 0.04, spec, terminal);
    CHECK(hp == doctest::Approx(50.0 + heston_put(1.0, 50.0, 0.04, table1(), 50.0))
                    .epsilon(1e-14));
    CHECK_THROWS(conditional_claim_price(heston, 1, 50.0, std::nullopt, spec, terminal));

    DeterministicVolModel dv;
    dv.variance_per_period = {0.04, 0.09};
    const MarketModel mdl = dv;
    const double dq = conditional_claim_price(mdl, 1, 60.0, std::nullopt, spec, terminal);
    CHECK(dq == doctest::Approx(bs_value_between(1.0, 60.0, BsParams{0.09, 0.0}, terminal))
                    .epsilon(1e-14));
}

TEST_CASE("detvol extend-last indexing") {
    DeterministicVolModel dv;
    dv.variance_per_period = {0.04, 0.09};
    CHECK(dv.variance(1) == 0.04);
    CHECK(dv.variance(2) == 0.09);
    CHECK(dv.variance(3) == 0.09);
    CHECK_THROWS(dv.variance(0));
    DeterministicVolModel bad;
    CHECK_THROWS(bad.validate());
}

TEST_CASE("path set csv and binary round trips") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "oma_pathio_test";
    fs::create_directories(dir);

    const PathSet ps = simulate_heston(table1(), 100.0, 0.0, 1.0, 25, 40, 5);
    const std::string csv = (dir / "paths.csv").string();
    write_paths_csv(csv, ps);
    const PathSet back = read_paths_csv(csv);
    CHECK(back.n_paths == ps.n_paths);
    CHECK(back.asset == ps.asset);
    CHECK(back.variance == ps.variance);
    CHECK(back.times == ps.times);

    const std::string bin = (dir / "paths.bin").string();
    write_paths_bin(bin, ps, 777);
    const PathSet bb = read_paths_bin(bin, 777, ps.seed);
    CHECK(bb.asset == ps.asset);
    CHECK(bb.variance == ps.variance);
    CHECK_THROWS(read_paths_bin(bin, 778, ps.seed));  // params hash mismatch
    CHECK_THROWS(read_paths_bin(bin, 777, ps.seed + 1)); // seed mismatch
    fs::remove_all(dir);
}

TEST_CASE("simulation input validation") {
    CHECK_THROWS(simulate_heston(table1(), -1.0, 0.0, 1.0, 10, 10, 1));
    CHECK_THROWS(simulate_heston(table1(), 100.0, 0.0, 1.0, 0, 10, 1));
    HestonParams bad = table1();
    bad.rho = -1.5;
    CHECK_THROWS(simulate_heston(bad, 100.0, 0.0, 1.0, 10, 10, 1));
    CHECK_THROWS(simulate_const_vol(0.0, 0.0, 100.0, 0.0, 1.0, 10, 10, 1));
}
