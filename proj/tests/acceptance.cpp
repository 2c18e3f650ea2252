// Acceptance suite: one line per criterion, nonzero exit on any failure.
// OMA_ACCEPT_FAST=1 shrinks the Monte Carlo sizes for development loops and
// marks the run as such; the default sizes are the binding ones.

#include "oma/decomposition.hpp"
#include "oma/hedging.hpp"
#include "oma/io.hpp"
#include "oma/parallel.hpp"
#include "oma/rng.hpp"
#include "oma/run_config.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace oma;

namespace {

int g_failures = 0;
bool g_fast = false;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
    std::printf("CRITERION %d [%s]: %s — %s\n", id, name.c_str(),
                pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
}

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", x);
    return buf;
}

const ContractSpec kSpec{};     // Table 2: eta 0.6, G 50; N2, delta 1, x0 100
const HestonParams kHeston{};   // Table 1
const GridSpec kGrid{};
const BsParams kMark{0.04, 0.0};

// --- criterion 1: Theorem 1 identity under Heston, Monte Carlo ------------
void criterion1() {
    const auto t0 = std::chrono::steady_clock::now();
    const int n_paths = g_fast ? 20000 : 100000;
    const int n_steps = 250;
    const PathSet ps = simulate_heston(kHeston, kSpec.initial_account, 0.0, 1.0,
                                       n_steps, n_paths, 20240401);
    TwoPeriodDecomposer dec(kSpec, kMark, MarketModel(kHeston), kGrid);
    dec.prepare(ps.times, true);
    const DecompositionReport rep = dec.verify_theorem1(ps);
    const double tol = std::max(3.0 * rep.se_residual, 0.005 * rep.bs_price);
    const double rt = seconds_since(t0);
    report(1, "theorem1 heston identity", std::abs(rep.residual) < tol,
           "V_BS=" + fmt(rep.bs_price) + " V1=" + fmt(rep.va_realized) +
               " V2=" + fmt(rep.va_smile) + " V=" + fmt(rep.true_price) +
               " residual=" + fmt(rep.residual) + " tol=" + fmt(tol) +
               " paths=" + std::to_string(n_paths) + " runtime=" + fmt(rt) + "s");
}

// --- criterion 2: Theorem 1 identity, deterministic BS(w) oracle ----------
void criterion2() {
    bool pass = true;
    std::string detail;
    for (double w : {0.01, 0.09}) {
        const Theorem1Oracle o = verify_theorem1_bs_oracle(kSpec, w, kMark, kGrid);
        pass = pass && std::abs(o.residual) < 1e-6;
        detail += "w=" + fmt(w) + ": residual=" + fmt(o.residual) + "  ";
    }
    report(2, "theorem1 quadrature oracle", pass, detail + "tol=1e-6");
}

// --- criterion 3: Theorem 2 / multi-period identity ------------------------
void criterion3() {
    ContractSpec spec3 = kSpec;
    spec3.n_periods = 3;
    DeterministicVolModel model;
    model.variance_per_period = {0.04, 0.09}; // extend-last pads period 3
    const Theorem2Result res = verify_theorem2(model, spec3, kMark, kGrid);
    bool v3_ok = res.t0_v3 <= 1e-12;
    for (int n = 1; n <= 2; ++n)
        for (double v3 : res.v3[static_cast<std::size_t>(n)].value)
            v3_ok = v3_ok && v3 <= 1e-12;
    const bool pass = res.max_residual() < 1e-6 && v3_ok;
    report(3, "theorem2 detvol identity", pass,
           "max date residual=" +
               fmt(*std::max_element(res.max_date_residual.begin(),
                                     res.max_date_residual.end())) +
               " t0 residual=" + fmt(res.t0_residual) + " V3(t0)=" +
               fmt(res.t0_v3) + " tol=1e-6, V3<=0 " + (v3_ok ? "yes" : "NO"));
}

// --- criterion 4: hedging behaviour ----------------------------------------
void criterion4() {
    const auto t0 = std::chrono::steady_clock::now();
    // (a) matching BS market: unbiased P&L, std ~ sqrt(du)
    const MarketModel bs = BsMarket{0.04, 0.0};
    const int n_paths = g_fast ? 2000 : 10000;
    const BellmanSolution bellman = bs_solve_bellman(kSpec, kMark, kGrid);
    bool mean_ok = true, ratio_ok = true;
    std::vector<double> sds;
    std::string detail_a;
    for (int steps : {63, 126, 252, 504}) {
        const PathSet ps =
            simulate_market(bs, kSpec.initial_account, 0.0, 1.0, steps, n_paths, 31000 + steps);
        HedgeEngine engine(kSpec, kMark, bs, bellman);
        engine.prepare(ps.times, true);
        std::vector<double> pnl(ps.n_paths);
        par::for_index(ps.n_paths, Exec::parallel, [&](std::size_t m) {
            pnl[m] = engine.run_hedge(ps, m, 1).final_pnl;
        });
        double mean = 0.0;
        for (double p : pnl) mean += p;
        mean /= static_cast<double>(pnl.size());
        double var = 0.0;
        for (double p : pnl) var += (p - mean) * (p - mean);
        const double sd = std::sqrt(var / static_cast<double>(pnl.size() - 1));
        const double se = sd / std::sqrt(static_cast<double>(pnl.size()));
        mean_ok = mean_ok && std::abs(mean) < 3.0 * se;
        sds.push_back(sd);
    }
    for (std::size_t i = 0; i + 1 < sds.size(); ++i) {
        const double ratio = sds[i + 1] / sds[i];
        ratio_ok = ratio_ok && ratio > 0.6 && ratio < 0.85;
        detail_a += "r" + std::to_string(i) + "=" + fmt(ratio) + " ";
    }

    // (b) Heston, 100 paired paths: daily beats monthly, higher mark wins
    const MarketModel heston = kHeston;
    const PathSet ps100 =
        simulate_market(heston, kSpec.initial_account, 0.0, 1.0, 252, 100, 20240402);
    const auto rows = hedge_study(kSpec, heston, ps100, {0.04, 0.09}, {1, 21}, kGrid);
    const auto row = [&](double v, int stride) -> const HedgeSummaryRow& {
        for (const auto& r : rows)
            if (r.variance_v == v && r.stride == stride) return r;
        throw NumericFailure("row lookup");
    };
    const bool stab_ok = row(0.04, 1).stddev < row(0.04, 21).stddev &&
                         row(0.09, 1).stddev < row(0.09, 21).stddev;
    const bool frac_ok =
        row(0.09, 1).frac_positive > row(0.04, 1).frac_positive &&
        row(0.09, 21).frac_positive > row(0.04, 21).frac_positive;
    const double rt = seconds_since(t0);
    report(4, "hedging protocol", mean_ok && ratio_ok && stab_ok && frac_ok,
           "mean-unbiased=" + std::string(mean_ok ? "yes" : "NO") +
               " std-ratios(" + detail_a + ") in [0.6,0.85]=" +
               (ratio_ok ? "yes" : "NO") + " std(daily)<std(monthly)=" +
               (stab_ok ? "yes" : "NO") + " frac+(0.09)>frac+(0.04)=" +
               (frac_ok ? "yes" : "NO") + " runtime=" + fmt(rt) + "s");
}

// --- criterion 5: Figure 1, implied variance straddles the mark ------------
void criterion5() {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "oma_acceptance" / "figures";
    fs::remove_all(dir);
    RunConfig cfg;
    cfg.experiment = "figures";
    cfg.model = kHeston;
    cfg.seed = 7;
    cfg.seed_set = true;
    cfg.n_paths = 100;
    cfg.n_steps = 252;
    cfg.output_dir = dir.string();
    run_experiment(cfg);
    const bool emitted = fs::exists(dir / "xi1_hist.csv");

    const PathSet ps = simulate_heston(kHeston, kSpec.initial_account, 0.0, 1.0,
                                       252, 100, 7);
    TwoPeriodDecomposer dec(kSpec, kMark, MarketModel(kHeston), kGrid);
    double xi_min = 1e9, xi_max = -1e9;
    const std::size_t last = ps.n_times() - 1;
    for (std::size_t m = 0; m < ps.n_paths; ++m) {
        const double xi = dec.implied_var_t1(ps.at(m, last), ps.var_at(m, last));
        xi_min = std::min(xi_min, xi);
        xi_max = std::max(xi_max, xi);
    }
    report(5, "figure1 implied-variance spread",
           emitted && xi_min < 0.04 && 0.04 < xi_max,
           "xi1 in [" + fmt(xi_min) + ", " + fmt(xi_max) +
               "], straddles v=0.04, csv=" + (emitted ? "emitted" : "MISSING"));
}

// --- criterion 6: Figure 3, value function monotone in v and convex --------
void criterion6() {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "oma_acceptance" / "figures";
    std::ifstream in((dir / "value_function.csv").string());
    bool emitted = in.good();
    std::string line;
    std::getline(in, line); // header
    std::vector<double> x04, v04, x09, v09;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string tok;
        std::getline(ss, tok, ',');
        const double v = std::stod(tok);
        std::getline(ss, tok, ',');
        const double x = std::stod(tok);
        std::getline(ss, tok, ',');
        const double val = std::stod(tok);
        if (std::abs(v - 0.04) < 1e-12) {
            x04.push_back(x);
            v04.push_back(val);
        } else if (std::abs(v - 0.09) < 1e-12) {
            x09.push_back(x);
            v09.push_back(val);
        }
    }
    bool mono = emitted && !v04.empty() && v04.size() == v09.size();
    double worst_gap = 0.0;
    for (std::size_t j = 0; mono && j < v04.size(); ++j) {
        worst_gap = std::min(worst_gap, v09[j] - v04[j]);
        mono = mono && v09[j] >= v04[j];
    }
    bool convex = mono;
    double worst_d2 = 0.0;
    for (const auto* vals : {&v04, &v09}) {
        const auto& xx = (vals == &v04) ? x04 : x09;
        for (std::size_t j = 0; j + 2 < vals->size(); ++j) {
            const double h1 = xx[j + 1] - xx[j], h2 = xx[j + 2] - xx[j + 1];
            const double d2 = 2.0 * (h1 * (*vals)[j + 2] - (h1 + h2) * (*vals)[j + 1] +
                                     h2 * (*vals)[j]) /
                              (h1 * h2 * (h1 + h2));
            worst_d2 = std::min(worst_d2, d2);
            convex = convex && d2 >= -1e-6;
        }
    }
    report(6, "figure3 value function", mono && convex,
           "pointwise V(0.09)>=V(0.04) " + std::string(mono ? "yes" : "NO") +
               " (worst gap " + fmt(worst_gap) + "), convexity worst d2=" +
               fmt(worst_d2) + " (tol -1e-6)");
}

// --- criterion 7: micro-oracles ---------------------------------------------
void criterion7() {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<double> axis = make_axis(kGrid, kSpec);
    const ValueGrid terminal = make_terminal_grid(kSpec, axis);

    // implied variance round trip; tiny variances only at the money, where
    // the claim still has vega (far from the kink the price is constant in
    // xi to machine precision and no inversion is possible)
    double worst_rt = 0.0;
    for (double xi : {1e-5, 0.01, 0.04, 0.09, 0.5}) {
        const double target = quasi_bs_price(50.0, xi, 0.0, 1.0, terminal);
        worst_rt = std::max(
            worst_rt, std::abs(implied_variance(target, 50.0, 0.0, 1.0, terminal) - xi));
    }
    for (double x : {35.0, 80.0})
        for (double xi : {0.02, 0.09, 0.5}) {
            const double target = quasi_bs_price(x, xi, 0.0, 1.0, terminal);
            worst_rt = std::max(
                worst_rt, std::abs(implied_variance(target, x, 0.0, 1.0, terminal) - xi));
        }
    const bool rt_ok = worst_rt < 1e-10;

    // LR delta vs finite differences
    const BellmanSolution bellman = bs_solve_bellman(kSpec, kMark, kGrid);
    double worst_delta = 0.0;
    for (double x : {40.0, 70.0, 100.0, 140.0, 200.0}) {
        const double lr = bs_delta_lr(0.0, x, kMark, bellman.at_date(1));
        const double fd = bs_delta_fd(0.0, x, kMark, bellman.at_date(1), x * 1e-4);
        worst_delta = std::max(worst_delta, std::abs(lr - fd));
    }
    const bool delta_ok = worst_delta < 1e-4;

    // heston put: degenerate limit
    HestonParams degen = kHeston;
    degen.vol_of_vol_nu = 0.0;
    degen.alpha0 = degen.theta;
    const double degen_gap = std::abs(heston_put(1.0, 50.0, degen.theta, degen, 50.0) -
                                      bs_put(1.0, 50.0, 50.0, degen.theta, 0.0));
    const bool degen_ok = degen_gap < 1e-8;

    // heston put vs nested Monte Carlo (block sums keep it deterministic)
    const double analytic = heston_put(1.0, 50.0, 0.04, kHeston, 50.0);
    const std::size_t n_mc = g_fast ? 400000 : 10000000;
    const int mc_steps = 250;
    const std::size_t n_blocks = 200;
    std::vector<double> block_sum(n_blocks, 0.0), block_sum2(n_blocks, 0.0);
    par::for_index(n_blocks, Exec::parallel, [&](std::size_t b) {
        const std::size_t lo = b * n_mc / n_blocks;
        const std::size_t hi = (b + 1) * n_mc / n_blocks;
        const double du = 1.0 / mc_steps;
        const double sdu = std::sqrt(du);
        const double rho_c = std::sqrt(1.0 - kHeston.rho * kHeston.rho);
        double s = 0.0, s2 = 0.0;
        for (std::size_t m = lo; m < hi; ++m) {
            PathRng rng(987654, m);
            double lx = std::log(50.0);
            double alpha = 0.04;
            for (int i = 0; i < mc_steps; ++i) {
                const double z1 = rng.normal();
                const double z2 = rng.normal();
                const double ap = std::max(alpha, 0.0);
                const double sap = std::sqrt(ap);
                lx += -0.5 * ap * du + sap * sdu * z1;
                alpha += kHeston.kappa * (kHeston.theta - ap) * du +
                         kHeston.vol_of_vol_nu * sap * sdu *
                             (kHeston.rho * z1 + rho_c * z2);
            }
            const double pay = std::max(50.0 - std::exp(lx), 0.0);
            s += pay;
            s2 += pay * pay;
        }
        block_sum[b] = s;
        block_sum2[b] = s2;
    });
    double acc = 0.0, acc2 = 0.0;
    for (std::size_t b = 0; b < n_blocks; ++b) {
        acc += block_sum[b];
        acc2 += block_sum2[b];
    }
    const double mc_mean = acc / static_cast<double>(n_mc);
    const double mc_se = std::sqrt(
        (acc2 / static_cast<double>(n_mc) - mc_mean * mc_mean) /
        static_cast<double>(n_mc));
    const bool mc_ok = std::abs(analytic - mc_mean) < 3.0 * mc_se;

    // put-call parity, closed-form and semi-analytic
    double worst_parity = 0.0;
    for (double spot : {30.0, 50.0, 80.0}) {
        worst_parity = std::max(worst_parity,
                                std::abs(bs_call(1.0, spot, 50.0, 0.04, 0.0) -
                                         bs_put(1.0, spot, 50.0, 0.04, 0.0) -
                                         (spot - 50.0)));
        worst_parity = std::max(worst_parity,
                                std::abs(heston_call(1.0, spot, 0.04, kHeston, 50.0) -
                                         heston_put(1.0, spot, 0.04, kHeston, 50.0) -
                                         (spot - 50.0)));
    }
    const bool parity_ok = worst_parity < 1e-10;

    const double rt = seconds_since(t0);
    report(7, "micro-oracles",
           rt_ok && delta_ok && degen_ok && mc_ok && parity_ok,
           "xi-roundtrip=" + fmt(worst_rt) + " delta-gap=" + fmt(worst_delta) +
               " degen-gap=" + fmt(degen_gap) + " |heston-MC|=" +
               fmt(std::abs(analytic - mc_mean)) + " (3SE=" + fmt(3.0 * mc_se) +
               ") parity=" + fmt(worst_parity) + " runtime=" + fmt(rt) + "s");
}

} // namespace

int main() {
    g_fast = std::getenv("OMA_ACCEPT_FAST") != nullptr;
    if (g_fast)
        std::printf("NOTE: OMA_ACCEPT_FAST is set; Monte Carlo sizes reduced, "
                    "results are NOT the binding acceptance run.\n");
    criterion1();
    criterion2();
    criterion3();
    criterion4();
    criterion5();
    criterion6();
    criterion7();
    if (g_failures == 0)
        std::printf("ACCEPTANCE: all 7 criteria PASS%s\n",
                    g_fast ? " (fast mode)" : "");
    else
        std::printf("ACCEPTANCE: %d criterion(s) FAILED\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
