#include "oma/market.hpp"

#include "oma/rng.hpp"

#include <cmath>
#include <complex>

namespace oma {

double model_rate(const MarketModel& m) {
    return std::visit([](const auto& mm) { return mm.rate_r; }, m);
}

std::string model_label(const MarketModel& m) {
    if (std::holds_alternative<BsMarket>(m)) return "bs";
    if (std::holds_alternative<HestonParams>(m)) return "heston";
    return "detvol";
}

void PathSet::validate() const {
    OMA_REQUIRE(times.size() >= 2, "paths: need at least 2 times");
    OMA_REQUIRE(asset.size() == n_paths * n_times(), "paths: asset shape mismatch");
    if (has_variance())
        OMA_REQUIRE(variance.size() == asset.size(), "paths: variance shape mismatch");
    for (double x : asset) OMA_NUMERIC_CHECK(x > 0.0 && std::isfinite(x), "paths: asset must stay positive");
    for (double a : variance) OMA_NUMERIC_CHECK(a >= 0.0 && std::isfinite(a), "paths: variance must stay >= 0");
}

PathSet simulate_heston(const HestonParams& p, double x0, double t0, double t1,
                        int n_steps, int n_paths, std::uint64_t seed, Exec exec) {
    p.validate();
    OMA_REQUIRE(x0 > 0.0, "simulate: x0 must be > 0");
    OMA_REQUIRE(n_steps >= 1 && n_paths >= 1, "simulate: need n_steps, n_paths >= 1");
    OMA_REQUIRE(t1 > t0, "simulate: need t1 > t0");

    PathSet ps;
    ps.seed = seed;
    ps.scheme = "heston-full-truncation-euler";
    ps.n_paths = static_cast<std::size_t>(n_paths);
    ps.times.resize(static_cast<std::size_t>(n_steps) + 1);
    const double du = (t1 - t0) / n_steps;
    for (int i = 0; i <= n_steps; ++i) ps.times[static_cast<std::size_t>(i)] = t0 + i * du;
    ps.times.back() = t1;
    const std::size_t nt = ps.n_times();
    ps.asset.resize(ps.n_paths * nt);
    ps.variance.resize(ps.n_paths * nt);

    const double sdu = std::sqrt(du);
    const double rho_c = std::sqrt(1.0 - p.rho * p.rho);
    par::for_index(ps.n_paths, exec, [&](std::size_t m) {
        PathRng rng(seed, m);
        double lx = std::log(x0);
        double alpha_raw = p.alpha0;
        double* a_row = &ps.asset[m * nt];
        double* v_row = &ps.variance[m * nt];
        a_row[0] = x0;
        v_row[0] = std::max(alpha_raw, 0.0);
        for (std::size_t i = 1; i < nt; ++i) {
            const double z1 = rng.normal();
            const double z2 = rng.normal();
            const double ap = std::max(alpha_raw, 0.0);
            const double sap = std::sqrt(ap);
            lx += (p.rate_r - 0.5 * ap) * du + sap * sdu * z1;
            alpha_raw += p.kappa * (p.theta - ap) * du +
                         p.vol_of_vol_nu * sap * sdu * (p.rho * z1 + rho_c * z2);
            a_row[i] = std::exp(lx);
            v_row[i] = std::max(alpha_raw, 0.0);
        }
    });
    return ps;
}

PathSet simulate_const_vol(double w, double rate, double x0, double t0,
                           double t1, int n_steps, int n_paths,
                           std::uint64_t seed, Exec exec) {
    OMA_REQUIRE(w > 0.0, "simulate: variance must be > 0");
    OMA_REQUIRE(x0 > 0.0, "simulate: x0 must be > 0");
    OMA_REQUIRE(n_steps >= 1 && n_paths >= 1, "simulate: need n_steps, n_paths >= 1");
    OMA_REQUIRE(t1 > t0, "simulate: need t1 > t0");

    PathSet ps;
    ps.seed = seed;
    ps.scheme = "lognormal-exact";
    ps.n_paths = static_cast<std::size_t>(n_paths);
    ps.times.resize(static_cast<std::size_t>(n_steps) + 1);
    const double du = (t1 - t0) / n_steps;
    for (int i = 0; i <= n_steps; ++i) ps.times[static_cast<std::size_t>(i)] = t0 + i * du;
    ps.times.back() = t1;
    const std::size_t nt = ps.n_times();
    ps.asset.resize(ps.n_paths * nt);

    const double drift = (rate - 0.5 * w) * du;
    const double vol = std::sqrt(w * du);
    par::for_index(ps.n_paths, exec, [&](std::size_t m) {
        PathRng rng(seed, m);
        double lx = std::log(x0);
        double* row = &ps.asset[m * nt];
        row[0] = x0;
        for (std::size_t i = 1; i < nt; ++i) {
            lx += drift + vol * rng.normal();
            row[i] = std::exp(lx);
        }
    });
    return ps;
}

PathSet simulate_market(const MarketModel& m, double x0, double t0, double t1,
                        int n_steps, int n_paths, std::uint64_t seed, Exec exec) {
    if (const auto* h = std::get_if<HestonParams>(&m))
        return simulate_heston(*h, x0, t0, t1, n_steps, n_paths, seed, exec);
    if (const auto* b = std::get_if<BsMarket>(&m))
        return simulate_const_vol(b->variance_w, b->rate_r, x0, t0, t1, n_steps,
                                  n_paths, seed, exec);
    const auto& dv = std::get<DeterministicVolModel>(m);
    dv.validate();
    return simulate_const_vol(dv.variance(1), dv.rate_r, x0, t0, t1, n_steps,
                              n_paths, seed, exec);
}

namespace {

// P_j probabilities via the trap-free characteristic function
// (Albrecher et al. formulation: the branch with -d never crosses a cut).
double heston_probability(int j, double tau, double lx, double lk, double var0,
                          const HestonParams& p, int n_nodes, double phi_max,
                          double* tail_out) {
    using C = std::complex<double>;
    const C I(0.0, 1.0);
    const double nu = p.vol_of_vol_nu;
    const double a = p.kappa * p.theta;
    const double b = (j == 1) ? p.kappa - p.rho * nu : p.kappa;
    const double u = (j == 1) ? 0.5 : -0.5;
    const double nu2 = nu * nu;

    auto integrand = [&](double phi) {
        const C beta = C(b, -p.rho * nu * phi);
        const C d = std::sqrt(beta * beta - nu2 * (2.0 * u * phi * I - phi * phi));
        const C g = (beta - d) / (beta + d);
        const C edt = std::exp(-d * tau);
        const C big_d = (beta - d) / nu2 * (1.0 - edt) / (1.0 - g * edt);
        const C big_c = I * p.rate_r * phi * tau +
                        a / nu2 * ((beta - d) * tau -
                                   2.0 * std::log((1.0 - g * edt) / (1.0 - g)));
        const C f = std::exp(big_c + big_d * var0 + I * phi * lx);
        return (std::exp(-I * phi * lk) * f / (I * phi)).real();
    };

    const QuadratureRule rule = gauss_legendre(n_nodes, 0.0, phi_max);
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i)
        acc += rule.weights[i] * integrand(rule.nodes[i]);

    // Near-zero variance states decay only exponentially in phi; extend the
    // range in panels until the integrand tail is negligible.
    double hi = phi_max;
    double tail = std::abs(integrand(hi));
    const double panel = 0.5 * phi_max;
    const int panel_nodes = n_nodes / 2;
    while (tail > 1e-12 && hi < 40.0 * phi_max) {
        const QuadratureRule ext = gauss_legendre(panel_nodes, hi, hi + panel);
        for (std::size_t i = 0; i < ext.nodes.size(); ++i)
            acc += ext.weights[i] * integrand(ext.nodes[i]);
        hi += panel;
        tail = std::abs(integrand(hi));
    }
    if (tail_out) *tail_out = tail;
    return 0.5 + acc / 3.14159265358979323846;
}

struct HestonProbs {
    double p1, p2;
};

HestonProbs heston_p1_p2(double tau, double spot, double var0,
                         const HestonParams& p, double strike, int n_nodes,
                         double phi_max) {
    const double lx = std::log(spot);
    const double lk = std::log(strike);
    double tail1 = 0.0, tail2 = 0.0;
    HestonProbs out;
    out.p1 = heston_probability(1, tau, lx, lk, var0, p, n_nodes, phi_max, &tail1);
    out.p2 = heston_probability(2, tau, lx, lk, var0, p, n_nodes, phi_max, &tail2);
    const double tail = std::max(tail1, tail2);
    OMA_NUMERIC_CHECK(tail < 1e-8,
                      "heston_put: characteristic-function integral truncated too "
                      "early, integrand tail estimate " + std::to_string(tail));
    OMA_NUMERIC_CHECK(std::isfinite(out.p1) && std::isfinite(out.p2),
                      "heston_put: integration produced non-finite probability");
    return out;
}

// nu -> 0 degenerates to BS with the deterministic integrated CIR variance.
double degenerate_variance(double tau, double var0, const HestonParams& p) {
    if (p.kappa == 0.0) return var0;
    const double decay = (1.0 - std::exp(-p.kappa * tau)) / (p.kappa * tau);
    return p.theta + (var0 - p.theta) * decay;
}

} // namespace

double heston_put(double tau, double spot, double var0, const HestonParams& p,
                  double strike, int n_nodes, double phi_max) {
    p.validate();
    OMA_REQUIRE(tau > 0.0, "heston_put: tau must be > 0");
    OMA_REQUIRE(spot >= 0.0, "heston_put: spot must be >= 0");
    OMA_REQUIRE(strike > 0.0, "heston_put: strike must be > 0");
    OMA_REQUIRE(var0 >= 0.0, "heston_put: var0 must be >= 0");
    const double df = std::exp(-p.rate_r * tau);
    if (spot == 0.0) return strike * df;
    if (p.vol_of_vol_nu < 1e-8)
        return bs_put(tau, spot, strike, degenerate_variance(tau, var0, p), p.rate_r);
    const HestonProbs pr = heston_p1_p2(tau, spot, var0, p, strike, n_nodes, phi_max);
    return strike * df * (1.0 - pr.p2) - spot * (1.0 - pr.p1);
}

double heston_call(double tau, double spot, double var0, const HestonParams& p,
                   double strike, int n_nodes, double phi_max) {
    p.validate();
    OMA_REQUIRE(tau > 0.0, "heston_call: tau must be > 0");
    OMA_REQUIRE(spot >= 0.0, "heston_call: spot must be >= 0");
    OMA_REQUIRE(strike > 0.0, "heston_call: strike must be > 0");
    OMA_REQUIRE(var0 >= 0.0, "heston_call: var0 must be >= 0");
    if (spot == 0.0) return 0.0;
    if (p.vol_of_vol_nu < 1e-8)
        return bs_call(tau, spot, strike, degenerate_variance(tau, var0, p), p.rate_r);
    const HestonProbs pr = heston_p1_p2(tau, spot, var0, p, strike, n_nodes, phi_max);
    return spot * pr.p1 - strike * std::exp(-p.rate_r * tau) * pr.p2;
}

double conditional_claim_price(const MarketModel& m, int period_n, double x,
                               std::optional<double> alpha,
                               const ContractSpec& spec,
                               const ValueGrid& next_claim,
                               const EngineOptions& opts) {
    OMA_REQUIRE(x >= 0.0, "conditional_claim_price: x must be >= 0");
    OMA_REQUIRE(period_n >= 1 && period_n < spec.n_periods,
                "conditional_claim_price: period out of range");
    if (const auto* b = std::get_if<BsMarket>(&m)) {
        LognormalStepper step(spec.period_delta, b->variance_w, b->rate_r, opts);
        return step.value(next_claim, x);
    }
    if (const auto* dv = std::get_if<DeterministicVolModel>(&m)) {
        LognormalStepper step(spec.period_delta, dv->variance(period_n + 1),
                              dv->rate_r, opts);
        return step.value(next_claim, x);
    }
    const auto& h = std::get<HestonParams>(m);
    OMA_REQUIRE(alpha.has_value(),
                "conditional_claim_price: Heston needs the variance state");
    OMA_REQUIRE(period_n + 1 == spec.n_periods,
                "conditional_claim_price: Heston supports the terminal claim only");
    // claim is g: discounted forward plus the guarantee put
    if (x == 0.0) return spec.guarantee * std::exp(-h.rate_r * spec.period_delta);
    return x + heston_put(spec.period_delta, x, *alpha, h, spec.guarantee);
}

} // namespace oma
