#include "oma/bs_engine.hpp"

#include "oma/errors.hpp"
#include "oma/parallel.hpp"
#include "oma/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace oma {

namespace {
constexpr double kInvSqrtPi = 0.5641895835477562869;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Truncated standard-normal moments on [l, u] (bounds may be infinite):
// m0 = int phi, m1 = int z phi, m2 = int z^2 phi.
struct NormalMoments {
    double m0, m1, m2;
};

NormalMoments truncated_moments(double l, double u) {
    const double cl = std::isinf(l) ? 0.0 : norm_cdf(l);
    const double cu = std::isinf(u) ? 1.0 : norm_cdf(u);
    const double pl = std::isinf(l) ? 0.0 : norm_pdf(l);
    const double pu = std::isinf(u) ? 0.0 : norm_pdf(u);
    const double lpl = std::isinf(l) ? 0.0 : l * pl;
    const double upu = std::isinf(u) ? 0.0 : u * pu;
    NormalMoments m;
    m.m0 = cu - cl;
    m.m1 = pl - pu;
    m.m2 = m.m0 + lpl - upu;
    return m;
}
} // namespace

double bs_put(double tau, double spot, double strike, double v, double r) {
    OMA_REQUIRE(tau >= 0.0, "bs_put: tau must be >= 0");
    OMA_REQUIRE(spot >= 0.0, "bs_put: spot must be >= 0");
    OMA_REQUIRE(strike >= 0.0, "bs_put: strike must be >= 0");
    OMA_REQUIRE(v >= 0.0, "bs_put: variance must be >= 0");
    const double df = std::exp(-r * tau);
    if (strike == 0.0) return 0.0;
    if (tau == 0.0 || v == 0.0) return std::max(strike * df - spot, 0.0);
    if (spot == 0.0) return strike * df;
    const double st = std::sqrt(v * tau);
    const double d1 = (std::log(spot / strike) + (r + 0.5 * v) * tau) / st;
    const double d2 = d1 - st;
    return strike * df * norm_cdf(-d2) - spot * norm_cdf(-d1);
}

double bs_call(double tau, double spot, double strike, double v, double r) {
    OMA_REQUIRE(tau >= 0.0, "bs_call: tau must be >= 0");
    OMA_REQUIRE(spot >= 0.0, "bs_call: spot must be >= 0");
    OMA_REQUIRE(strike >= 0.0, "bs_call: strike must be >= 0");
    OMA_REQUIRE(v >= 0.0, "bs_call: variance must be >= 0");
    const double df = std::exp(-r * tau);
    if (spot == 0.0) return 0.0;
    if (tau == 0.0 || v == 0.0) return std::max(spot - strike * df, 0.0);
    if (strike == 0.0) return spot;
    const double st = std::sqrt(v * tau);
    const double d1 = (std::log(spot / strike) + (r + 0.5 * v) * tau) / st;
    const double d2 = d1 - st;
    return spot * norm_cdf(d1) - strike * df * norm_cdf(d2);
}

double bs_gamma(double tau, double spot, double strike, double v, double r) {
    OMA_REQUIRE(tau > 0.0 && spot > 0.0 && strike > 0.0 && v > 0.0,
                "bs_gamma: need tau, spot, strike, v > 0");
    const double st = std::sqrt(v * tau);
    const double d1 = (std::log(spot / strike) + (r + 0.5 * v) * tau) / st;
    return norm_pdf(d1) / (spot * st);
}

LognormalStepper::LognormalStepper(double tau, double variance, double rate,
                                   const EngineOptions& opts)
    : tau_(tau), variance_(variance), rate_(rate),
      disc_(std::exp(-rate * tau)), mu_((rate - 0.5 * variance) * tau),
      s_(std::sqrt(std::max(variance * tau, 0.0))), backend_(opts.backend) {
    OMA_REQUIRE(tau >= 0.0, "stepper: tau must be >= 0");
    OMA_REQUIRE(variance >= 0.0, "stepper: variance must be >= 0");
    if (backend_ == Quadrature::gauss_hermite) {
        gh_ = &gauss_hermite(opts.gh_nodes);
        const std::size_t n = gh_->nodes.size();
        mult_.resize(n);
        z_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            z_[i] = std::sqrt(2.0) * gh_->nodes[i];
            mult_[i] = std::exp(mu_ + s_ * z_[i]);
        }
    }
}

void LognormalStepper::gh_moments(const ValueGrid& claim, double x,
                                  double out[3]) const {
    double a0 = 0.0, a1 = 0.0, a2 = 0.0;
    const std::size_t n = gh_->nodes.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double z = z_[i];
        const double h = gh_->weights[i] * claim.interpolate(x * mult_[i]);
        a0 += h;
        a1 += h * z;
        a2 += h * z * z;
    }
    const double c = disc_ * kInvSqrtPi;
    out[0] = c * a0;
    out[1] = c * a1;
    out[2] = c * a2;
}

void LognormalStepper::exact_moments(const ValueGrid& claim, double x,
                                     double out[3]) const {
    // The claim is piecewise linear, so each segment integrates in closed
    // form against the lognormal kernel. Flat tails past the end nodes.
    const double a_spot = x * std::exp(mu_);
    const auto& gx = claim.x;
    const auto& gv = claim.value;
    const std::size_t k = gx.size();
    const double es = std::exp(0.5 * s_ * s_);

    double a0 = 0.0, a1 = 0.0, a2 = 0.0;
    const auto add_flat = [&](double h, const NormalMoments& m) {
        a0 += h * m.m0;
        a1 += h * m.m1;
        a2 += h * m.m2;
    };
    if (gx.front() > 0.0) { // flat left tail below the first node
        const double z0 = std::log(gx.front() / a_spot) / s_;
        if (z0 > -38.0) add_flat(gv.front(), truncated_moments(-kInf, z0));
    }
    double z_hi = 0.0, z_lo = 0.0;
    for (std::size_t i = 0; i + 1 < k; ++i) {
        z_lo = (i == 0 && gx[0] == 0.0) ? -kInf : std::log(gx[i] / a_spot) / s_;
        z_hi = std::log(gx[i + 1] / a_spot) / s_;
        if (z_hi <= -38.0) continue; // segment carries no mass
        if (z_lo >= 38.0) break;
        const double beta = (gv[i + 1] - gv[i]) / (gx[i + 1] - gx[i]);
        const double alpha = gv[i] - beta * gx[i];
        const NormalMoments mp = truncated_moments(z_lo, z_hi);
        const NormalMoments ms = truncated_moments(z_lo - s_, z_hi - s_);
        const double w = beta * a_spot * es;
        a0 += alpha * mp.m0 + w * ms.m0;
        // E[Z^k e^{sZ}] via the (W + s)^k expansion on the shifted interval
        a1 += alpha * mp.m1 + w * (ms.m1 + s_ * ms.m0);
        a2 += alpha * mp.m2 + w * (ms.m2 + 2.0 * s_ * ms.m1 + s_ * s_ * ms.m0);
    }
    // flat right tail
    const double z_tail = std::log(gx.back() / a_spot) / s_;
    if (z_tail < 38.0) add_flat(gv.back(), truncated_moments(z_tail, kInf));

    out[0] = disc_ * a0;
    out[1] = disc_ * a1;
    out[2] = disc_ * a2;
}

void LognormalStepper::moments012(const ValueGrid& claim, double x,
                                  double out[3]) const {
    OMA_REQUIRE(x >= 0.0, "stepper: spot must be >= 0");
    if (x == 0.0 || s_ == 0.0) {
        const double v0 = (x == 0.0) ? claim.value.front()
                                     : claim.interpolate(x * std::exp(mu_));
        out[0] = disc_ * v0;
        out[1] = 0.0;
        out[2] = disc_ * v0; // E[Z^2] = 1
        return;
    }
    if (backend_ == Quadrature::gauss_hermite)
        gh_moments(claim, x, out);
    else
        exact_moments(claim, x, out);
}

double LognormalStepper::weighted(const ValueGrid& claim, double x, double c2,
                                  double c1, double c0) const {
    double m[3];
    moments012(claim, x, m);
    return c2 * m[2] + c1 * m[1] + c0 * m[0];
}

double LognormalStepper::value(const ValueGrid& claim, double x) const {
    double m[3];
    moments012(claim, x, m);
    return m[0];
}

double bs_value_between(double t, double x, const BsParams& p,
                        const ValueGrid& next, const EngineOptions& opts) {
    OMA_REQUIRE(x >= 0.0, "bs_value_between: x must be >= 0");
    const double tau = next.time - t;
    OMA_REQUIRE(tau >= 0.0, "bs_value_between: t is past the grid date");
    if (tau == 0.0) return next.interpolate(x);
    LognormalStepper step(tau, p.variance_v, p.rate_r, opts);
    return step.value(next, x);
}

ValueGrid make_terminal_grid(const ContractSpec& c,
                             const std::vector<double>& axis) {
    ValueGrid g;
    g.x = axis;
    g.value.resize(axis.size());
    for (std::size_t i = 0; i < axis.size(); ++i)
        g.value[i] = c.terminal_payoff(axis[i]);
    g.date_index = c.n_periods;
    g.time = c.maturity();
    g.validate();
    return g;
}

ValueGrid continuation_grid(double variance, double rate,
                            const ContractSpec& c, const ValueGrid& next,
                            const std::vector<double>& axis,
                            const EngineOptions& opts) {
    LognormalStepper step(c.period_delta, variance, rate, opts);
    const ValueGrid claim = opts.backend == Quadrature::exact_piecewise
                                ? simplify_claim(next)
                                : next;
    ValueGrid g;
    g.x = axis;
    g.value.resize(axis.size());
    for (std::size_t i = 0; i < axis.size(); ++i)
        g.value[i] = step.value(claim, axis[i]);
    g.date_index = next.date_index - 1;
    g.time = next.time - c.period_delta;
    g.validate();
    return g;
}

PolicyDecision maximize_withdrawal([[maybe_unused]] const ContractSpec& c,
                                   int period_n, double x,
                                   const std::function<double(double)>& objective,
                                   const EngineOptions& opts) {
    OMA_REQUIRE(x >= 0.0, "maximize_withdrawal: x must be >= 0");
    PolicyDecision best{period_n, x, 0.0, objective(0.0)};
    if (x <= 0.0) return best;

    const int m = std::max(opts.opt_grid_points, 3);
    int best_idx = 0;
    for (int i = 1; i < m; ++i) {
        const double a = x * i / (m - 1);
        const double j = objective(a);
        if (j > best.value) {
            best.value = j;
            best.a_star = a;
            best_idx = i;
        }
    }
    const double lo = x * std::max(best_idx - 1, 0) / (m - 1);
    const double hi = x * std::min(best_idx + 1, m - 1) / (m - 1);
    const ScalarMax refined =
        golden_max(objective, lo, hi, std::max(x, 1.0) * opts.opt_tol);
    if (refined.value > best.value ||
        (refined.value == best.value && refined.arg < best.a_star)) {
        best.a_star = refined.arg;
        best.value = refined.value;
    }
    best.a_star = std::clamp(best.a_star, 0.0, x);
    return best;
}

PolicyDecision bs_value_withdrawal_closed(double x, double v,
                                          const ContractSpec& c, double r,
                                          const EngineOptions& opts) {
    OMA_REQUIRE(c.n_periods == 2, "bs_value_withdrawal_closed: needs N == 2");
    OMA_REQUIRE(x >= 0.0, "bs_value_withdrawal_closed: x must be >= 0");
    auto objective = [&](double a) {
        const double k = std::max(x - a, 0.0);
        return c.intermediate_payoff(x, std::min(a, x)) + k +
               bs_put(c.period_delta, k, c.guarantee, v, r);
    };
    return maximize_withdrawal(c, 1, x, objective, opts);
}

BellmanSolution bs_solve_bellman(const ContractSpec& c, const BsParams& p,
                                 const GridSpec& gs,
                                 const EngineOptions& opts) {
    c.validate();
    p.validate();
    BellmanSolution sol;
    sol.axis = make_axis(gs, c);
    const int n_dates = c.n_periods;
    sol.grids.resize(static_cast<std::size_t>(n_dates) + 1);
    sol.policies.resize(static_cast<std::size_t>(n_dates));

    sol.grids[static_cast<std::size_t>(n_dates)] = make_terminal_grid(c, sol.axis);

    for (int n = n_dates - 1; n >= 1; --n) {
        const ValueGrid cont = continuation_grid(
            p.variance_v, p.rate_r, c, sol.grids[static_cast<std::size_t>(n) + 1],
            sol.axis, opts);
        ValueGrid g;
        g.x = sol.axis;
        g.value.resize(sol.axis.size());
        g.date_index = n;
        g.time = c.time(n);
        auto& pol = sol.policies[static_cast<std::size_t>(n)];
        pol.resize(sol.axis.size());
        for (std::size_t j = 0; j < sol.axis.size(); ++j) {
            const double x = sol.axis[j];
            auto objective = [&](double a) {
                const double k = std::max(x - a, 0.0);
                return (1.0 - c.penalty_eta) * std::min(a, x) + cont.interpolate(k);
            };
            pol[j] = maximize_withdrawal(c, n, x, objective, opts);
            g.value[j] = pol[j].value;
        }
        g.validate();
        sol.grids[static_cast<std::size_t>(n)] = std::move(g);
    }

    // inception values (t_0 carries no withdrawal)
    sol.grids[0] = continuation_grid(p.variance_v, p.rate_r, c, sol.grids[1],
                                     sol.axis, opts);
    return sol;
}

double bs_delta_lr(double u, double x, const BsParams& p,
                   const ValueGrid& t1_grid, const EngineOptions& opts) {
    OMA_REQUIRE(u < t1_grid.time, "bs_delta_lr: LR weight singular at u >= t1");
    OMA_REQUIRE(x > 0.0, "bs_delta_lr: x must be > 0");
    const double tau = t1_grid.time - u;
    LognormalStepper step(tau, p.variance_v, p.rate_r, opts);
    if (opts.backend == Quadrature::exact_piecewise) {
        const ValueGrid claim = simplify_claim(t1_grid);
        return step.weighted(claim, x, 0.0, 1.0, 0.0) / (x * step.stdev());
    }
    return step.weighted(t1_grid, x, 0.0, 1.0, 0.0) / (x * step.stdev());
}

double bs_delta_lr(double u, double x, const BsParams& p,
                   const ValueGrid& t1_grid, int n_nodes) {
    EngineOptions opts;
    opts.backend = Quadrature::gauss_hermite;
    opts.gh_nodes = n_nodes;
    return bs_delta_lr(u, x, p, t1_grid, opts);
}

double bs_delta_lr_sampled(double u, double x, const BsParams& p,
                           const ValueGrid& t1_grid, int n_samples,
                           std::uint64_t seed) {
    OMA_REQUIRE(u < t1_grid.time, "bs_delta_lr: LR weight singular at u >= t1");
    OMA_REQUIRE(x > 0.0, "bs_delta_lr: x must be > 0");
    OMA_REQUIRE(n_samples > 0, "bs_delta_lr: need n_samples > 0");
    const double tau = t1_grid.time - u;
    const double s = std::sqrt(p.variance_v * tau);
    const double mu = (p.rate_r - 0.5 * p.variance_v) * tau;
    const double disc = std::exp(-p.rate_r * tau);
    PathRng rng(seed, 0);
    double acc = 0.0;
    for (int i = 0; i < n_samples; ++i) {
        const double z = rng.normal();
        acc += z * t1_grid.interpolate(x * std::exp(mu + s * z));
    }
    return disc * acc / (n_samples * x * s);
}

double bs_delta_fd(double u, double x, const BsParams& p,
                   const ValueGrid& t1_grid, double h,
                   const EngineOptions& opts) {
    OMA_REQUIRE(h > 0.0 && h < x, "bs_delta_fd: need 0 < h < x");
    const double up = bs_value_between(u, x + h, p, t1_grid, opts);
    const double dn = bs_value_between(u, x - h, p, t1_grid, opts);
    return (up - dn) / (2.0 * h);
}

double bs_gamma_fd(double u, double x, const BsParams& p,
                   const ValueGrid& t1_grid, double h,
                   const EngineOptions& opts) {
    OMA_REQUIRE(h > 0.0 && h < x, "bs_gamma_fd: need 0 < h < x");
    const double up = bs_value_between(u, x + h, p, t1_grid, opts);
    const double mid = bs_value_between(u, x, p, t1_grid, opts);
    const double dn = bs_value_between(u, x - h, p, t1_grid, opts);
    return (up - 2.0 * mid + dn) / (h * h);
}

double quasi_bs_price(double y, double xi, double rate, double delta_t,
                      const ValueGrid& claim, const EngineOptions& opts) {
    OMA_REQUIRE(y >= 0.0, "quasi_bs_price: y must be >= 0");
    OMA_REQUIRE(xi > 0.0, "quasi_bs_price: xi must be > 0");
    LognormalStepper step(delta_t, xi, rate, opts);
    return step.value(claim, y);
}

QuasiValuer::QuasiValuer(const ContractSpec& c, int period_n, double xi,
                         double rate, const ValueGrid& next,
                         const std::vector<double>& axis,
                         const EngineOptions& opts)
    : contract_(c), period_n_(period_n), opts_(opts),
      continuation_(continuation_grid(xi, rate, c, next, axis, opts)) {
    OMA_REQUIRE(xi > 0.0, "quasi_bs_value: xi must be > 0");
}

PolicyDecision QuasiValuer::value(double x) const {
    auto objective = [&](double a) {
        const double k = std::max(x - a, 0.0);
        return (1.0 - contract_.penalty_eta) * std::min(a, x) +
               continuation_.interpolate(k);
    };
    return maximize_withdrawal(contract_, period_n_, x, objective, opts_);
}

PolicyDecision quasi_bs_value(int period_n, double x, double xi,
                              const ContractSpec& c, double rate,
                              const ValueGrid& next,
                              const std::vector<double>& axis,
                              const EngineOptions& opts) {
    return QuasiValuer(c, period_n, xi, rate, next, axis, opts).value(x);
}

double implied_variance(double target_price, double x, double rate,
                        double delta_t, const ValueGrid& claim,
                        const EngineOptions& opts,
                        const ImpliedVarBracket& bracket) {
    OMA_REQUIRE(x >= 0.0, "implied_variance: x must be >= 0");
    OMA_REQUIRE(bracket.lo > 0.0 && bracket.hi > bracket.lo,
                "implied_variance: bad bracket");
    const double f_tol = 1e-12 * std::max(1.0, std::abs(target_price));
    // boundary decisions get a coarser gate: far from the money the whole
    // xi-dependence of the price sits near the evaluation noise floor
    const double b_tol = 1e-9 * std::max(1.0, std::abs(target_price));
    const ValueGrid claim_s = opts.backend == Quadrature::exact_piecewise
                                  ? simplify_claim(claim)
                                  : claim;
    auto price = [&](double xi) {
        return quasi_bs_price(x, xi, rate, delta_t, claim_s, opts);
    };
    const double p_lo = price(bracket.lo);
    if (target_price < p_lo - b_tol)
        throw NumericFailure("implied_variance: target " + std::to_string(target_price) +
                             " below the xi->0 bound " + std::to_string(p_lo));
    if (target_price <= p_lo) return bracket.lo;

    // On a truncated domain the claim price rises in xi and eventually bends
    // over where the cap bites; walk log-spaced points to bracket the
    // crossing inside the rising branch.
    const int n_scan = 24;
    const double ratio = std::pow(bracket.hi / bracket.lo, 1.0 / n_scan);
    double xi_prev = bracket.lo;
    double p_best = p_lo, xi_best = bracket.lo;
    for (int i = 1; i <= n_scan; ++i) {
        const double xi = (i == n_scan) ? bracket.hi : xi_prev * ratio;
        const double p = price(xi);
        if (p >= target_price)
            // drive well past the contractual price tolerance so the xi
            // itself is accurate even where the price is flat in xi
            return brent_root([&](double q) { return price(q) - target_price; },
                              xi_prev, xi, 1e-3 * f_tol, 1e-16);
        if (p > p_best) {
            p_best = p;
            xi_best = xi;
        }
        xi_prev = xi;
    }
    if (target_price <= p_best + b_tol) return xi_best;
    throw NumericFailure("implied_variance: target " + std::to_string(target_price) +
                         " above the xi=" + std::to_string(bracket.hi) +
                         " bracket (max attainable price " +
                         std::to_string(p_best) + ")");
}

double MarkLattice::interp(const std::vector<double>& row, double x) const {
    if (x <= axis.front()) return row.front();
    if (x >= axis.back()) return row.back();
    const auto it = std::upper_bound(axis.begin(), axis.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - axis.begin());
    const double w = (x - axis[i - 1]) / (axis[i] - axis[i - 1]);
    return row[i - 1] + w * (row[i] - row[i - 1]);
}

double MarkLattice::value_at(std::size_t step, double x) const {
    return interp(value.at(step), x);
}
double MarkLattice::delta_at(std::size_t step, double x) const {
    return interp(delta.at(step), x);
}
double MarkLattice::gamma_at(std::size_t step, double x) const {
    return interp(gamma.at(step), x);
}

MarkLattice build_mark_lattice(const std::vector<double>& times,
                               const BsParams& p, const ValueGrid& t1_grid,
                               const std::vector<double>& axis,
                               const EngineOptions& opts) {
    OMA_REQUIRE(times.size() >= 2, "mark lattice: need at least 2 times");
    OMA_REQUIRE(std::abs(times.back() - t1_grid.time) < 1e-12,
                "mark lattice: times must end at the grid date");
    MarkLattice lat;
    lat.times = times;
    lat.axis = axis;
    const std::size_t n_steps = times.size() - 1;
    lat.value.resize(times.size());
    lat.delta.resize(n_steps);
    lat.gamma.resize(n_steps);

    lat.value[n_steps].resize(axis.size());
    for (std::size_t j = 0; j < axis.size(); ++j)
        lat.value[n_steps][j] = t1_grid.interpolate(axis[j]);

    const ValueGrid claim = opts.backend == Quadrature::exact_piecewise
                                ? simplify_claim(t1_grid)
                                : t1_grid;
    // value, delta and gamma come out of one Z-moment sweep per entry;
    // rows are independent, so the build parallelizes over time steps
    par::for_index(n_steps, Exec::parallel, [&](std::size_t i) {
        LognormalStepper step(t1_grid.time - times[i], p.variance_v, p.rate_r,
                              opts);
        const double s = step.stdev();
        lat.value[i].resize(axis.size());
        lat.delta[i].resize(axis.size());
        lat.gamma[i].resize(axis.size());
        double m[3];
        for (std::size_t j = 0; j < axis.size(); ++j) {
            const double x = axis[j];
            step.moments012(claim, x, m);
            lat.value[i][j] = m[0];
            if (x <= 0.0) continue; // filled from the first positive node below
            lat.delta[i][j] = m[1] / (x * s);
            lat.gamma[i][j] = (m[2] - s * m[1] - m[0]) / (x * s * x * s);
        }
        if (axis.front() <= 0.0 && axis.size() > 1) {
            lat.delta[i][0] = lat.delta[i][1];
            lat.gamma[i][0] = lat.gamma[i][1];
        }
    });
    return lat;
}

} // namespace oma
