#pragma once

#include "oma/contract.hpp"
#include "oma/grid.hpp"
#include "oma/math.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace oma {

struct BsParams {
    double variance_v = 0.04; // BS variance parameter, 1/year
    double rate_r = 0.0;

    void validate() const {
        OMA_REQUIRE(variance_v > 0.0, "bs: variance must be > 0");
    }
};

// How one-period expectations against grid data are evaluated.
//   exact_piecewise (default): the grid claim is piecewise linear, so the
//     lognormal expectation has a closed form per segment (Phi/phi terms);
//     collinear nodes are collapsed first. Exact for the tabulated claim.
//   gauss_hermite: 64-node Gauss-Hermite. Kept for the dense mark-lattice
//     tabulations; at a payoff kink its error is ~5e-3, too coarse for the
//     deterministic identity checks.
enum class Quadrature { gauss_hermite, exact_piecewise };

struct EngineOptions {
    Quadrature backend = Quadrature::exact_piecewise;
    int gh_nodes = 64;
    int opt_grid_points = 2001; // inner maximization scan
    double opt_tol = 1e-10;     // golden-section width, relative to max(x,1)
};

struct PolicyDecision {
    int period_n = 0;
    double state_x = 0.0;
    double a_star = 0.0;
    double value = 0.0;
};

// Closed-form vanillas (total variance v*tau).
double bs_put(double tau, double spot, double strike, double v, double r);
double bs_call(double tau, double spot, double strike, double v, double r);
double bs_gamma(double tau, double spot, double strike, double v, double r);

// One-period pricer: value(claim, x) = e^{-r tau} E[claim(x * M)] with
// ln M ~ N((r - var/2) tau, var * tau).
class LognormalStepper {
public:
    LognormalStepper(double tau, double variance, double rate,
                     const EngineOptions& opts = {});

    double value(const ValueGrid& claim, double x) const;
    // e^{-r tau} E[claim(x*M) * (c2 Z^2 + c1 Z + c0)], Z the driving normal
    double weighted(const ValueGrid& claim, double x, double c2, double c1,
                    double c0) const;
    // one sweep for the discounted Z-moments {E[h], E[hZ], E[hZ^2]}:
    // value = m[0], delta = m[1]/(x s), gamma = (m[2]-s m[1]-m[0])/(x s)^2
    void moments012(const ValueGrid& claim, double x, double out[3]) const;

    double tau() const { return tau_; }
    double variance() const { return variance_; }
    double stdev() const { return s_; }

private:
    void gh_moments(const ValueGrid& claim, double x, double out[3]) const;
    void exact_moments(const ValueGrid& claim, double x, double out[3]) const;

    double tau_, variance_, rate_, disc_, mu_, s_;
    Quadrature backend_;
    const QuadratureRule* gh_ = nullptr; // cached rule, physicists' weight
    std::vector<double> mult_;           // x-multipliers per GH node
    std::vector<double> z_;              // sqrt(2)*y_i per GH node
};

// V_BS between event dates, from the next date's grid (Feynman-Kac form of
// the BS PDE). t == next.time returns the interpolated grid value.
double bs_value_between(double t, double x, const BsParams& p,
                        const ValueGrid& next, const EngineOptions& opts = {});

ValueGrid make_terminal_grid(const ContractSpec& c,
                             const std::vector<double>& axis);

// C_n(y) at date n for the claim `next`, one period ahead, diffusion
// `variance`: the post-withdrawal continuation values on the axis.
ValueGrid continuation_grid(double variance, double rate,
                            const ContractSpec& c, const ValueGrid& next,
                            const std::vector<double>& axis,
                            const EngineOptions& opts = {});

// sup over a in [0,x] of objective(a); 2001-point scan + golden refinement
// on the bracketing cell, ties to the smallest a.
PolicyDecision maximize_withdrawal(const ContractSpec& c, int period_n,
                                   double x,
                                   const std::function<double(double)>& objective,
                                   const EngineOptions& opts = {});

// Two-period closed form: sup_a f_1(x,a) + K(x,a) + P_BS(delta, K(x,a), G, v).
PolicyDecision bs_value_withdrawal_closed(double x, double v,
                                          const ContractSpec& c, double r = 0.0,
                                          const EngineOptions& opts = {});

struct BellmanSolution {
    std::vector<double> axis;
    std::vector<ValueGrid> grids; // index = date 0..N; [0] has no withdrawal
    std::vector<std::vector<PolicyDecision>> policies; // [n][node], dates 1..N-1

    const ValueGrid& at_date(int n) const { return grids.at(static_cast<std::size_t>(n)); }
};

BellmanSolution bs_solve_bellman(const ContractSpec& c, const BsParams& p,
                                 const GridSpec& gs,
                                 const EngineOptions& opts = {});

// Likelihood-ratio delta of the claim held to t1: the LR weight reduces to
// the driving normal under the change of variables, so this is the
// Z-weighted one-period expectation. The int overload forces Gauss-Hermite
// with that node count.
double bs_delta_lr(double u, double x, const BsParams& p,
                   const ValueGrid& t1_grid, const EngineOptions& opts = {});
double bs_delta_lr(double u, double x, const BsParams& p,
                   const ValueGrid& t1_grid, int n_nodes);
// Sampling form of the same estimator (kept for fidelity to the estimator
// as written; quadrature is the default everywhere else).
double bs_delta_lr_sampled(double u, double x, const BsParams& p,
                           const ValueGrid& t1_grid, int n_samples,
                           std::uint64_t seed);
double bs_delta_fd(double u, double x, const BsParams& p,
                   const ValueGrid& t1_grid, double h,
                   const EngineOptions& opts = {});
double bs_gamma_fd(double u, double x, const BsParams& p,
                   const ValueGrid& t1_grid, double h,
                   const EngineOptions& opts = {});

// Quasi-BS machinery: price/value the next date's claim with diffusion xi
// (terminal data stays the v-grid). With xi == v these reproduce the
// Bellman quantities bitwise.
double quasi_bs_price(double y, double xi, double rate, double delta_t,
                      const ValueGrid& claim, const EngineOptions& opts = {});

class QuasiValuer {
public:
    QuasiValuer(const ContractSpec& c, int period_n, double xi, double rate,
                const ValueGrid& next, const std::vector<double>& axis,
                const EngineOptions& opts = {});

    double price(double y) const { return continuation_.interpolate(y); }
    PolicyDecision value(double x) const;
    const ValueGrid& continuation() const { return continuation_; }

private:
    const ContractSpec& contract_;
    int period_n_;
    EngineOptions opts_;
    ValueGrid continuation_;
};

PolicyDecision quasi_bs_value(int period_n, double x, double xi,
                              const ContractSpec& c, double rate,
                              const ValueGrid& next,
                              const std::vector<double>& axis,
                              const EngineOptions& opts = {});

struct ImpliedVarBracket {
    double lo = 1e-8;
    double hi = 4.0;
};

// BS-implied variance of the claim at state x: unique xi with
// quasi_bs_price(x, xi) = target, to 1e-12 * max(1, target).
double implied_variance(double target_price, double x, double rate,
                        double delta_t, const ValueGrid& claim,
                        const EngineOptions& opts = {},
                        const ImpliedVarBracket& bracket = {});

// Value/delta/gamma of the mark V_BS(u, ., v) tabulated on (times x axis);
// hot-path Monte Carlo loops interpolate instead of re-quadrating. Built
// from bs_value_between / bs_delta_lr / bs_gamma_fd at every lattice node.
struct MarkLattice {
    std::vector<double> times; // u_0..u_M, u_M = t1
    std::vector<double> axis;
    std::vector<std::vector<double>> value; // [step][node], steps 0..M
    std::vector<std::vector<double>> delta; // steps 0..M-1
    std::vector<std::vector<double>> gamma; // steps 0..M-1

    double value_at(std::size_t step, double x) const;
    double delta_at(std::size_t step, double x) const;
    double gamma_at(std::size_t step, double x) const;

private:
    double interp(const std::vector<double>& row, double x) const;
};

MarkLattice build_mark_lattice(const std::vector<double>& times,
                               const BsParams& p, const ValueGrid& t1_grid,
                               const std::vector<double>& axis,
                               const EngineOptions& opts = {});

} // namespace oma
