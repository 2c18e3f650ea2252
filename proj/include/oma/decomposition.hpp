#pragma once

#include "oma/bs_engine.hpp"
#include "oma/hedging.hpp"
#include "oma/market.hpp"
#include "oma/parallel.hpp"

#include <optional>
#include <vector>

namespace oma {

struct McEstimate {
    double value = 0.0;
    double se = 0.0;
};

struct DecompositionReport {
    double bs_price = 0.0;
    double va_realized = 0.0;   // V1(t0)
    double va_smile = 0.0;      // V2(t0)
    double va_suboptimal = 0.0; // V3(t0), <= 0; zero in the two-period case
    double true_price = 0.0;
    double residual = 0.0; // true - (bs + V1 + V2 + V3)
    double se_realized = 0.0;
    double se_smile = 0.0;
    double se_true = 0.0;
    double se_residual = 0.0; // SE of the pathwise residual
    std::size_t n_paths = 0;
    std::size_t n_steps = 0;
};

// Date-t1 value function under an arbitrary quasi variance: node-by-node
// withdrawal optimization against the one-period continuation of `next`.
ValueGrid date1_value_grid(const ContractSpec& spec, double variance,
                           double rate, const ValueGrid& next,
                           const std::vector<double>& axis,
                           const EngineOptions& opts = {});

// Monte Carlo verification of the two-period decomposition against a
// stochastic (or misspecified-BS) market.
class TwoPeriodDecomposer {
public:
    TwoPeriodDecomposer(const ContractSpec& spec, const BsParams& mark,
                        const MarketModel& model, const GridSpec& gs,
                        const EngineOptions& opts = {});

    // Gamma marks for V1 are tabulated on (times x axis) via bs_gamma_fd.
    void prepare(const std::vector<double>& times, bool use_lattice = true);

    const BellmanSolution& bellman() const { return bellman_; }
    double bs_price() const { return bs_price_; }

    double implied_var_t1(double x1, std::optional<double> alpha1) const;
    PolicyDecision date1_quasi(double x, double xi) const;

    McEstimate estimate_v1(const PathSet& paths, Exec exec = Exec::parallel) const;
    // consistency estimator: alpha_i X_i^2 du in place of (dX_i)^2
    McEstimate estimate_v1_alpha(const PathSet& paths,
                                 Exec exec = Exec::parallel) const;
    McEstimate estimate_v2(const PathSet& paths, Exec exec = Exec::parallel) const;
    McEstimate true_price_two_period(const PathSet& paths,
                                     Exec exec = Exec::parallel) const;
    DecompositionReport verify_theorem1(const PathSet& paths,
                                        Exec exec = Exec::parallel) const;

private:
    double path_v1(const PathSet& paths, std::size_t m) const;
    double path_v1_alpha(const PathSet& paths, std::size_t m) const;
    struct SmileParts {
        double xi1, value_xi, value_v;
    };
    SmileParts path_smile(const PathSet& paths, std::size_t m) const;

    const ContractSpec& spec_;
    BsParams mark_;
    MarketModel model_;
    EngineOptions opts_;
    BellmanSolution bellman_;
    ValueGrid claim_grid_; // terminal payoff on a wide domain (see .cpp)
    QuasiValuer quasi_v_;
    double bs_price_;
    std::optional<MarkLattice> lattice_;
};

// Deterministic quadrature route for the two-period identity under a BS(w)
// market: every term to ~1e-9, no Monte Carlo.
struct Theorem1Oracle {
    double bs_price = 0.0;
    double v1 = 0.0;
    double v2 = 0.0;
    double true_price = 0.0;
    double residual = 0.0;
};
Theorem1Oracle verify_theorem1_bs_oracle(const ContractSpec& spec, double w,
                                         const BsParams& mark,
                                         const GridSpec& gs,
                                         int n_time_nodes = 128);

// V1(t0) by quadrature under a constant-variance market: time integral of
// the discounted gamma expectation, E^w[gamma_v(u, X_u) X_u^2] evaluated in
// closed form through the composite-variance kernel.
double va_realized_quadrature(double w, const BsParams& mark, double x0,
                              double t0, const ValueGrid& t1_claim,
                              int n_time_nodes = 128);

// Multi-period verification under the deterministic-vol model (xi_n = w_{n+1}
// exactly): backward induction of V, V_BS, V2, V3 on one grid, the date
// identities, and the t0 identity with V1 added.
struct Theorem2Result {
    std::vector<double> axis;
    std::vector<ValueGrid> v_true, v_bs, v2, v3; // index = date 1..N
    std::vector<std::vector<double>> policy_true; // a*_n per date per node
    std::vector<double> max_date_residual;       // dates 1..N-1
    double t0_true = 0.0, t0_bs = 0.0;
    double t0_v1 = 0.0, t0_v2 = 0.0, t0_v3 = 0.0;
    double t0_residual = 0.0;
    double v2_direct_t0 = 0.0;   // direct-expectation route for V2(t0)
    double xi_probe_error = 0.0; // max |inverted xi - w_{n+1}| over probes
    double max_residual() const;
};

Theorem2Result verify_theorem2(const DeterministicVolModel& model,
                               const ContractSpec& spec, const BsParams& mark,
                               const GridSpec& gs, int n_time_nodes = 128);

// Per-step P&L attribution along one simulated path of the deterministic-vol
// model over [t0, t1]: time decay, delta, realized vol, future smile and
// withdrawal effects; totals telescope to the endpoint difference of
// V_BS + V2 + V3 up to O(du) discretization.
struct AttributionRow {
    int step = 0;
    double time_decay = 0.0;
    double delta_effect = 0.0;
    double realized_vol_effect = 0.0;
    double smile_effect = 0.0;
    double withdrawal_effect = 0.0;
    double total = 0.0;
};

struct AttributionReport {
    std::vector<AttributionRow> rows;
    double start_value = 0.0; // (V_BS + V2 + V3)(t0, x0)
    double end_value = 0.0;   // (V_BS + V2 + V3)(t1-, X_1)
};

AttributionReport attribution_report(const DeterministicVolModel& model,
                                     const ContractSpec& spec,
                                     const BsParams& mark, const PathSet& paths,
                                     std::size_t path_index, const GridSpec& gs);

} // namespace oma
