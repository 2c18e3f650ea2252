#pragma once

#include "oma/bs_engine.hpp"
#include "oma/market.hpp"
#include "oma/parallel.hpp"

#include <optional>
#include <vector>

namespace oma {

// Per-path record of the discrete self-financing hedge over [t0, t1].
struct HedgeLedger {
    std::vector<double> hedge_value; // Pi(u_i), per grid time
    std::vector<double> delta;       // delta held on [u_i, u_{i+1})
    std::vector<double> marked_pnl;  // Pi(u_i) - V_BS(u_i, X_i, v)
    double slippage = 0.0;           // accumulated gamma P&L at t1
    double leakage = 0.0;            // V_BS(t1,X1,v) - V_BS(t1,X1,xi1)
    double final_pnl = 0.0;          // Pi(u_N) - V_BS(t1,X1,xi1)
    double implied_var_t1 = 0.0;     // xi1
};

// Shared pricing state for hedge runs under one mark variance v: the
// insurer sells at V_BS(t0,x0,v), rebalances the BS delta every `stride`
// steps with v frozen, marks to model until t1, then re-marks at the
// market-implied variance xi1 (protocol H1-H3 with commitments C1-C2).
class HedgeEngine {
public:
    HedgeEngine(const ContractSpec& spec, const BsParams& mark,
                const MarketModel& model, const BellmanSolution& bellman,
                const EngineOptions& opts = {});

    // Tabulate value/delta/gamma marks on (times x axis) once; without this
    // every mark is re-quadratured (slow path, used by convergence tests).
    void prepare(const std::vector<double>& times, bool use_lattice = true);

    HedgeLedger run_hedge(const PathSet& paths, std::size_t path_index,
                          int stride) const;
    double slippage(const PathSet& paths, std::size_t path_index) const;
    double implied_var_t1(double x1, std::optional<double> alpha1) const;
    // V_BS(t1, x, xi) as a function of its variance argument
    PolicyDecision date1_value(double x, double xi) const;
    double leakage(double x1, double xi1) const;

    const BsParams& mark() const { return mark_; }
    const ValueGrid& t1_grid() const { return bellman_.at_date(1); }

private:
    double mark_value(std::size_t step, double u, double x) const;
    double mark_delta(std::size_t step, double u, double x) const;
    double mark_gamma(std::size_t step, double u, double x) const;

    const ContractSpec& spec_;
    BsParams mark_;
    const MarketModel& model_;
    const BellmanSolution& bellman_;
    EngineOptions opts_;
    ValueGrid claim_grid_; // terminal payoff on a wide pricing domain
    QuasiValuer quasi_v_;  // date-t1 value under the mark variance
    std::optional<MarkLattice> lattice_;
};

// Free-function form: V_BS(t1,x1,v) - V_BS(t1,x1,xi1), both via the quasi
// valuation against the next date's claim.
double leakage(double x1, double v, double xi1, const ContractSpec& spec,
               double rate, const ValueGrid& next_claim,
               const std::vector<double>& axis, const EngineOptions& opts = {});

struct HedgeSummaryRow {
    double variance_v = 0.0;
    int stride = 1;
    std::size_t n_paths = 0;
    double mean = 0.0;
    double stddev = 0.0;
    double frac_positive = 0.0;
    std::vector<double> final_pnl; // per path, in path order
};

// Sweep over mark variances and rebalance strides on one common PathSet.
std::vector<HedgeSummaryRow> hedge_study(const ContractSpec& spec,
                                         const MarketModel& model,
                                         const PathSet& paths,
                                         const std::vector<double>& v_list,
                                         const std::vector<int>& stride_list,
                                         const GridSpec& gs,
                                         const EngineOptions& opts = {},
                                         Exec exec = Exec::parallel);

} // namespace oma
