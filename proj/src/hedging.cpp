#include "oma/hedging.hpp"

#include <atomic>
#include <cmath>

namespace oma {

namespace {
// see the decomposition engine: the xi1 claim is the terminal payoff, priced
// on a domain wide enough that far-OTM paths never feel the flat-tail cap
ValueGrid wide_claim(const ContractSpec& spec) {
    GridSpec wide;
    wide.x_max_multiple = 50.0;
    return make_terminal_grid(spec, make_axis(wide, spec));
}
} // namespace

HedgeEngine::HedgeEngine(const ContractSpec& spec, const BsParams& mark,
                         const MarketModel& model,
                         const BellmanSolution& bellman,
                         const EngineOptions& opts)
    : spec_(spec), mark_(mark), model_(model), bellman_(bellman), opts_(opts),
      claim_grid_(wide_claim(spec)),
      quasi_v_(spec, 1, mark.variance_v, mark.rate_r, claim_grid_,
               bellman.axis, opts) {
    mark_.validate();
    OMA_REQUIRE(std::abs(mark_.rate_r - model_rate(model)) < 1e-14,
                "hedge: mark and market must share the risk-free rate");
}

void HedgeEngine::prepare(const std::vector<double>& times, bool use_lattice) {
    if (use_lattice)
        lattice_ = build_mark_lattice(times, mark_, bellman_.at_date(1),
                                      bellman_.axis, opts_);
    else
        lattice_.reset();
}

double HedgeEngine::mark_value(std::size_t step, double u, double x) const {
    if (lattice_) return lattice_->value_at(step, x);
    return bs_value_between(u, x, mark_, bellman_.at_date(1), opts_);
}

double HedgeEngine::mark_delta(std::size_t step, double u, double x) const {
    if (lattice_) return lattice_->delta_at(step, x);
    return bs_delta_lr(u, x, mark_, bellman_.at_date(1), opts_);
}

double HedgeEngine::mark_gamma(std::size_t step, double u, double x) const {
    if (lattice_) return lattice_->gamma_at(step, x);
    return bs_gamma_fd(u, x, mark_, bellman_.at_date(1), std::max(x, 1.0) * 1e-4,
                       opts_);
}

double HedgeEngine::implied_var_t1(double x1, std::optional<double> alpha1) const {
    const double target = conditional_claim_price(
        model_, 1, x1, alpha1, spec_, claim_grid_, opts_);
    return implied_variance(target, x1, mark_.rate_r, spec_.period_delta,
                            claim_grid_, opts_);
}

PolicyDecision HedgeEngine::date1_value(double x, double xi) const {
    if (xi == mark_.variance_v) return quasi_v_.value(x);
    return quasi_bs_value(1, x, xi, spec_, mark_.rate_r, claim_grid_,
                          axis_prefix(bellman_.axis, x), opts_);
}

double HedgeEngine::leakage(double x1, double xi1) const {
    return date1_value(x1, mark_.variance_v).value - date1_value(x1, xi1).value;
}

HedgeLedger HedgeEngine::run_hedge(const PathSet& paths,
                                   std::size_t path_index, int stride) const {
    const std::size_t n = paths.n_steps();
    OMA_REQUIRE(stride >= 1 && n % static_cast<std::size_t>(stride) == 0,
                "run_hedge: rebalance stride must divide n_steps");
    const double du = paths.dt();
    const double r = mark_.rate_r;
    const double t1 = bellman_.at_date(1).time;
    OMA_REQUIRE(std::abs(paths.times.back() - t1) < 1e-12 &&
                    std::abs(paths.times.front() - (t1 - spec_.period_delta)) < 1e-12,
                "run_hedge: path times must cover [t0, t1]");

    HedgeLedger led;
    led.hedge_value.resize(n + 1);
    led.delta.resize(n);
    led.marked_pnl.resize(n + 1);

    const double x_start = paths.at(path_index, 0);
    double pi = mark_value(0, paths.times[0], x_start);
    led.hedge_value[0] = pi;
    led.marked_pnl[0] = 0.0;

    double delta_held = 0.0;
    double slip = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double u = paths.times[i];
        const double x = paths.at(path_index, i);
        const double x_next = paths.at(path_index, i + 1);
        OMA_NUMERIC_CHECK(std::isfinite(x) && std::isfinite(x_next),
                          "run_hedge: non-finite path value");
        if (i % static_cast<std::size_t>(stride) == 0)
            delta_held = mark_delta(i, u, x);
        led.delta[i] = delta_held;

        const double dx = x_next - x;
        pi = delta_held * (dx - r * x * du) + pi * (1.0 + r * du);
        led.hedge_value[i + 1] = pi;

        const double gamma = mark_gamma(i, u, x);
        slip += std::exp(r * (t1 - u)) * 0.5 * gamma *
                (mark_.variance_v * x * x * du - dx * dx);

        if (i + 1 < n)
            led.marked_pnl[i + 1] =
                pi - mark_value(i + 1, paths.times[i + 1], x_next);
    }
    led.slippage = slip;

    const double x1 = paths.at(path_index, n);
    const std::optional<double> alpha1 =
        paths.has_variance() ? std::optional<double>(paths.var_at(path_index, n))
                             : std::nullopt;
    led.implied_var_t1 = implied_var_t1(x1, alpha1);
    const double val_v = date1_value(x1, mark_.variance_v).value;
    const double val_xi = date1_value(x1, led.implied_var_t1).value;
    led.marked_pnl[n] = pi - val_v;
    led.leakage = val_v - val_xi;
    led.final_pnl = pi - val_xi;
    return led;
}

double HedgeEngine::slippage(const PathSet& paths, std::size_t path_index) const {
    const std::size_t n = paths.n_steps();
    const double du = paths.dt();
    const double t1 = bellman_.at_date(1).time;
    double slip = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double u = paths.times[i];
        const double x = paths.at(path_index, i);
        const double dx = paths.at(path_index, i + 1) - x;
        const double gamma = mark_gamma(i, u, x);
        slip += std::exp(mark_.rate_r * (t1 - u)) * 0.5 * gamma *
                (mark_.variance_v * x * x * du - dx * dx);
    }
    return slip;
}

double leakage(double x1, double v, double xi1, const ContractSpec& spec,
               double rate, const ValueGrid& next_claim,
               const std::vector<double>& axis, const EngineOptions& opts) {
    OMA_REQUIRE(xi1 > 0.0, "leakage: xi1 must be > 0");
    const double val_v =
        quasi_bs_value(1, x1, v, spec, rate, next_claim, axis, opts).value;
    const double val_xi =
        quasi_bs_value(1, x1, xi1, spec, rate, next_claim, axis, opts).value;
    return val_v - val_xi;
}

std::vector<HedgeSummaryRow> hedge_study(const ContractSpec& spec,
                                         const MarketModel& model,
                                         const PathSet& paths,
                                         const std::vector<double>& v_list,
                                         const std::vector<int>& stride_list,
                                         const GridSpec& gs,
                                         const EngineOptions& opts, Exec exec) {
    OMA_REQUIRE(!v_list.empty() && !stride_list.empty(),
                "hedge_study: empty variance or stride list");
    OMA_REQUIRE(paths.n_paths >= 1, "hedge_study: empty path set");

    std::vector<HedgeSummaryRow> rows;
    for (double v : v_list) {
        const BsParams mark{v, model_rate(model)};
        const BellmanSolution bellman = bs_solve_bellman(spec, mark, gs, opts);
        HedgeEngine engine(spec, mark, model, bellman, opts);
        engine.prepare(paths.times, true);
        for (int stride : stride_list) {
            HedgeSummaryRow row;
            row.variance_v = v;
            row.stride = stride;
            row.n_paths = paths.n_paths;
            row.final_pnl.resize(paths.n_paths);
            std::vector<std::string> errors(paths.n_paths);
            std::atomic<bool> failed{false};
            par::for_index(paths.n_paths, exec, [&](std::size_t m) {
                try {
                    row.final_pnl[m] = engine.run_hedge(paths, m, stride).final_pnl;
                } catch (const std::exception& e) {
                    errors[m] = e.what();
                    failed.store(true, std::memory_order_relaxed);
                }
            });
            if (failed.load())
                for (std::size_t m = 0; m < errors.size(); ++m)
                    if (!errors[m].empty())
                        throw NumericFailure("hedge_study path " + std::to_string(m) +
                                             ": " + errors[m]);
            double mean = 0.0;
            std::size_t pos = 0;
            for (double p : row.final_pnl) {
                mean += p;
                if (p > 0.0) ++pos;
            }
            mean /= static_cast<double>(paths.n_paths);
            double var = 0.0;
            for (double p : row.final_pnl) var += (p - mean) * (p - mean);
            row.mean = mean;
            row.stddev = paths.n_paths > 1
                             ? std::sqrt(var / static_cast<double>(paths.n_paths - 1))
                             : 0.0;
            row.frac_positive = static_cast<double>(pos) / static_cast<double>(paths.n_paths);
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

} // namespace oma
