#include "oma/decomposition.hpp"

#include <atomic>
#include <cmath>

namespace oma {

namespace {

McEstimate mean_and_se(const std::vector<double>& xs) {
    const auto n = static_cast<double>(xs.size());
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    McEstimate e;
    e.value = mean;
    e.se = xs.size() > 1 ? std::sqrt(var / (n - 1.0) / n) : 0.0;
    return e;
}

EngineOptions exact_opts() {
    EngineOptions o;
    o.backend = Quadrature::exact_piecewise;
    return o;
}

// The implied-variance claim is the terminal payoff, which extends to any
// domain for free; a wide grid keeps the flat-tail cap away from the far-OTM
// paths whose put value is smaller than the cap loss on the pricing domain.
ValueGrid wide_terminal_claim(const ContractSpec& spec) {
    GridSpec wide;
    wide.x_max_multiple = 50.0;
    return make_terminal_grid(spec, make_axis(wide, spec));
}

} // namespace

ValueGrid date1_value_grid(const ContractSpec& spec, double variance,
                           double rate, const ValueGrid& next,
                           const std::vector<double>& axis,
                           const EngineOptions& opts) {
    const QuasiValuer valuer(spec, next.date_index - 1, variance, rate, next,
                             axis, opts);
    ValueGrid g;
    g.x = axis;
    g.value.resize(axis.size());
    g.date_index = next.date_index - 1;
    g.time = next.time - spec.period_delta;
    for (std::size_t j = 0; j < axis.size(); ++j)
        g.value[j] = valuer.value(axis[j]).value;
    g.validate();
    return g;
}

TwoPeriodDecomposer::TwoPeriodDecomposer(const ContractSpec& spec,
                                         const BsParams& mark,
                                         const MarketModel& model,
                                         const GridSpec& gs,
                                         const EngineOptions& opts)
    : spec_(spec), mark_(mark), model_(model), opts_(opts),
      bellman_(bs_solve_bellman(spec, mark, gs, opts)),
      claim_grid_(wide_terminal_claim(spec)),
      quasi_v_(spec, 1, mark.variance_v, mark.rate_r, claim_grid_,
               bellman_.axis, opts),
      bs_price_(0.0) {
    OMA_REQUIRE(spec.n_periods == 2, "two-period decomposition needs N == 2");
    OMA_REQUIRE(std::abs(mark_.rate_r - model_rate(model_)) < 1e-14,
                "decomposition: mark and market must share the risk-free rate");
    LognormalStepper step(spec.period_delta, mark_.variance_v, mark_.rate_r, opts_);
    bs_price_ = step.value(bellman_.at_date(1), spec.initial_account);
}

void TwoPeriodDecomposer::prepare(const std::vector<double>& times,
                                  bool use_lattice) {
    if (use_lattice)
        lattice_ = build_mark_lattice(times, mark_, bellman_.at_date(1),
                                      bellman_.axis, opts_);
    else
        lattice_.reset();
}

double TwoPeriodDecomposer::implied_var_t1(double x1,
                                           std::optional<double> alpha1) const {
    const double target = conditional_claim_price(model_, 1, x1, alpha1, spec_,
                                                  claim_grid_, opts_);
    return implied_variance(target, x1, mark_.rate_r, spec_.period_delta,
                            claim_grid_, opts_);
}

PolicyDecision TwoPeriodDecomposer::date1_quasi(double x, double xi) const {
    return quasi_bs_value(1, x, xi, spec_, mark_.rate_r, claim_grid_,
                          bellman_.axis, opts_);
}

double TwoPeriodDecomposer::path_v1(const PathSet& paths, std::size_t m) const {
    const double du = paths.dt();
    const double t0 = paths.times.front();
    const double v = mark_.variance_v;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < paths.n_times(); ++i) {
        const double x = paths.at(m, i);
        const double dx = paths.at(m, i + 1) - x;
        const double gamma =
            lattice_ ? lattice_->gamma_at(i, x)
                     : bs_gamma_fd(paths.times[i], x, mark_, bellman_.at_date(1),
                                   std::max(x, 1.0) * 1e-4, opts_);
        acc += 0.5 * std::exp(-mark_.rate_r * (paths.times[i] - t0)) * gamma *
               (dx * dx - v * x * x * du);
    }
    return acc;
}

double TwoPeriodDecomposer::path_v1_alpha(const PathSet& paths,
                                          std::size_t m) const {
    const double du = paths.dt();
    const double t0 = paths.times.front();
    const double v = mark_.variance_v;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < paths.n_times(); ++i) {
        const double x = paths.at(m, i);
        const double a = paths.var_at(m, i);
        const double gamma =
            lattice_ ? lattice_->gamma_at(i, x)
                     : bs_gamma_fd(paths.times[i], x, mark_, bellman_.at_date(1),
                                   std::max(x, 1.0) * 1e-4, opts_);
        acc += 0.5 * std::exp(-mark_.rate_r * (paths.times[i] - t0)) * gamma *
               (a - v) * x * x * du;
    }
    return acc;
}

TwoPeriodDecomposer::SmileParts
TwoPeriodDecomposer::path_smile(const PathSet& paths, std::size_t m) const {
    const std::size_t last = paths.n_times() - 1;
    const double x1 = paths.at(m, last);
    const std::optional<double> alpha1 =
        paths.has_variance() ? std::optional<double>(paths.var_at(m, last))
                             : std::nullopt;
    SmileParts sp;
    sp.xi1 = implied_var_t1(x1, alpha1);
    // the withdrawal optimizer only probes [0, x1]; a prefix axis sees the
    // identical interpolant at a fraction of the build cost
    sp.value_xi = quasi_bs_value(1, x1, sp.xi1, spec_, mark_.rate_r, claim_grid_,
                                 axis_prefix(bellman_.axis, x1), opts_).value;
    sp.value_v = quasi_v_.value(x1).value;
    return sp;
}

namespace {
// Parallel per-path map with slot writes; exceptions are captured and the
// first one is rethrown with its path id.
template <class F>
void per_path(const PathSet& paths, Exec exec, F&& body) {
    std::vector<std::string> errors(paths.n_paths);
    std::atomic<bool> failed{false};
    par::for_index(paths.n_paths, exec, [&](std::size_t m) {
        try {
            body(m);
        } catch (const std::exception& e) {
            errors[m] = e.what();
            failed.store(true, std::memory_order_relaxed);
        }
    });
    if (failed.load()) {
        for (std::size_t m = 0; m < errors.size(); ++m)
            if (!errors[m].empty())
                throw NumericFailure("path " + std::to_string(m) + ": " + errors[m]);
    }
}
} // namespace

McEstimate TwoPeriodDecomposer::estimate_v1(const PathSet& paths,
                                            Exec exec) const {
    OMA_REQUIRE(paths.n_paths >= 2, "estimate_v1: need at least 2 paths");
    std::vector<double> slot(paths.n_paths);
    per_path(paths, exec, [&](std::size_t m) { slot[m] = path_v1(paths, m); });
    return mean_and_se(slot);
}

McEstimate TwoPeriodDecomposer::estimate_v1_alpha(const PathSet& paths,
                                                  Exec exec) const {
    OMA_REQUIRE(paths.has_variance(),
                "estimate_v1_alpha: path set carries no variance plane");
    std::vector<double> slot(paths.n_paths);
    per_path(paths, exec, [&](std::size_t m) { slot[m] = path_v1_alpha(paths, m); });
    return mean_and_se(slot);
}

McEstimate TwoPeriodDecomposer::estimate_v2(const PathSet& paths,
                                            Exec exec) const {
    OMA_REQUIRE(paths.n_paths >= 2, "estimate_v2: need at least 2 paths");
    const double disc =
        std::exp(-mark_.rate_r * (paths.times.back() - paths.times.front()));
    std::vector<double> slot(paths.n_paths);
    per_path(paths, exec, [&](std::size_t m) {
        const SmileParts sp = path_smile(paths, m);
        slot[m] = disc * (sp.value_xi - sp.value_v);
    });
    return mean_and_se(slot);
}

McEstimate TwoPeriodDecomposer::true_price_two_period(const PathSet& paths,
                                                      Exec exec) const {
    OMA_REQUIRE(paths.n_paths >= 2, "true_price: need at least 2 paths");
    const double disc =
        std::exp(-mark_.rate_r * (paths.times.back() - paths.times.front()));
    std::vector<double> slot(paths.n_paths);
    per_path(paths, exec, [&](std::size_t m) {
        slot[m] = disc * path_smile(paths, m).value_xi;
    });
    return mean_and_se(slot);
}

DecompositionReport TwoPeriodDecomposer::verify_theorem1(const PathSet& paths,
                                                         Exec exec) const {
    OMA_REQUIRE(paths.n_paths >= 2, "verify_theorem1: need at least 2 paths");
    const double disc =
        std::exp(-mark_.rate_r * (paths.times.back() - paths.times.front()));
    std::vector<double> v1(paths.n_paths), v2(paths.n_paths), tp(paths.n_paths);
    per_path(paths, exec, [&](std::size_t m) {
        v1[m] = path_v1(paths, m);
        const SmileParts sp = path_smile(paths, m);
        v2[m] = disc * (sp.value_xi - sp.value_v);
        tp[m] = disc * sp.value_xi;
    });

    DecompositionReport rep;
    rep.n_paths = paths.n_paths;
    rep.n_steps = paths.n_steps();
    rep.bs_price = bs_price_;
    const McEstimate e1 = mean_and_se(v1);
    const McEstimate e2 = mean_and_se(v2);
    const McEstimate et = mean_and_se(tp);
    rep.va_realized = e1.value;
    rep.se_realized = e1.se;
    rep.va_smile = e2.value;
    rep.se_smile = e2.se;
    rep.va_suboptimal = 0.0; // no withdrawal date before t1 when N = 2
    rep.true_price = et.value;
    rep.se_true = et.se;

    std::vector<double> res(paths.n_paths);
    for (std::size_t m = 0; m < paths.n_paths; ++m)
        res[m] = tp[m] - v1[m] - v2[m];
    const McEstimate er = mean_and_se(res);
    rep.residual = er.value - bs_price_;
    rep.se_residual = er.se;
    return rep;
}

double va_realized_quadrature(double w, const BsParams& mark, double x0,
                              double t0, const ValueGrid& t1_claim,
                              int n_time_nodes) {
    OMA_REQUIRE(w > 0.0, "va_realized_quadrature: w must be > 0");
    const double t1 = t1_claim.time;
    const double delta = t1 - t0;
    OMA_REQUIRE(delta > 0.0, "va_realized_quadrature: claim date not after t0");
    const double v = mark.variance_v;
    const QuadratureRule rule = gauss_legendre(n_time_nodes, t0, t1);
    const EngineOptions opts = exact_opts();
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const double u = rule.nodes[i];
        const double a = u - t0;
        const double b = t1 - u;
        const double total_var = w * a + v * b; // composite kernel variance
        const LognormalStepper step(delta, total_var / delta, mark.rate_r, opts);
        const double s = step.stdev();
        const double e_gamma_x2 =
            step.weighted(t1_claim, x0, 1.0, -s, -1.0) / (s * s);
        acc += rule.weights[i] * e_gamma_x2;
    }
    return 0.5 * (w - v) * acc;
}

Theorem1Oracle verify_theorem1_bs_oracle(const ContractSpec& spec, double w,
                                         const BsParams& mark,
                                         const GridSpec& gs,
                                         int n_time_nodes) {
    OMA_REQUIRE(spec.n_periods == 2, "theorem1 oracle needs N == 2");
    OMA_REQUIRE(w > 0.0, "theorem1 oracle: w must be > 0");
    const EngineOptions opts = exact_opts();
    const std::vector<double> axis = make_axis(gs, spec);
    const ValueGrid terminal = make_terminal_grid(spec, axis);
    const double r = mark.rate_r;
    const double x0 = spec.initial_account;

    // date-t1 value functions under the mark variance and under xi1 = w
    const ValueGrid v1_grid_v = date1_value_grid(spec, mark.variance_v, r,
                                                 terminal, axis, opts);
    const ValueGrid v1_grid_w = date1_value_grid(spec, w, r, terminal, axis, opts);

    ValueGrid gap = v1_grid_v;
    for (std::size_t j = 0; j < gap.value.size(); ++j)
        gap.value[j] = v1_grid_w.value[j] - v1_grid_v.value[j];

    const LognormalStepper step_w(spec.period_delta, w, r, opts);
    const LognormalStepper step_v(spec.period_delta, mark.variance_v, r, opts);

    Theorem1Oracle out;
    out.bs_price = step_v.value(v1_grid_v, x0);
    out.true_price = step_w.value(v1_grid_w, x0);
    out.v2 = step_w.value(gap, x0);
    out.v1 = va_realized_quadrature(w, mark, x0, 0.0, v1_grid_v, n_time_nodes);
    out.residual = out.true_price - (out.bs_price + out.v1 + out.v2);
    return out;
}

double Theorem2Result::max_residual() const {
    double r = std::abs(t0_residual);
    for (double d : max_date_residual) r = std::max(r, d);
    return r;
}

namespace {

// Shared backward induction for the deterministic-vol identity; works for
// any N >= 2.
Theorem2Result multi_period_grids(const DeterministicVolModel& model,
                                  const ContractSpec& spec,
                                  const BsParams& mark, const GridSpec& gs,
                                  int n_time_nodes) {
    model.validate();
    spec.validate();
    mark.validate();
    OMA_REQUIRE(std::abs(mark.rate_r - model.rate_r) < 1e-14,
                "verify_theorem2: mark and model must share the risk-free rate");
    const EngineOptions opts = exact_opts();
    const double r = mark.rate_r;
    const double v = mark.variance_v;
    const int n_dates = spec.n_periods;

    Theorem2Result res;
    res.axis = make_axis(gs, spec);
    const auto& axis = res.axis;
    const std::size_t k = axis.size();
    res.v_true.resize(static_cast<std::size_t>(n_dates) + 1);
    res.v_bs.resize(res.v_true.size());
    res.v2.resize(res.v_true.size());
    res.v3.resize(res.v_true.size());
    res.policy_true.resize(res.v_true.size());

    const auto zero_grid = [&](int date) {
        ValueGrid g;
        g.x = axis;
        g.value.assign(k, 0.0);
        g.date_index = date;
        g.time = spec.time(date);
        return g;
    };

    const auto n_sz = static_cast<std::size_t>(n_dates);
    res.v_true[n_sz] = make_terminal_grid(spec, axis);
    res.v_bs[n_sz] = res.v_true[n_sz];
    res.v2[n_sz] = zero_grid(n_dates);
    res.v3[n_sz] = zero_grid(n_dates);

    for (int n = n_dates - 1; n >= 1; --n) {
        const auto ns = static_cast<std::size_t>(n);
        const double w_next = model.variance(n + 1); // = xi_n, deterministic
        const ValueGrid cont_true =
            continuation_grid(w_next, r, spec, res.v_true[ns + 1], axis, opts);
        const ValueGrid cont_bs =
            continuation_grid(v, r, spec, res.v_bs[ns + 1], axis, opts);
        const ValueGrid cont_quasi =
            continuation_grid(w_next, r, spec, res.v_bs[ns + 1], axis, opts);
        const ValueGrid cont_v2 =
            continuation_grid(w_next, r, spec, res.v2[ns + 1], axis, opts);
        const ValueGrid cont_v3 =
            continuation_grid(w_next, r, spec, res.v3[ns + 1], axis, opts);

        ValueGrid g_true = zero_grid(n), g_bs = zero_grid(n), g_v2 = zero_grid(n),
                  g_v3 = zero_grid(n);
        res.policy_true[ns].assign(k, 0.0);
        double max_res = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            const double x = axis[j];
            auto obj = [&](const ValueGrid& cont) {
                return [&cont, &spec, x](double a) {
                    const double kk = std::max(x - a, 0.0);
                    return (1.0 - spec.penalty_eta) * std::min(a, x) +
                           cont.interpolate(kk);
                };
            };
            const PolicyDecision p_true =
                maximize_withdrawal(spec, n, x, obj(cont_true), opts);
            const PolicyDecision p_bs =
                maximize_withdrawal(spec, n, x, obj(cont_bs), opts);
            const PolicyDecision p_quasi =
                maximize_withdrawal(spec, n, x, obj(cont_quasi), opts);

            const double k_star = std::max(x - p_true.a_star, 0.0);
            const auto j_quasi = obj(cont_quasi);
            g_true.value[j] = p_true.value;
            g_bs.value[j] = p_bs.value;
            res.policy_true[ns][j] = p_true.a_star;
            g_v2.value[j] = p_quasi.value - p_bs.value + cont_v2.interpolate(k_star);
            g_v3.value[j] = j_quasi(p_true.a_star) - j_quasi(p_quasi.a_star) +
                            cont_v3.interpolate(k_star);
            max_res = std::max(max_res,
                               std::abs(g_true.value[j] - (g_bs.value[j] +
                                                           g_v2.value[j] +
                                                           g_v3.value[j])));
        }
        res.v_true[ns] = std::move(g_true);
        res.v_bs[ns] = std::move(g_bs);
        res.v2[ns] = std::move(g_v2);
        res.v3[ns] = std::move(g_v3);
        res.max_date_residual.insert(res.max_date_residual.begin(), max_res);
    }

    // t0 layer over period 1
    const double w1 = model.variance(1);
    const double x0 = spec.initial_account;
    const LognormalStepper step_w1(spec.period_delta, w1, r, opts);
    const LognormalStepper step_v(spec.period_delta, v, r, opts);
    res.t0_true = step_w1.value(res.v_true[1], x0);
    res.t0_bs = step_v.value(res.v_bs[1], x0);
    res.t0_v2 = step_w1.value(res.v2[1], x0);
    res.t0_v3 = step_w1.value(res.v3[1], x0);
    res.t0_v1 = va_realized_quadrature(w1, mark, x0, 0.0, res.v_bs[1], n_time_nodes);
    res.t0_residual =
        res.t0_true - (res.t0_bs + res.t0_v1 + res.t0_v2 + res.t0_v3);

    // direct-expectation route for V2(t0): discounted gap terms composed
    // forward through the optimal policy maps (no recursion)
    {
        double direct = 0.0;
        ValueGrid carrier = zero_grid(1); // E[gap_n(X_n)] seen from date 1
        for (int n = 1; n <= n_dates - 1; ++n) {
            const auto ns = static_cast<std::size_t>(n);
            ValueGrid gap_n = zero_grid(n);
            const ValueGrid quasi_n = date1_value_grid(
                spec, model.variance(n + 1), r, res.v_bs[ns + 1], axis, opts);
            for (std::size_t j = 0; j < k; ++j)
                gap_n.value[j] = quasi_n.value[j] - res.v_bs[ns].value[j];
            // push gap_n from date n back to date 1 through the controlled state
            ValueGrid pushed = gap_n;
            for (int mdate = n - 1; mdate >= 1; --mdate) {
                const auto ms = static_cast<std::size_t>(mdate);
                const LognormalStepper step_m(spec.period_delta,
                                              model.variance(mdate + 1), r, opts);
                ValueGrid next_pushed = zero_grid(mdate);
                for (std::size_t j = 0; j < k; ++j) {
                    const double kk =
                        std::max(axis[j] - res.policy_true[ms][j], 0.0);
                    next_pushed.value[j] = step_m.value(pushed, kk);
                }
                pushed = std::move(next_pushed);
            }
            direct += step_w1.value(pushed, x0);
        }
        res.v2_direct_t0 = direct;
    }

    // implied-variance probes: BS-in-BS inversion must return w_{n+1}
    {
        double max_err = 0.0;
        for (int n = 1; n <= n_dates - 1; ++n) {
            const auto ns = static_cast<std::size_t>(n);
            const double w_next = model.variance(n + 1);
            for (double x : {0.5 * x0, x0}) {
                const LognormalStepper sw(spec.period_delta, w_next, r, opts);
                const double target = sw.value(res.v_bs[ns + 1], x);
                const double xi = implied_variance(target, x, r, spec.period_delta,
                                                   res.v_bs[ns + 1], opts);
                max_err = std::max(max_err, std::abs(xi - w_next));
            }
        }
        res.xi_probe_error = max_err;
    }
    return res;
}

} // namespace

Theorem2Result verify_theorem2(const DeterministicVolModel& model,
                               const ContractSpec& spec, const BsParams& mark,
                               const GridSpec& gs, int n_time_nodes) {
    OMA_REQUIRE(spec.n_periods >= 3,
                "verify_theorem2: needs N >= 3 (use the two-period oracle otherwise)");
    return multi_period_grids(model, spec, mark, gs, n_time_nodes);
}

AttributionReport attribution_report(const DeterministicVolModel& model,
                                     const ContractSpec& spec,
                                     const BsParams& mark, const PathSet& paths,
                                     std::size_t path_index,
                                     const GridSpec& gs) {
    OMA_REQUIRE(path_index < paths.n_paths, "attribution: path index out of range");
    const Theorem2Result mp = multi_period_grids(model, spec, mark, gs, 64);
    const EngineOptions opts = exact_opts();
    const double r = mark.rate_r;
    const double v = mark.variance_v;
    const double t1 = spec.time(1);

    const auto value_of = [&](const ValueGrid& claim, double variance, double u,
                              double x) {
        if (t1 - u <= 0.0) return claim.interpolate(x);
        const LognormalStepper step(t1 - u, variance, r, opts);
        return step.value(claim, x);
    };

    AttributionReport rep;
    const std::size_t n = paths.n_steps();
    rep.rows.reserve(n);
    const double du = paths.dt();
    for (std::size_t i = 0; i < n; ++i) {
        const double u = paths.times[i];
        const double x = paths.at(path_index, i);
        const double x_next = paths.at(path_index, i + 1);
        const double dx = x_next - x;
        const LognormalStepper step(t1 - u, v, r, opts);
        const double val = step.value(mp.v_bs[1], x);
        const double s = step.stdev();
        const double delta = step.weighted(mp.v_bs[1], x, 0.0, 1.0, 0.0) / (x * s);
        const double h = std::max(x, 1.0) * 1e-4;
        const double gamma =
            (step.value(mp.v_bs[1], x + h) - 2.0 * val + step.value(mp.v_bs[1], x - h)) /
            (h * h);

        AttributionRow row;
        row.step = static_cast<int>(i);
        // BS PDE: d_t V = rV - r x V_x - (v/2) x^2 V_xx
        row.time_decay = (r * val - r * x * delta - 0.5 * v * x * x * gamma) * du;
        row.delta_effect = delta * dx;
        row.realized_vol_effect = 0.5 * gamma * dx * dx;
        row.smile_effect = value_of(mp.v2[1], model.variance(1), paths.times[i + 1], x_next) -
                           value_of(mp.v2[1], model.variance(1), u, x);
        row.withdrawal_effect =
            value_of(mp.v3[1], model.variance(1), paths.times[i + 1], x_next) -
            value_of(mp.v3[1], model.variance(1), u, x);
        row.total = row.time_decay + row.delta_effect + row.realized_vol_effect +
                    row.smile_effect + row.withdrawal_effect;
        rep.rows.push_back(row);
    }

    const double x_start = paths.at(path_index, 0);
    const double x_end = paths.at(path_index, n);
    rep.start_value = value_of(mp.v_bs[1], v, paths.times.front(), x_start) +
                      value_of(mp.v2[1], model.variance(1), paths.times.front(), x_start) +
                      value_of(mp.v3[1], model.variance(1), paths.times.front(), x_start);
    rep.end_value = mp.v_bs[1].interpolate(x_end) + mp.v2[1].interpolate(x_end) +
                    mp.v3[1].interpolate(x_end);
    return rep;
}

} // namespace oma
