#pragma once

#include "oma/bs_engine.hpp"
#include "oma/contract.hpp"
#include "oma/errors.hpp"
#include "oma/parallel.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace oma {

struct HestonParams {
    double rate_r = 0.0;
    double kappa = 0.1;
    double theta = 0.04;
    double vol_of_vol_nu = 0.1;
    double alpha0 = 0.04;
    double rho = -0.69;

    void validate() const {
        OMA_REQUIRE(kappa >= 0.0, "heston: kappa must be >= 0");
        OMA_REQUIRE(theta >= 0.0, "heston: theta must be >= 0");
        OMA_REQUIRE(vol_of_vol_nu >= 0.0, "heston: nu must be >= 0");
        OMA_REQUIRE(alpha0 >= 0.0, "heston: alpha0 must be >= 0");
        OMA_REQUIRE(rho >= -1.0 && rho <= 1.0, "heston: |rho| must be <= 1");
    }
};

struct BsMarket {
    double variance_w = 0.04;
    double rate_r = 0.0;
    void validate() const { OMA_REQUIRE(variance_w > 0.0, "bs market: w must be > 0"); }
};

// Exactly solvable "true model": BS with one variance per period
// (t_{n-1}, t_n]. Implied variances are then deterministic, which is what
// makes the multi-period identity testable by quadrature alone.
struct DeterministicVolModel {
    std::vector<double> variance_per_period; // w_1..w_N (extend-last if short)
    double rate_r = 0.0;

    void validate() const {
        OMA_REQUIRE(!variance_per_period.empty(), "detvol: need at least one variance");
        for (double w : variance_per_period)
            OMA_REQUIRE(w > 0.0, "detvol: every period variance must be > 0");
    }
    // 1-based period index
    double variance(int period) const {
        OMA_REQUIRE(period >= 1, "detvol: period index must be >= 1");
        const std::size_t i = static_cast<std::size_t>(period) - 1;
        return i < variance_per_period.size() ? variance_per_period[i]
                                              : variance_per_period.back();
    }
};

using MarketModel = std::variant<BsMarket, HestonParams, DeterministicVolModel>;

double model_rate(const MarketModel& m);
std::string model_label(const MarketModel& m);

// Simulated paths on an equally spaced grid over [t0, t1]. Row-major
// [path][time]; variance plane present only for Heston.
struct PathSet {
    std::vector<double> times;
    std::size_t n_paths = 0;
    std::vector<double> asset;
    std::vector<double> variance;
    std::uint64_t seed = 0;
    std::string scheme;

    std::size_t n_times() const { return times.size(); }
    std::size_t n_steps() const { return times.size() - 1; }
    bool has_variance() const { return !variance.empty(); }
    double dt() const { return times[1] - times[0]; }

    double at(std::size_t path, std::size_t i) const {
        return asset[path * n_times() + i];
    }
    double var_at(std::size_t path, std::size_t i) const {
        return variance[path * n_times() + i];
    }
    void validate() const;
};

// Full-truncation Euler for the variance, exact lognormal step for the
// log-asset given the left-point variance. Stream m depends only on
// (seed, m): results are identical for any n_paths and any schedule.
PathSet simulate_heston(const HestonParams& p, double x0, double t0, double t1,
                        int n_steps, int n_paths, std::uint64_t seed,
                        Exec exec = Exec::parallel);

// Constant-variance market over [t0, t1] (BS market, or the first period of
// a deterministic-vol model). Exact increments.
PathSet simulate_const_vol(double w, double rate, double x0, double t0,
                           double t1, int n_steps, int n_paths,
                           std::uint64_t seed, Exec exec = Exec::parallel);

// Simulate over [t0, t1] under any supported model.
PathSet simulate_market(const MarketModel& m, double x0, double t0, double t1,
                        int n_steps, int n_paths, std::uint64_t seed,
                        Exec exec = Exec::parallel);

// Semi-analytic Heston put, "little Heston trap" characteristic function,
// Gauss-Legendre on [0, phi_max]. Throws NumericFailure when the reported
// integrand tail is too large to trust the truncation.
double heston_put(double tau, double spot, double var0, const HestonParams& p,
                  double strike, int n_nodes = 400, double phi_max = 200.0);
double heston_call(double tau, double spot, double var0, const HestonParams& p,
                   double strike, int n_nodes = 400, double phi_max = 200.0);

// Date-t_n price of the next date's claim conditional on the post-withdrawal
// state: C_n(x) = E_{n,x}[e^{-r delta} claim(t_{n+1})]. For BS/detvol markets
// the claim is the supplied grid; for Heston only the two-period terminal
// claim g is supported (priced as x + heston_put).
double conditional_claim_price(const MarketModel& m, int period_n, double x,
                               std::optional<double> alpha,
                               const ContractSpec& spec,
                               const ValueGrid& next_claim,
                               const EngineOptions& opts = {});

} // namespace oma
