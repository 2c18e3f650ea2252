// Timings for the path-parallel kernels: serial reference vs OpenMP.
// Run: ./oma_bench [n_paths] [n_steps]

#include "oma/decomposition.hpp"
#include "oma/hedging.hpp"
#include "oma/market.hpp"
#include "oma/parallel.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>

using namespace oma;

namespace {

double now_seconds() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

template <class F>
double time_it(F&& f) {
    const double t0 = now_seconds();
    f();
    return now_seconds() - t0;
}

void report(const char* name, double serial, double parallel, bool equal) {
    std::printf("%-28s serial %8.3fs   omp %8.3fs   speedup %5.2fx   %s\n", name,
                serial, parallel, serial / parallel,
                equal ? "outputs identical" : "OUTPUTS DIFFER");
}

} // namespace

int main(int argc, char** argv) {
    const int n_paths = argc > 1 ? std::atoi(argv[1]) : 20000;
    const int n_steps = argc > 2 ? std::atoi(argv[2]) : 250;
    std::printf("threads: %d, paths: %d, steps: %d\n", par::max_threads(),
                n_paths, n_steps);

    const ContractSpec spec;
    const HestonParams heston;
    const MarketModel model = heston;
    const GridSpec gs;
    const BsParams mark{0.04, 0.0};

    PathSet ps_serial, ps_parallel;
    const double t_sim_s = time_it([&] {
        ps_serial = simulate_heston(heston, spec.initial_account, 0.0, 1.0,
                                    n_steps, n_paths, 7, Exec::serial);
    });
    const double t_sim_p = time_it([&] {
        ps_parallel = simulate_heston(heston, spec.initial_account, 0.0, 1.0,
                                      n_steps, n_paths, 7, Exec::parallel);
    });
    report("simulate_heston", t_sim_s, t_sim_p,
           ps_serial.asset == ps_parallel.asset &&
               ps_serial.variance == ps_parallel.variance);

    TwoPeriodDecomposer dec(spec, mark, model, gs);
    dec.prepare(ps_serial.times, true);
    McEstimate v1_s, v1_p;
    const double t_v1_s =
        time_it([&] { v1_s = dec.estimate_v1(ps_serial, Exec::serial); });
    const double t_v1_p =
        time_it([&] { v1_p = dec.estimate_v1(ps_serial, Exec::parallel); });
    report("estimate_v1", t_v1_s, t_v1_p,
           v1_s.value == v1_p.value && v1_s.se == v1_p.se);

    McEstimate tp_s, tp_p;
    const double t_tp_s = time_it(
        [&] { tp_s = dec.true_price_two_period(ps_serial, Exec::serial); });
    const double t_tp_p = time_it(
        [&] { tp_p = dec.true_price_two_period(ps_serial, Exec::parallel); });
    report("true_price_two_period", t_tp_s, t_tp_p, tp_s.value == tp_p.value);

    std::vector<HedgeSummaryRow> h_s, h_p;
    const double t_h_s = time_it([&] {
        h_s = hedge_study(spec, model, ps_serial, {0.04}, {1}, gs, {}, Exec::serial);
    });
    const double t_h_p = time_it([&] {
        h_p = hedge_study(spec, model, ps_serial, {0.04}, {1}, gs, {}, Exec::parallel);
    });
    report("hedge_study", t_h_s, t_h_p,
           h_s.front().final_pnl == h_p.front().final_pnl);
    return 0;
}
