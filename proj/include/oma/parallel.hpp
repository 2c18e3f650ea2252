#pragma once

#include <cstddef>
#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace oma {

// Serial variants are kept as the reference implementation; parallel runs
// must produce bitwise-identical results (per-slot writes, ordered reduce).
enum class Exec { serial, parallel };

namespace par {

// Worker cap: min(hardware, OMA_VA_THREADS). Read once.
inline int max_threads() {
    static const int n = [] {
#ifdef _OPENMP
        int hw = omp_get_max_threads();
#else
        int hw = 1;
#endif
        if (const char* env = std::getenv("OMA_VA_THREADS")) {
            int cap = std::atoi(env);
            if (cap > 0 && cap < hw) hw = cap;
        }
        return hw > 0 ? hw : 1;
    }();
    return n;
}

// Index loop over [0, n). Each index writes only its own slots, so the
// schedule cannot change results.
template <class F>
void for_index(std::size_t n, Exec exec, F&& f) {
#ifdef _OPENMP
    if (exec == Exec::parallel && n > 1) {
        const int nt = max_threads();
#pragma omp parallel for schedule(static) num_threads(nt)
        for (long long i = 0; i < static_cast<long long>(n); ++i)
            f(static_cast<std::size_t>(i));
        return;
    }
#else
    (void)exec;
#endif
    for (std::size_t i = 0; i < n; ++i) f(i);
}

} // namespace par
} // namespace oma
