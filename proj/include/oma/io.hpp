#pragma once

#include "oma/bs_engine.hpp"
#include "oma/market.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace oma {

// All numeric CSV output goes through this: 17 significant digits, '.'
// decimal point, so re-runs byte-reproduce.
std::string fmt17(double x);

struct Histogram {
    std::vector<double> edges;  // size bins+1
    std::vector<std::size_t> counts;
};

Histogram make_histogram(const std::vector<double>& samples, int bins);
void write_histogram_csv(const std::string& path, const Histogram& h,
                         const std::string& label);
// several histograms stacked long-form: label,bin_lo,bin_hi,count
void write_histograms_csv(const std::string& path,
                          const std::vector<std::pair<std::string, Histogram>>& hs);

// columns: x,value,a_star (a_star empty for dates without a policy)
void write_value_grid_csv(const std::string& path, const BellmanSolution& sol,
                          int date_index);

void write_paths_csv(const std::string& path, const PathSet& ps);
PathSet read_paths_csv(const std::string& path);

// Compact binary cache keyed by (seed, params hash); refuses to load on a
// key mismatch.
std::uint64_t fnv1a(const std::string& bytes);
void write_paths_bin(const std::string& path, const PathSet& ps,
                     std::uint64_t params_hash);
PathSet read_paths_bin(const std::string& path, std::uint64_t params_hash,
                       std::uint64_t seed);

} // namespace oma
