#include "oma/io.hpp"

#include "oma/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace oma {

std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

Histogram make_histogram(const std::vector<double>& samples, int bins) {
    OMA_REQUIRE(!samples.empty(), "histogram: no samples");
    OMA_REQUIRE(bins >= 1, "histogram: need bins >= 1");
    const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
    double lo = *mn, hi = *mx;
    if (hi <= lo) hi = lo + 1.0; // degenerate sample
    Histogram h;
    h.edges.resize(static_cast<std::size_t>(bins) + 1);
    h.counts.assign(static_cast<std::size_t>(bins), 0);
    const double w = (hi - lo) / bins;
    for (int i = 0; i <= bins; ++i) h.edges[static_cast<std::size_t>(i)] = lo + i * w;
    h.edges.back() = hi;
    for (double s : samples) {
        auto b = static_cast<std::size_t>((s - lo) / w);
        if (b >= h.counts.size()) b = h.counts.size() - 1;
        ++h.counts[b];
    }
    return h;
}

void write_histogram_csv(const std::string& path, const Histogram& h,
                         const std::string& label) {
    write_histograms_csv(path, {{label, h}});
}

void write_histograms_csv(const std::string& path,
                          const std::vector<std::pair<std::string, Histogram>>& hs) {
    std::ofstream out(path);
    OMA_REQUIRE(out.good(), "cannot open for writing: " + path);
    out << "label,bin_lo,bin_hi,count\n";
    for (const auto& [label, h] : hs)
        for (std::size_t i = 0; i < h.counts.size(); ++i)
            out << label << ',' << fmt17(h.edges[i]) << ',' << fmt17(h.edges[i + 1])
                << ',' << h.counts[i] << '\n';
}

void write_value_grid_csv(const std::string& path, const BellmanSolution& sol,
                          int date_index) {
    const ValueGrid& g = sol.at_date(date_index);
    const bool has_policy =
        date_index >= 1 &&
        static_cast<std::size_t>(date_index) < sol.policies.size() &&
        !sol.policies[static_cast<std::size_t>(date_index)].empty();
    std::ofstream out(path);
    OMA_REQUIRE(out.good(), "cannot open for writing: " + path);
    out << "x,value,a_star\n";
    for (std::size_t j = 0; j < g.x.size(); ++j) {
        out << fmt17(g.x[j]) << ',' << fmt17(g.value[j]) << ',';
        if (has_policy)
            out << fmt17(sol.policies[static_cast<std::size_t>(date_index)][j].a_star);
        out << '\n';
    }
}

void write_paths_csv(const std::string& path, const PathSet& ps) {
    std::ofstream out(path);
    OMA_REQUIRE(out.good(), "cannot open for writing: " + path);
    out << "path,step,time,asset" << (ps.has_variance() ? ",variance" : "") << '\n';
    for (std::size_t m = 0; m < ps.n_paths; ++m)
        for (std::size_t i = 0; i < ps.n_times(); ++i) {
            out << m << ',' << i << ',' << fmt17(ps.times[i]) << ','
                << fmt17(ps.at(m, i));
            if (ps.has_variance()) out << ',' << fmt17(ps.var_at(m, i));
            out << '\n';
        }
}

PathSet read_paths_csv(const std::string& path) {
    std::ifstream in(path);
    OMA_REQUIRE(in.good(), "cannot open for reading: " + path);
    std::string line;
    OMA_REQUIRE(static_cast<bool>(std::getline(in, line)), "paths csv: empty file");
    const bool has_var = line.find("variance") != std::string::npos;
    PathSet ps;
    std::vector<double> times;
    std::vector<double> asset, variance;
    std::size_t n_paths = 0, prev_path = static_cast<std::size_t>(-1);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string tok;
        std::getline(ss, tok, ',');
        const std::size_t m = std::stoull(tok);
        std::getline(ss, tok, ',');
        const std::size_t i = std::stoull(tok);
        std::getline(ss, tok, ',');
        const double t = std::stod(tok);
        std::getline(ss, tok, ',');
        asset.push_back(std::stod(tok));
        if (has_var) {
            std::getline(ss, tok, ',');
            variance.push_back(std::stod(tok));
        }
        if (m != prev_path) {
            ++n_paths;
            prev_path = m;
        }
        if (m == 0) {
            if (times.size() <= i) times.resize(i + 1);
            times[i] = t;
        }
    }
    ps.times = std::move(times);
    ps.n_paths = n_paths;
    ps.asset = std::move(asset);
    ps.variance = std::move(variance);
    ps.scheme = "csv-import";
    ps.validate();
    return ps;
}

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

namespace {
constexpr char kMagic[8] = {'O', 'M', 'A', 'P', 'T', 'H', '1', '\0'};

template <class T>
void put(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
void get(std::ifstream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
}
} // namespace

void write_paths_bin(const std::string& path, const PathSet& ps,
                     std::uint64_t params_hash) {
    std::ofstream out(path, std::ios::binary);
    OMA_REQUIRE(out.good(), "cannot open for writing: " + path);
    out.write(kMagic, sizeof(kMagic));
    put(out, params_hash);
    put(out, ps.seed);
    put(out, static_cast<std::uint64_t>(ps.n_paths));
    put(out, static_cast<std::uint64_t>(ps.n_times()));
    const std::uint8_t has_var = ps.has_variance() ? 1 : 0;
    put(out, has_var);
    out.write(reinterpret_cast<const char*>(ps.times.data()),
              static_cast<std::streamsize>(ps.times.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(ps.asset.data()),
              static_cast<std::streamsize>(ps.asset.size() * sizeof(double)));
    if (has_var)
        out.write(reinterpret_cast<const char*>(ps.variance.data()),
                  static_cast<std::streamsize>(ps.variance.size() * sizeof(double)));
}

PathSet read_paths_bin(const std::string& path, std::uint64_t params_hash,
                       std::uint64_t seed) {
    std::ifstream in(path, std::ios::binary);
    OMA_REQUIRE(in.good(), "cannot open for reading: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    OMA_REQUIRE(std::memcmp(magic, kMagic, sizeof(kMagic)) == 0,
                "path cache: bad magic in " + path);
    std::uint64_t hash = 0, file_seed = 0, n_paths = 0, n_times = 0;
    std::uint8_t has_var = 0;
    get(in, hash);
    get(in, file_seed);
    get(in, n_paths);
    get(in, n_times);
    get(in, has_var);
    OMA_REQUIRE(hash == params_hash, "path cache: parameter hash mismatch");
    OMA_REQUIRE(file_seed == seed, "path cache: seed mismatch");
    PathSet ps;
    ps.seed = file_seed;
    ps.scheme = "binary-import";
    ps.n_paths = n_paths;
    ps.times.resize(n_times);
    ps.asset.resize(n_paths * n_times);
    in.read(reinterpret_cast<char*>(ps.times.data()),
            static_cast<std::streamsize>(ps.times.size() * sizeof(double)));
    in.read(reinterpret_cast<char*>(ps.asset.data()),
            static_cast<std::streamsize>(ps.asset.size() * sizeof(double)));
    if (has_var) {
        ps.variance.resize(ps.asset.size());
        in.read(reinterpret_cast<char*>(ps.variance.data()),
                static_cast<std::streamsize>(ps.variance.size() * sizeof(double)));
    }
    OMA_REQUIRE(in.good(), "path cache: truncated file " + path);
    ps.validate();
    return ps;
}

} // namespace oma
