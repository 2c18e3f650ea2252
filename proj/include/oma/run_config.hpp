#pragma once

#include "oma/bs_engine.hpp"
#include "oma/contract.hpp"
#include "oma/market.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace oma {

// One experiment per process invocation; everything needed to byte-reproduce
// the run is in here (and echoed to manifest.json).
struct RunConfig {
    std::string experiment; // price|hedge|decompose2p|decompose_mp|attribution|figures
    ContractSpec contract;
    MarketModel model = BsMarket{};
    double bs_mark_v = 0.04;
    int n_paths = 100;
    int n_steps = 252;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::vector<int> strides{1, 21};
    std::vector<double> v_list; // hedge/figures sweep; defaults to {bs_mark_v}
    std::string output_dir = "out";
    GridSpec grid;
    std::string path_io = "none"; // none|csv|binary
    int hist_bins = 30;
    bool write_ledger = true;
};

RunConfig parse_config_file(const std::string& path);
RunConfig parse_config_json(const std::string& json_text);
void validate_config(const RunConfig& cfg);
std::string config_to_json(const RunConfig& cfg); // effective config echo

// Runs the experiment, writes manifest.json and the experiment artifacts
// into cfg.output_dir. Returns the list of files written.
std::vector<std::string> run_experiment(const RunConfig& cfg);

extern const char* kLibraryVersion;
const char* git_hash();

} // namespace oma
