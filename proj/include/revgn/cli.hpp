// Experiment orchestration: config-driven training runs, verification
// checks, checkpoint analysis and plot emission. Batch operation only.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "revgn/optim.hpp"

namespace revgn::cli {

/// Flat key-value configuration, dotted keys, one `key = value` per line.
struct RunConfig {
    // dataset
    std::string dataset = "synthetic";  // mnist | cifar10 | uci | synthetic
    std::string dataset_path;           // empty -> $REVGN_DATA_DIR/<name>
    std::size_t subset = 0;             // 0 = full train split
    bool augment = false;
    std::vector<std::size_t> uci_targets;
    std::size_t synthetic_d = 8;
    std::size_t synthetic_n = 256;
    std::size_t synthetic_d_y = 2;
    std::uint64_t synthetic_seed = 7;
    double synthetic_noise = 0.01;

    // model
    std::size_t d_prime = 16;
    std::size_t blocks = 2;
    std::size_t d_y = 0;  // 0 = dataset default
    std::string init = "gaussian";
    double init_sigma = 1e-3;
    bool no_bottleneck = false;

    // optimizer
    std::string optimizer = "gn";  // gn | sgd | adam
    std::vector<SchedulePoint> schedule;  // overrides `optimizer` when set
    GnConfig gn;
    SgdConfig sgd;
    AdamConfig adam;
    std::uint64_t pinv_noise_seed = 0;

    // regime
    std::string regime = "full_batch";  // full_batch | minibatch
    std::size_t batch = 0;
    std::size_t epochs = 10;
    std::vector<std::uint32_t> seeds = {0};
    std::string loss = "auto";  // square | cross_entropy | auto

    // analysis
    std::size_t probe = 100;
    std::uint64_t probe_seed = 777;
    bool ntk = false;
    bool cka = false;
    std::size_t metric_cadence = 1;
    std::size_t checkpoint_cadence = 1;

    // output
    std::string output_dir = "runs/out";
    std::string run_id = "run";
};

RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_file(const std::string& path);
/// Canonical serialization, used for manifests and the config hash.
std::string serialize_config(const RunConfig& cfg);
std::string config_hash(const RunConfig& cfg);

/// Metrics CSV schema (v1). Multi-valued fields are ';'-joined.
extern const char* kMetricsHeader;

/// Runs every seed of the configured experiment. Returns a process exit
/// code: 0 ok, 1 recorded failure (e.g. divergence), 2 usage error.
int train(const std::string& config_path, std::ostream& log);

/// Runs the verification checks at desk scale; `full` adds the learning
/// rate scaling study. JSON report lines go to `report`, returns 0/1.
int verify(bool full, std::ostream& report);

/// Recomputes kernel/representation metrics for a glob of checkpoints
/// against the first one (or `against`), appending CSV rows to out_csv.
int analyze(const std::string& checkpoint_glob, std::uint64_t probe_seed,
            const std::string& against, const std::string& out_csv, std::ostream& log);

/// Renders the metric curves of a CSV into self-contained SVG files.
int plot(const std::string& csv_path, const std::string& out_dir, std::ostream& log);

}  // namespace revgn::cli
