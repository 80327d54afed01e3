// Command line front end: train / verify / analyze / plot.
#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "revgn/cli.hpp"
#include "revgn/linalg.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Exact Gauss-Newton training for reversible coupling networks"};
    app.require_subcommand(1);

    if (const char* threads = std::getenv("REVGN_THREADS"))
        revgn::set_blas_threads(std::atoi(threads));

    std::string config_path;
    auto* train_cmd = app.add_subcommand("train", "run a config-driven experiment");
    train_cmd->add_option("config", config_path, "flat key=value config file")->required();

    bool full = false;
    auto* verify_cmd = app.add_subcommand("verify", "run the dense verification checks");
    verify_cmd->add_flag("--full", full, "include the learning-rate scaling study");

    std::string glob, against, out_csv = "analysis.csv";
    std::uint64_t probe_seed = 777;
    auto* analyze_cmd = app.add_subcommand("analyze", "recompute kernel metrics for checkpoints");
    analyze_cmd->add_option("glob", glob, "checkpoint glob, e.g. runs/x/ckpt_s0_e*.rgn1")
        ->required();
    analyze_cmd->add_option("--against", against, "baseline checkpoint (default: first match)");
    analyze_cmd->add_option("--probe-seed", probe_seed, "probe seed (default 777)");
    analyze_cmd->add_option("--out", out_csv, "output CSV (default analysis.csv)");

    std::string csv_path, out_dir = "plots";
    auto* plot_cmd = app.add_subcommand("plot", "render metric curves to SVG");
    plot_cmd->add_option("csv", csv_path, "metrics CSV")->required();
    plot_cmd->add_option("--out", out_dir, "output directory (default plots)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;  // usage errors exit 2
    }

    if (train_cmd->parsed()) return revgn::cli::train(config_path, std::cout);
    if (verify_cmd->parsed()) return revgn::cli::verify(full, std::cout);
    if (analyze_cmd->parsed())
        return revgn::cli::analyze(glob, probe_seed, against, out_csv, std::cout);
    if (plot_cmd->parsed()) return revgn::cli::plot(csv_path, out_dir, std::cout);
    return 2;
}
