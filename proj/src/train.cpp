#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "revgn/analysis.hpp"
#include "revgn/cli.hpp"
#include "revgn/data.hpp"
#include "revgn/rng.hpp"

#ifndef REVGN_GIT_DESCRIBE
#define REVGN_GIT_DESCRIBE "unknown"
#endif

namespace revgn::cli {

const char* kMetricsHeader =
    "schema,run_id,seed,epoch,step,train_loss,test_loss,train_acc,test_acc,"
    "minibatch_loss_change_pct,pinv_ranks,ntk_similarity,ntk_rate,cka,"
    "weight_cosine,wall_ms";

namespace {

namespace fs = std::filesystem;

constexpr std::uint64_t kSubsetSeed = 424242;  // one fixed subset per run config

std::string data_root() {
    const char* env = std::getenv("REVGN_DATA_DIR");
    return env ? env : "data";
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

std::pair<data::Dataset, data::Dataset> load_dataset(const RunConfig& cfg) {
    if (cfg.dataset == "mnist") {
        std::string dir = cfg.dataset_path.empty() ? data_root() + "/mnist" : cfg.dataset_path;
        return data::load_mnist(dir);
    }
    if (cfg.dataset == "cifar10") {
        std::string dir = cfg.dataset_path.empty() ? data_root() + "/cifar10" : cfg.dataset_path;
        return data::load_cifar10(dir);
    }
    if (cfg.dataset == "uci") {
        if (cfg.dataset_path.empty())
            throw std::runtime_error("dataset.path required for uci datasets");
        return data::load_uci_csv(cfg.dataset_path, cfg.uci_targets);
    }
    if (cfg.dataset == "synthetic")
        return data::synthetic_regression(cfg.synthetic_d, cfg.synthetic_n, cfg.synthetic_seed,
                                          cfg.synthetic_d_y, cfg.synthetic_noise);
    throw std::runtime_error("unknown dataset: " + cfg.dataset);
}

LossKind resolve_loss(const RunConfig& cfg, const data::Dataset& train) {
    if (cfg.loss == "square") return LossKind::SquareLoss;
    if (cfg.loss == "cross_entropy") return LossKind::CrossEntropy;
    if (cfg.loss != "auto") throw std::runtime_error("unknown loss: " + cfg.loss);
    return train.targets.kind == TargetBatch::Kind::Labels ? LossKind::CrossEntropy
                                                           : LossKind::SquareLoss;
}

struct EvalResult {
    double loss = 0.0;
    std::optional<double> acc;
};

EvalResult evaluate(const RevMlp& model, const data::Dataset& ds, LossKind kind) {
    Mat lg = logits(forward(model, ds.x).first, model.d_y());
    EvalResult r;
    r.loss = loss_value(kind, lg, ds.targets);
    if (ds.targets.kind == TargetBatch::Kind::Labels) r.acc = accuracy(lg, ds.targets);
    return r;
}

struct MetricsWriter {
    std::ofstream out;

    explicit MetricsWriter(const std::string& path) {
        bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
        out.open(path, std::ios::app);
        if (!out) throw std::runtime_error("cannot open metrics csv " + path);
        if (fresh) out << kMetricsHeader << "\n";
    }

    void row(const std::string& run_id, std::uint32_t seed, std::size_t epoch,
             std::size_t step, const std::string& train_loss, const std::string& test_loss,
             const std::string& train_acc, const std::string& test_acc,
             const std::string& change_pct, const std::string& pinv_ranks,
             const std::string& ntk_sim, const std::string& ntk_rate, const std::string& cka,
             const std::string& wcos, long long wall_ms) {
        out << "v1," << run_id << "," << seed << "," << epoch << "," << step << ","
            << train_loss << "," << test_loss << "," << train_acc << "," << test_acc << ","
            << change_pct << "," << pinv_ranks << "," << ntk_sim << "," << ntk_rate << ","
            << cka << "," << wcos << "," << wall_ms << "\n";
        out.flush();
    }
};

struct Optimizers {
    GnConfig gn;
    SgdConfig sgd;
    AdamConfig adam;
    OptState state;
    std::string active;

    void activate(const std::string& kind, const RevMlp& model) {
        if (kind != "gn" && kind != "sgd" && kind != "adam")
            throw std::runtime_error("unknown optimizer: " + kind);
        if (kind != active) state = OptState::for_model(model);  // reset at switch
        active = kind;
    }
};

struct StepOutcome {
    double loss_before = 0.0;
    double loss_after = 0.0;
    std::string ranks;  // gn only
};

StepOutcome run_step(RevMlp& model, Optimizers& opt, const Mat& x, const TargetBatch& y,
                     LossKind kind) {
    StepOutcome o;
    if (opt.active == "gn") {
        GnReport rep = gn_step(model, x, y, kind, opt.gn);
        o.loss_before = rep.loss_before;
        std::string ranks;
        for (std::size_t b = 0; b < rep.blocks.size(); ++b) {
            if (b) ranks += ";";
            ranks += std::to_string(rep.blocks[b].rank1) + ":" +
                     std::to_string(rep.blocks[b].rank2);
        }
        o.ranks = ranks;
    } else {
        auto [out, cache] = forward(model, x);
        Mat lg = logits(out, model.d_y());
        o.loss_before = loss_value(kind, lg, y);
        Mat eps = functional_gradient(kind, lg, y, model.d(), model.d_y());
        if (opt.active == "sgd")
            sgd_step(model, cache, eps, opt.sgd);
        else
            adam_step(model, cache, eps, opt.adam, opt.state);
    }
    o.loss_after = loss_value(kind, logits(forward(model, x).first, model.d_y()), y);
    if (!std::isfinite(o.loss_after))
        throw std::runtime_error("training diverged: non-finite loss after update");
    return o;
}

std::string join_doubles(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ";";
        s += fmt(v[i]);
    }
    return s;
}

void run_seed(const RunConfig& cfg, std::uint32_t seed, const data::Dataset& train,
              const data::Dataset& test, LossKind kind, const fs::path& run_dir,
              MetricsWriter& metrics, std::ostream& log) {
    std::size_t d = train.d();
    std::size_t d_y = cfg.d_y ? cfg.d_y : train.d_y;
    InitScheme scheme = cfg.init == "xavier" ? InitScheme::xavier()
                                             : InitScheme::gaussian(cfg.init_sigma);
    RevMlp model = cfg.no_bottleneck
                       ? RevMlp::init_no_bottleneck(d, cfg.blocks, d_y, seed, scheme)
                       : RevMlp::init(d, cfg.d_prime, cfg.blocks, d_y, seed, scheme);
    RevMlp model0 = model;

    bool uses_gn = cfg.schedule.empty() ? cfg.optimizer == "gn" : [&] {
        for (const auto& p : cfg.schedule)
            if (p.optimizer == "gn") return true;
        return false;
    }();
    std::size_t batch_n = cfg.regime == "minibatch" ? cfg.batch : train.count();
    if (uses_gn && batch_n > model.d_prime()) {
        if (!cfg.no_bottleneck)
            throw std::runtime_error("config: batch " + std::to_string(batch_n) +
                                     " exceeds d' = " + std::to_string(model.d_prime()) +
                                     " (required for the GN update)");
        log << "warning: batch exceeds d'; proceeding because the bottlenecks are removed\n";
    }

    Optimizers opt{cfg.gn, cfg.sgd, cfg.adam, OptState::for_model(model), ""};
    std::vector<SchedulePoint> schedule = cfg.schedule;
    if (schedule.empty()) schedule.push_back({0, cfg.optimizer});

    // analysis baseline state
    std::optional<analysis::ProbeSet> probe;
    std::optional<analysis::NtkMatrix> theta0, theta_prev;
    std::vector<Mat> reps0;
    if (cfg.ntk || cfg.cka) {
        std::size_t m = std::min(cfg.probe, train.count());
        probe = analysis::ProbeSet::from_samples(
            data::subset(train, m, cfg.probe_seed).x, d_y, cfg.probe_seed);
        analysis::save_probe(*probe,
                             (run_dir / ("probe_" + std::to_string(cfg.probe_seed) + ".rgnp"))
                                 .string());
        if (cfg.ntk) {
            theta0 = analysis::ntk(model0, *probe);
            theta_prev = theta0;
        }
        if (cfg.cka)
            for (std::size_t b = 0; b < model0.block_count(); ++b)
                reps0.push_back(analysis::block_representations(model0, *probe, b));
    }

    data::BatchPlan plan;
    std::size_t steps_per_epoch = 1;
    if (cfg.regime == "minibatch") {
        plan = data::make_batch_plan(train, cfg.batch, mix_seed(0xba7cULL, seed));
        steps_per_epoch = train.count() / cfg.batch;
        if (steps_per_epoch == 0)
            throw std::runtime_error("config: batch larger than the training set");
    }

    auto emit_row = [&](std::size_t epoch, std::size_t step, const std::string& change_pct,
                        const std::string& ranks, long long wall_ms) {
        EvalResult tr = evaluate(model, train, kind);
        EvalResult te = evaluate(model, test, kind);
        std::string ntk_sim, ntk_rate, cka_s, wcos;
        if (probe) {
            if (cfg.ntk) {
                analysis::NtkMatrix theta = analysis::ntk(model, *probe);
                ntk_sim = fmt(analysis::ntk_similarity(theta, *theta0));
                ntk_rate = epoch == 0 ? "0" : fmt(analysis::ntk_rate_of_change(theta, *theta_prev));
                theta_prev = std::move(theta);
            }
            if (cfg.cka) {
                std::vector<double> ckas;
                for (std::size_t b = 0; b < model.block_count(); ++b)
                    ckas.push_back(analysis::linear_cka(
                        analysis::block_representations(model, *probe, b), reps0[b]));
                cka_s = join_doubles(ckas);
            }
        }
        wcos = join_doubles(analysis::weight_cosine(model, model0));
        metrics.row(cfg.run_id, seed, epoch, step, fmt(tr.loss), fmt(te.loss),
                    tr.acc ? fmt(*tr.acc) : "", te.acc ? fmt(*te.acc) : "", change_pct, ranks,
                    ntk_sim, ntk_rate, cka_s, wcos, wall_ms);
    };

    auto ckpt_path = [&](std::size_t epoch) {
        char name[64];
        std::snprintf(name, sizeof(name), "ckpt_s%u_e%04zu.rgn1", seed, epoch);
        return (run_dir / name).string();
    };

    std::string chash = config_hash(cfg);
    save_checkpoint(model, ckpt_path(0), chash);
    if (cfg.metric_cadence > 0) emit_row(0, 0, "", "", 0);

    std::size_t global_step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        opt.activate(switch_schedule(epoch, schedule), model);
        auto t0 = std::chrono::steady_clock::now();
        double change_sum = 0.0;
        std::string last_ranks;
        for (std::size_t s = 0; s < steps_per_epoch; ++s) {
            Mat x;
            TargetBatch yb;
            if (cfg.regime == "minibatch") {
                auto batch = data::next_batch(train, plan);
                x = std::move(batch.first);
                yb = std::move(batch.second);
                if (cfg.augment && cfg.dataset == "cifar10")
                    x = data::augment_cifar(x, mix_seed(seed, global_step));
            } else {
                x = train.x;
                yb = train.targets;
            }
            StepOutcome out = run_step(model, opt, x, yb, kind);
            change_sum += analysis::minibatch_loss_change(out.loss_before, out.loss_after);
            last_ranks = out.ranks;
            ++global_step;
        }
        auto wall = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
        bool metric_now = cfg.metric_cadence > 0 && ((epoch + 1) % cfg.metric_cadence == 0 ||
                                                     epoch + 1 == cfg.epochs);
        if (metric_now)
            emit_row(epoch + 1, global_step,
                     fmt(change_sum / static_cast<double>(steps_per_epoch)), last_ranks, wall);
        if (cfg.checkpoint_cadence > 0 && ((epoch + 1) % cfg.checkpoint_cadence == 0 ||
                                           epoch + 1 == cfg.epochs))
            save_checkpoint(model, ckpt_path(epoch + 1), chash);
    }
}

}  // namespace

int train(const std::string& config_path, std::ostream& log) {
    RunConfig cfg;
    try {
        cfg = parse_config_file(config_path);
    } catch (const std::exception& e) {
        log << "config error: " << e.what() << "\n";
        return 2;
    }

    try {
        fs::path run_dir = fs::path(cfg.output_dir) / cfg.run_id;
        fs::create_directories(run_dir);

        auto [train_full, test] = load_dataset(cfg);
        data::Dataset train_ds = cfg.subset > 0 && cfg.subset < train_full.count()
                                     ? data::subset(train_full, cfg.subset, kSubsetSeed)
                                     : std::move(train_full);
        LossKind kind = resolve_loss(cfg, train_ds);

        nlohmann::json manifest;
        manifest["run_id"] = cfg.run_id;
        manifest["git"] = REVGN_GIT_DESCRIBE;
        manifest["schema"] = "v1";
        manifest["config_hash"] = config_hash(cfg);
        manifest["config"] = serialize_config(cfg);
        manifest["dataset_train_count"] = train_ds.count();
        manifest["dataset_test_count"] = test.count();

        MetricsWriter metrics((run_dir / "metrics.csv").string());
        nlohmann::json seed_status = nlohmann::json::array();
        bool any_failed = false;
        for (std::uint32_t seed : cfg.seeds) {
            nlohmann::json st;
            st["seed"] = seed;
            try {
                run_seed(cfg, seed, train_ds, test, kind, run_dir, metrics, log);
                st["status"] = "ok";
                log << "seed " << seed << ": ok\n";
            } catch (const std::exception& e) {
                st["status"] = "failed";
                st["error"] = e.what();
                any_failed = true;
                log << "seed " << seed << ": FAILED: " << e.what() << "\n";
            }
            seed_status.push_back(st);
        }
        manifest["seeds"] = seed_status;
        std::ofstream mf(run_dir / "manifest.json");
        mf << manifest.dump(2) << "\n";
        return any_failed ? 1 : 0;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace revgn::cli
