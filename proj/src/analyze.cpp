#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "revgn/analysis.hpp"
#include "revgn/cli.hpp"

namespace revgn::cli {
namespace {

namespace fs = std::filesystem;

bool wildcard_match(const std::string& pattern, const std::string& text) {
    // '*' only; enough for checkpoint globs
    std::size_t p = 0, t = 0, star = std::string::npos, mark = 0;
    while (t < text.size()) {
        if (p < pattern.size() && (pattern[p] == text[t])) {
            ++p;
            ++t;
        } else if (p < pattern.size() && pattern[p] == '*') {
            star = p++;
            mark = t;
        } else if (star != std::string::npos) {
            p = star + 1;
            t = ++mark;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') ++p;
    return p == pattern.size();
}

std::vector<std::string> expand_glob(const std::string& glob) {
    fs::path pattern(glob);
    fs::path dir = pattern.parent_path();
    if (dir.empty()) dir = ".";
    std::string name = pattern.filename().string();
    std::vector<std::string> out;
    if (!fs::is_directory(dir)) return out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string fn = entry.path().filename().string();
        if (wildcard_match(name, fn)) out.push_back(entry.path().string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

std::string join(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ";";
        s += fmt(v[i]);
    }
    return s;
}

// epoch from "ckpt_s<seed>_e<NNNN>.rgn1"; -1 when the name does not match
long parse_epoch(const std::string& path) {
    std::string fn = fs::path(path).filename().string();
    std::size_t e = fn.rfind("_e");
    if (e == std::string::npos) return -1;
    std::size_t dot = fn.find('.', e);
    if (dot == std::string::npos) return -1;
    try {
        return std::stol(fn.substr(e + 2, dot - e - 2));
    } catch (...) {
        return -1;
    }
}

}  // namespace

int analyze(const std::string& checkpoint_glob, std::uint64_t probe_seed,
            const std::string& against, const std::string& out_csv, std::ostream& log) {
    try {
        std::vector<std::string> paths = expand_glob(checkpoint_glob);
        // the binary payload, not the sidecar metadata
        std::erase_if(paths, [](const std::string& p) { return p.ends_with(".json"); });
        if (paths.empty()) {
            log << "analyze error: no checkpoints match " << checkpoint_glob << "\n";
            return 2;
        }

        RevMlp baseline = load_checkpoint(against.empty() ? paths.front() : against);

        analysis::ProbeSet probe = [&] {
            fs::path probe_file = fs::path(paths.front()).parent_path() /
                                  ("probe_" + std::to_string(probe_seed) + ".rgnp");
            if (fs::exists(probe_file)) return analysis::load_probe(probe_file.string());
            return analysis::ProbeSet::gaussian(baseline.d(), 100, baseline.d_y(), probe_seed);
        }();

        analysis::NtkMatrix theta0 = analysis::ntk(baseline, probe);
        std::vector<Mat> reps0;
        for (std::size_t b = 0; b < baseline.block_count(); ++b)
            reps0.push_back(analysis::block_representations(baseline, probe, b));

        bool fresh = !fs::exists(out_csv) || fs::file_size(out_csv) == 0;
        std::ofstream out(out_csv, std::ios::app);
        if (!out) throw std::runtime_error("cannot open " + out_csv);
        if (fresh) out << kMetricsHeader << "\n";

        for (const std::string& path : paths) {
            RevMlp model = load_checkpoint(path);
            if (model.d() != baseline.d() || model.d_prime() != baseline.d_prime() ||
                model.block_count() != baseline.block_count() ||
                model.d_y() != baseline.d_y())
                throw std::runtime_error("architecture mismatch at " + path);

            analysis::NtkMatrix theta = analysis::ntk(model, probe);
            std::vector<double> ckas;
            for (std::size_t b = 0; b < model.block_count(); ++b)
                ckas.push_back(analysis::linear_cka(
                    analysis::block_representations(model, probe, b), reps0[b]));
            std::vector<double> wcos = analysis::weight_cosine(model, baseline);

            long epoch = parse_epoch(path);
            out << "v1,analyze," << model.seed() << "," << (epoch < 0 ? 0 : epoch) << ","
                << model.step() << ",,,,,,," << fmt(analysis::ntk_similarity(theta, theta0))
                << ",," << join(ckas) << "," << join(wcos) << ",0\n";
            log << path << ": ntk_sim=" << fmt(analysis::ntk_similarity(theta, theta0))
                << " cka=" << join(ckas) << "\n";
        }
        return 0;
    } catch (const std::exception& e) {
        log << "analyze error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace revgn::cli
