#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "revgn/cli.hpp"
#include "svg.hpp"

namespace revgn::cli {
namespace {

struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t col(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw std::runtime_error("csv: missing column " + name);
    }
};

Csv read_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    Csv csv;
    std::string line;
    bool first = true;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (line.back() == ',') cells.push_back("");
        if (first) {
            csv.header = cells;
            first = false;
        } else {
            cells.resize(csv.header.size());
            csv.rows.push_back(cells);
        }
    }
    if (csv.header.empty()) throw std::runtime_error("csv: empty file " + path);
    return csv;
}

// per (run_id, epoch): values across seeds
using Grouped = std::map<std::string, std::map<double, std::vector<double>>>;

Grouped group_metric(const Csv& csv, std::size_t col, int sub_index = -1) {
    Grouped g;
    std::size_t run_col = csv.col("run_id");
    std::size_t epoch_col = csv.col("epoch");
    for (const auto& row : csv.rows) {
        std::string v = row[col];
        if (v.empty()) continue;
        if (sub_index >= 0) {
            std::stringstream ss(v);
            std::string part;
            int k = 0;
            v.clear();
            while (std::getline(ss, part, ';')) {
                if (k++ == sub_index) {
                    v = part;
                    break;
                }
            }
            if (v.empty()) continue;
        }
        double epoch = std::stod(row[epoch_col]);
        g[row[run_col]][epoch].push_back(std::stod(v));
    }
    return g;
}

std::vector<PlotSeries> to_series(const Grouped& g, const std::string& label_suffix) {
    std::vector<PlotSeries> out;
    for (const auto& [run_id, by_epoch] : g) {
        PlotSeries s;
        s.label = run_id + label_suffix;
        for (const auto& [epoch, values] : by_epoch) {
            double mean = 0.0, lo = values.front(), hi = values.front();
            for (double v : values) {
                mean += v;
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            mean /= static_cast<double>(values.size());
            s.mean.push_back({epoch, mean});
            s.lo.push_back({epoch, lo});
            s.hi.push_back({epoch, hi});
        }
        bool band = false;
        for (std::size_t i = 0; i < s.mean.size(); ++i)
            if (s.lo[i].y != s.hi[i].y) band = true;
        if (!band) {
            s.lo.clear();
            s.hi.clear();
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::size_t max_packed_count(const Csv& csv, std::size_t col) {
    std::size_t n = 0;
    for (const auto& row : csv.rows) {
        if (row[col].empty()) continue;
        n = std::max(n, static_cast<std::size_t>(
                            std::count(row[col].begin(), row[col].end(), ';') + 1));
    }
    return n;
}

}  // namespace

int plot(const std::string& csv_path, const std::string& out_dir, std::ostream& log) {
    try {
        Csv csv = read_csv(csv_path);
        if (csv.rows.empty()) {
            log << "plot error: no rows in " << csv_path << "\n";
            return 1;
        }
        std::filesystem::create_directories(out_dir);

        struct Simple {
            const char* column;
            const char* title;
            const char* y_label;
            bool log_y;
        };
        const Simple plots[] = {
            {"train_loss", "Training loss", "loss", true},
            {"test_loss", "Test loss", "loss", true},
            {"train_acc", "Training accuracy", "accuracy", false},
            {"test_acc", "Test accuracy", "accuracy", false},
            {"minibatch_loss_change_pct", "Per-mini-batch loss change", "percent", false},
            {"ntk_similarity", "Kernel similarity to initialization", "cosine", false},
            {"ntk_rate", "Kernel rate of change", "relative change", false},
        };
        std::size_t written = 0;
        for (const Simple& p : plots) {
            Grouped g = group_metric(csv, csv.col(p.column));
            if (g.empty()) continue;
            std::vector<PlotSeries> series = to_series(g, "");
            PlotSpec spec{p.title, "epoch", p.y_label, p.log_y};
            write_plot_svg(out_dir + "/" + p.column + ".svg", spec, series);
            ++written;
        }

        // package the per-block CKA curves into one figure
        std::size_t cka_col = csv.col("cka");
        std::size_t blocks = max_packed_count(csv, cka_col);
        if (blocks > 0) {
            std::vector<PlotSeries> series;
            for (std::size_t b = 0; b < blocks; ++b) {
                Grouped g = group_metric(csv, cka_col, static_cast<int>(b));
                auto part = to_series(g, " block " + std::to_string(b));
                series.insert(series.end(), part.begin(), part.end());
            }
            if (!series.empty()) {
                write_plot_svg(out_dir + "/cka.svg",
                               {"Representation similarity to initialization", "epoch", "CKA",
                                false},
                               series);
                ++written;
            }
        }

        if (written == 0) {
            log << "plot error: no plottable columns in " << csv_path << "\n";
            return 1;
        }
        log << "wrote " << written << " plots to " << out_dir << "\n";
        return 0;
    } catch (const std::exception& e) {
        log << "plot error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace revgn::cli
