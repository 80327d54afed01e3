#include "revgn/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "revgn/rng.hpp"

namespace revgn::data {
namespace {

std::vector<unsigned char> read_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::streamsize size = f.tellg();
    f.seekg(0);
    std::vector<unsigned char> bytes(static_cast<std::size_t>(size));
    f.read(reinterpret_cast<char*>(bytes.data()), size);
    if (!f) throw std::runtime_error("read failed for " + path);
    return bytes;
}

std::vector<unsigned char> gunzip(const std::vector<unsigned char>& in) {
    z_stream zs{};
    if (inflateInit2(&zs, 15 + 16) != Z_OK)
        throw std::runtime_error("gunzip: inflateInit failed");
    std::vector<unsigned char> out;
    out.reserve(in.size() * 4);
    unsigned char buf[1 << 16];
    zs.next_in = const_cast<unsigned char*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());
    int ret = Z_OK;
    while (ret != Z_STREAM_END) {
        zs.next_out = buf;
        zs.avail_out = sizeof(buf);
        ret = inflate(&zs, Z_NO_FLUSH);
        if (ret != Z_OK && ret != Z_STREAM_END) {
            inflateEnd(&zs);
            throw std::runtime_error("gunzip: corrupt stream");
        }
        out.insert(out.end(), buf, buf + (sizeof(buf) - zs.avail_out));
    }
    inflateEnd(&zs);
    return out;
}

std::vector<unsigned char> read_maybe_gzip(const std::string& base_path) {
    namespace fs = std::filesystem;
    std::string path = base_path;
    if (!fs::exists(path) && fs::exists(path + ".gz")) path += ".gz";
    std::vector<unsigned char> bytes = read_bytes(path);
    if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b) return gunzip(bytes);
    return bytes;
}

std::uint32_t be32(const unsigned char* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

struct IdxImages {
    std::size_t count = 0, rows = 0, cols = 0;
    std::vector<unsigned char> pixels;
};

IdxImages parse_idx_images(const std::vector<unsigned char>& b, const std::string& what) {
    if (b.size() < 16) throw std::runtime_error(what + ": truncated IDX header");
    if (be32(b.data()) != 0x00000803)
        throw std::runtime_error(what + ": bad IDX image magic");
    IdxImages img;
    img.count = be32(b.data() + 4);
    img.rows = be32(b.data() + 8);
    img.cols = be32(b.data() + 12);
    std::size_t need = 16 + img.count * img.rows * img.cols;
    if (b.size() < need) throw std::runtime_error(what + ": truncated IDX image payload");
    img.pixels.assign(b.begin() + 16, b.begin() + static_cast<std::ptrdiff_t>(need));
    return img;
}

std::vector<unsigned char> parse_idx_labels(const std::vector<unsigned char>& b,
                                            const std::string& what) {
    if (b.size() < 8) throw std::runtime_error(what + ": truncated IDX header");
    if (be32(b.data()) != 0x00000801)
        throw std::runtime_error(what + ": bad IDX label magic");
    std::size_t count = be32(b.data() + 4);
    if (b.size() < 8 + count) throw std::runtime_error(what + ": truncated IDX label payload");
    return {b.begin() + 8, b.begin() + 8 + static_cast<std::ptrdiff_t>(count)};
}

Dataset make_mnist_split(const IdxImages& img, const std::vector<unsigned char>& labels,
                         const std::string& split) {
    if (img.count != labels.size())
        throw std::runtime_error("mnist: image/label count mismatch in " + split + " split");
    std::size_t d = img.rows * img.cols;
    Dataset ds;
    ds.x = Mat(d, img.count);
    std::vector<int> y(img.count);
    for (std::size_t s = 0; s < img.count; ++s) {
        for (std::size_t p = 0; p < d; ++p)
            ds.x(p, s) = static_cast<double>(img.pixels[s * d + p]) / 255.0;
        y[s] = labels[s];
    }
    ds.targets = TargetBatch::classification(std::move(y));
    ds.name = "mnist";
    ds.d_y = 10;
    ds.split = split;
    ds.normalization = "scale_255";
    return ds;
}

}  // namespace

std::pair<Dataset, Dataset> load_mnist(const std::string& dir) {
    auto train_img = parse_idx_images(read_maybe_gzip(dir + "/train-images-idx3-ubyte"),
                                      "mnist train images");
    auto train_lbl = parse_idx_labels(read_maybe_gzip(dir + "/train-labels-idx1-ubyte"),
                                      "mnist train labels");
    auto test_img = parse_idx_images(read_maybe_gzip(dir + "/t10k-images-idx3-ubyte"),
                                     "mnist test images");
    auto test_lbl = parse_idx_labels(read_maybe_gzip(dir + "/t10k-labels-idx1-ubyte"),
                                     "mnist test labels");
    return {make_mnist_split(train_img, train_lbl, "train"),
            make_mnist_split(test_img, test_lbl, "test")};
}

namespace {

constexpr std::size_t kCifarRecord = 3073;
constexpr std::size_t kCifarPixels = 3072;

void append_cifar_batch(const std::string& path, std::vector<unsigned char>& pixels,
                        std::vector<int>& labels) {
    std::vector<unsigned char> b = read_bytes(path);
    if (b.size() % kCifarRecord != 0)
        throw std::runtime_error("cifar10: wrong record size in " + path);
    std::size_t records = b.size() / kCifarRecord;
    if (records == 0) throw std::runtime_error("cifar10: empty batch " + path);
    for (std::size_t r = 0; r < records; ++r) {
        const unsigned char* rec = b.data() + r * kCifarRecord;
        labels.push_back(rec[0]);
        pixels.insert(pixels.end(), rec + 1, rec + kCifarRecord);
    }
}

}  // namespace

std::pair<Dataset, Dataset> load_cifar10(const std::string& dir) {
    std::vector<unsigned char> train_pix, test_pix;
    std::vector<int> train_lbl, test_lbl;
    for (int i = 1; i <= 5; ++i)
        append_cifar_batch(dir + "/data_batch_" + std::to_string(i) + ".bin", train_pix,
                           train_lbl);
    append_cifar_batch(dir + "/test_batch.bin", test_pix, test_lbl);

    auto fill = [](const std::vector<unsigned char>& pix, std::vector<int> lbl,
                   const std::string& split) {
        Dataset ds;
        std::size_t n = lbl.size();
        ds.x = Mat(kCifarPixels, n);
        for (std::size_t s = 0; s < n; ++s)
            for (std::size_t p = 0; p < kCifarPixels; ++p)
                ds.x(p, s) = static_cast<double>(pix[s * kCifarPixels + p]) / 255.0;
        ds.targets = TargetBatch::classification(std::move(lbl));
        ds.name = "cifar10";
        ds.d_y = 10;
        ds.split = split;
        return ds;
    };
    Dataset train = fill(train_pix, train_lbl, "train");
    Dataset test = fill(test_pix, test_lbl, "test");

    // per-channel standardization with train statistics
    constexpr std::size_t plane = 1024;
    for (std::size_t ch = 0; ch < 3; ++ch) {
        double mean = 0.0;
        std::size_t total = plane * train.count();
        for (std::size_t p = 0; p < plane; ++p)
            for (std::size_t s = 0; s < train.count(); ++s) mean += train.x(ch * plane + p, s);
        mean /= static_cast<double>(total);
        double var = 0.0;
        for (std::size_t p = 0; p < plane; ++p)
            for (std::size_t s = 0; s < train.count(); ++s) {
                double d = train.x(ch * plane + p, s) - mean;
                var += d * d;
            }
        double sd = std::sqrt(var / static_cast<double>(total));
        if (sd <= 0.0) throw std::runtime_error("cifar10: zero channel variance");
        for (Dataset* ds : {&train, &test})
            for (std::size_t p = 0; p < plane; ++p)
                for (std::size_t s = 0; s < ds->count(); ++s)
                    ds->x(ch * plane + p, s) = (ds->x(ch * plane + p, s) - mean) / sd;
    }
    train.normalization = "per_channel_standardized";
    test.normalization = "per_channel_standardized";
    return {std::move(train), std::move(test)};
}

std::pair<Dataset, Dataset> load_uci_csv(const std::string& path,
                                         const std::vector<std::size_t>& target_cols,
                                         std::uint64_t split_seed) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("uci: empty file " + path);
    std::size_t columns = std::count(line.begin(), line.end(), ',') + 1;
    for (std::size_t t : target_cols)
        if (t >= columns) throw std::runtime_error("uci: target column out of range");

    std::vector<std::vector<double>> rows;
    std::size_t line_no = 1;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<double> row;
        row.reserve(columns);
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            std::size_t pos = 0;
            double v = 0.0;
            try {
                v = std::stod(cell, &pos);
            } catch (const std::exception&) {
                throw std::runtime_error("uci: non-numeric cell at line " +
                                         std::to_string(line_no));
            }
            if (pos != cell.size() && cell.find_first_not_of(" \t\r", pos) != std::string::npos)
                throw std::runtime_error("uci: non-numeric cell at line " +
                                         std::to_string(line_no));
            row.push_back(v);
        }
        if (row.size() != columns)
            throw std::runtime_error("uci: ragged row at line " + std::to_string(line_no));
        rows.push_back(std::move(row));
    }
    std::size_t n = rows.size();
    if (n < 2) throw std::runtime_error("uci: need at least two data rows");

    std::vector<bool> is_target(columns, false);
    for (std::size_t t : target_cols) is_target[t] = true;
    std::size_t d_y = target_cols.size();
    std::size_t d_src = columns - d_y;
    if (d_y == 0) throw std::runtime_error("uci: no target columns given");
    bool pad = d_src % 2 != 0;
    std::size_t d = d_src + (pad ? 1 : 0);

    // seeded shuffle, first 90% train
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(mix_seed(0x0c17ULL, split_seed));
    for (std::size_t i = n; i-- > 1;) std::swap(order[i], order[rng.below(i + 1)]);
    std::size_t n_train = (n * 9 + 9) / 10;  // ceil(0.9 n)
    if (n_train == n) n_train = n - 1;

    auto build = [&](std::size_t lo, std::size_t hi, const std::string& split) {
        Dataset ds;
        std::size_t cnt = hi - lo;
        ds.x = Mat(d, cnt);
        Mat targets(d_y, cnt);
        for (std::size_t s = 0; s < cnt; ++s) {
            const auto& row = rows[order[lo + s]];
            std::size_t fi = 0, ti = 0;
            for (std::size_t c = 0; c < columns; ++c) {
                if (is_target[c])
                    targets(ti++, s) = row[c];
                else
                    ds.x(fi++, s) = row[c];
            }
        }
        ds.targets = TargetBatch::regression(std::move(targets));
        ds.name = "uci";
        ds.d_y = d_y;
        ds.split = split;
        ds.padded = pad;
        ds.normalization = "zscore_train";
        return ds;
    };
    Dataset train = build(0, n_train, "train");
    Dataset test = build(n_train, n, "test");

    auto zscore = [&](auto get_train, auto get_test, std::size_t dims, std::size_t skip_pad) {
        for (std::size_t i = 0; i < dims - skip_pad; ++i) {
            double mean = 0.0;
            for (std::size_t s = 0; s < train.count(); ++s) mean += get_train(i, s);
            mean /= static_cast<double>(train.count());
            double var = 0.0;
            for (std::size_t s = 0; s < train.count(); ++s) {
                double dv = get_train(i, s) - mean;
                var += dv * dv;
            }
            double sd = std::sqrt(var / static_cast<double>(train.count()));
            if (sd <= 0.0) sd = 1.0;  // constant column stays centered
            for (std::size_t s = 0; s < train.count(); ++s)
                get_train(i, s) = (get_train(i, s) - mean) / sd;
            for (std::size_t s = 0; s < test.count(); ++s)
                get_test(i, s) = (get_test(i, s) - mean) / sd;
        }
    };
    zscore([&](std::size_t i, std::size_t s) -> double& { return train.x(i, s); },
           [&](std::size_t i, std::size_t s) -> double& { return test.x(i, s); }, d,
           pad ? 1 : 0);
    zscore([&](std::size_t i, std::size_t s) -> double& { return train.targets.values(i, s); },
           [&](std::size_t i, std::size_t s) -> double& { return test.targets.values(i, s); },
           d_y, 0);
    return {std::move(train), std::move(test)};
}

RevMlp synthetic_teacher(std::size_t d, std::uint64_t teacher_seed, std::size_t d_y) {
    double sigma = 1.0 / std::sqrt(static_cast<double>(d));
    return RevMlp::init(d, d, 2, d_y, static_cast<std::uint32_t>(teacher_seed),
                        InitScheme::gaussian(sigma));
}

std::pair<Dataset, Dataset> synthetic_regression(std::size_t d, std::size_t n,
                                                 std::uint64_t teacher_seed,
                                                 std::size_t d_y, double noise_sigma) {
    if (d == 0 || d % 2 != 0) throw std::invalid_argument("synthetic_regression: d must be even");
    RevMlp teacher = synthetic_teacher(d, teacher_seed, d_y);
    std::size_t n_test = std::max<std::size_t>(n / 5, 1);
    Rng rng(mix_seed(0x5e11ULL, teacher_seed));
    auto make = [&](std::size_t cnt, const std::string& split) {
        Mat x(d, cnt);
        for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.gaussian();
        Mat y = logits(forward(teacher, x).first, d_y);
        for (std::size_t i = 0; i < y.size(); ++i) y.data()[i] += noise_sigma * rng.gaussian();
        Dataset ds;
        ds.x = std::move(x);
        ds.targets = TargetBatch::regression(std::move(y));
        ds.name = "synthetic";
        ds.d_y = d_y;
        ds.split = split;
        ds.normalization = "none";
        return ds;
    };
    Dataset train = make(n, "train");
    Dataset test = make(n_test, "test");
    return {std::move(train), std::move(test)};
}

Dataset subset(const Dataset& ds, std::size_t k, std::uint64_t seed) {
    if (k > ds.count()) throw std::invalid_argument("subset: k exceeds dataset size");
    std::vector<std::size_t> order(ds.count());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(mix_seed(0x5b5ULL, seed));
    for (std::size_t i = order.size(); i-- > 1;) std::swap(order[i], order[rng.below(i + 1)]);
    Dataset out;
    out.x = Mat(ds.d(), k);
    for (std::size_t s = 0; s < k; ++s)
        for (std::size_t i = 0; i < ds.d(); ++i) out.x(i, s) = ds.x(i, order[s]);
    if (ds.targets.kind == TargetBatch::Kind::Labels) {
        std::vector<int> y(k);
        for (std::size_t s = 0; s < k; ++s) y[s] = ds.targets.labels[order[s]];
        out.targets = TargetBatch::classification(std::move(y));
    } else {
        Mat y(ds.targets.values.rows(), k);
        for (std::size_t s = 0; s < k; ++s)
            for (std::size_t i = 0; i < y.rows(); ++i) y(i, s) = ds.targets.values(i, order[s]);
        out.targets = TargetBatch::regression(std::move(y));
    }
    out.name = ds.name;
    out.d_y = ds.d_y;
    out.split = ds.split;
    out.padded = ds.padded;
    out.normalization = ds.normalization;
    return out;
}

Mat augment_cifar(const Mat& x_batch, std::uint64_t seed) {
    constexpr std::size_t side = 32, pad = 4;
    if (x_batch.rows() != kCifarPixels)
        throw std::invalid_argument("augment_cifar: batch is not CIFAR-shaped (3072 rows)");
    Mat out(x_batch.rows(), x_batch.cols());
    for (std::size_t s = 0; s < x_batch.cols(); ++s) {
        Rng rng(mix_seed(seed, s));
        std::size_t oy = rng.below(2 * pad + 1);
        std::size_t ox = rng.below(2 * pad + 1);
        for (std::size_t ch = 0; ch < 3; ++ch)
            for (std::size_t r = 0; r < side; ++r)
                for (std::size_t c = 0; c < side; ++c) {
                    // source coordinates in the zero-padded image
                    std::ptrdiff_t sr = static_cast<std::ptrdiff_t>(r + oy) - pad;
                    std::ptrdiff_t sc = static_cast<std::ptrdiff_t>(c + ox) - pad;
                    double v = 0.0;
                    if (sr >= 0 && sr < static_cast<std::ptrdiff_t>(side) && sc >= 0 &&
                        sc < static_cast<std::ptrdiff_t>(side))
                        v = x_batch(ch * 1024 + static_cast<std::size_t>(sr) * side +
                                        static_cast<std::size_t>(sc),
                                    s);
                    out(ch * 1024 + r * side + c, s) = v;
                }
    }
    return out;
}

BatchPlan make_batch_plan(const Dataset& ds, std::size_t n, std::uint64_t seed) {
    if (n == 0 || n > ds.count())
        throw std::invalid_argument("make_batch_plan: batch size out of range");
    BatchPlan plan;
    plan.batch_size = n;
    plan.seed = seed;
    plan.epoch = 0;
    plan.permutation.resize(ds.count());
    for (std::size_t i = 0; i < plan.permutation.size(); ++i) plan.permutation[i] = i;
    Rng rng(mix_seed(seed, 0));
    for (std::size_t i = plan.permutation.size(); i-- > 1;)
        std::swap(plan.permutation[i], plan.permutation[rng.below(i + 1)]);
    return plan;
}

std::pair<Mat, TargetBatch> next_batch(const Dataset& ds, BatchPlan& plan) {
    std::size_t n = plan.batch_size;
    if (n > ds.count()) throw std::invalid_argument("next_batch: batch exceeds dataset");
    if (plan.cursor + n > ds.count()) {
        // final short batch dropped; fresh permutation for the new epoch
        ++plan.epoch;
        plan.cursor = 0;
        Rng rng(mix_seed(plan.seed, plan.epoch));
        for (std::size_t i = 0; i < plan.permutation.size(); ++i) plan.permutation[i] = i;
        for (std::size_t i = plan.permutation.size(); i-- > 1;)
            std::swap(plan.permutation[i], plan.permutation[rng.below(i + 1)]);
    }
    Mat x(ds.d(), n);
    for (std::size_t s = 0; s < n; ++s) {
        std::size_t src = plan.permutation[plan.cursor + s];
        for (std::size_t i = 0; i < ds.d(); ++i) x(i, s) = ds.x(i, src);
    }
    TargetBatch y;
    if (ds.targets.kind == TargetBatch::Kind::Labels) {
        std::vector<int> lbl(n);
        for (std::size_t s = 0; s < n; ++s) lbl[s] = ds.targets.labels[plan.permutation[plan.cursor + s]];
        y = TargetBatch::classification(std::move(lbl));
    } else {
        Mat v(ds.targets.values.rows(), n);
        for (std::size_t s = 0; s < n; ++s)
            for (std::size_t i = 0; i < v.rows(); ++i)
                v(i, s) = ds.targets.values(i, plan.permutation[plan.cursor + s]);
        y = TargetBatch::regression(std::move(v));
    }
    plan.cursor += n;
    return {std::move(x), std::move(y)};
}

}  // namespace revgn::data
