#include "revgn/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "revgn/rng.hpp"

namespace revgn::analysis {

ProbeSet ProbeSet::gaussian(std::size_t d, std::size_t m, std::size_t d_y,
                            std::uint64_t seed) {
    Rng rng(mix_seed(0x9c0be5e7ULL, seed));
    Mat x(d, m);
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.gaussian();
    return {std::move(x), d_y, seed};
}

ProbeSet ProbeSet::from_samples(Mat x, std::size_t d_y, std::uint64_t seed) {
    return {std::move(x), d_y, seed};
}

void save_probe(const ProbeSet& probe, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_probe: cannot open " + path);
    f.write("RGNP", 4);
    std::uint64_t hdr[4] = {probe.x.rows(), probe.x.cols(), probe.d_y, probe.seed};
    f.write(reinterpret_cast<const char*>(hdr), sizeof(hdr));
    f.write(reinterpret_cast<const char*>(probe.x.data()),
            static_cast<std::streamsize>(probe.x.size() * sizeof(double)));
}

ProbeSet load_probe(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_probe: cannot open " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, "RGNP", 4) != 0)
        throw std::runtime_error("load_probe: bad magic in " + path);
    std::uint64_t hdr[4];
    f.read(reinterpret_cast<char*>(hdr), sizeof(hdr));
    if (!f) throw std::runtime_error("load_probe: truncated header");
    Mat x(hdr[0], hdr[1]);
    f.read(reinterpret_cast<char*>(x.data()),
           static_cast<std::streamsize>(x.size() * sizeof(double)));
    if (!f) throw std::runtime_error("load_probe: truncated payload");
    return {std::move(x), hdr[2], hdr[3]};
}

NtkMatrix ntk(const RevMlp& model, const ProbeSet& probe) {
    std::size_t m = probe.x.cols();
    std::size_t d_y = probe.d_y;
    if (m * d_y > 2048)
        throw std::invalid_argument("ntk: probe exceeds the desk-scale guard (m*d_y <= 2048)");
    if (d_y == 0 || d_y > model.d_y())
        throw std::invalid_argument("ntk: probe d_y out of range for the model");

    auto [y, cache] = forward(model, probe.x);
    (void)y;
    std::size_t L = model.block_count();
    std::size_t h = model.d_half();
    std::size_t rows = m * d_y;

    // Per-class cotangent sweeps. Backpropagation through coupling layers
    // never mixes batch columns, so one sweep with the class-c unit
    // cotangent in every column yields column s = cotangent of output
    // (s, c) for all samples at once.
    std::vector<CotangentTrace> traces(d_y);
    for (std::size_t c = 0; c < d_y; ++c) {
        Mat u(model.d(), m);
        for (std::size_t s = 0; s < m; ++s) u(c, s) = 1.0;
        traces[c] = cotangent_sweep(model, cache, u);
    }

    // The gradient of output (s,c) wrt w1_b is the outer product
    // c1 * s1(:,s)^T, so <g_a, g_b> factorizes into a cotangent Gram times
    // an activation Gram. Same for w2 with s2.
    Mat theta(rows, rows);
    auto accumulate = [&](const Mat& s_act, auto cot_of) {
        Mat gram_act = gemm(s_act, true, s_act, false);  // m x m
        Mat call(h, rows);
        for (std::size_t s = 0; s < m; ++s)
            for (std::size_t c = 0; c < d_y; ++c) {
                const Mat& cot = cot_of(c);
                for (std::size_t i = 0; i < h; ++i) call(i, s * d_y + c) = cot(i, s);
            }
        Mat gram_cot = gemm(call, true, call, false);  // rows x rows
        for (std::size_t a = 0; a < rows; ++a)
            for (std::size_t b = 0; b < rows; ++b)
                theta(a, b) += gram_cot(a, b) * gram_act(a / d_y, b / d_y);
    };
    for (std::size_t b = 0; b < L; ++b) {
        accumulate(cache.blocks[b].s1, [&](std::size_t c) -> const Mat& { return traces[c].c1[b]; });
        accumulate(cache.blocks[b].s2, [&](std::size_t c) -> const Mat& { return traces[c].c2[b]; });
    }

    // exact symmetry (gemm roundoff is not symmetric in general)
    for (std::size_t a = 0; a < rows; ++a)
        for (std::size_t b = a + 1; b < rows; ++b) {
            double v = 0.5 * (theta(a, b) + theta(b, a));
            theta(a, b) = v;
            theta(b, a) = v;
        }
    return {std::move(theta)};
}

double ntk_similarity(const NtkMatrix& theta_t, const NtkMatrix& theta_0) {
    return frobenius_cosine(theta_t.theta, theta_0.theta);
}

double ntk_rate_of_change(const NtkMatrix& theta_t, const NtkMatrix& theta_prev) {
    double denom = theta_prev.theta.frobenius_norm();
    if (denom == 0.0)
        throw std::invalid_argument("ntk_rate_of_change: zero previous kernel");
    return (theta_t.theta - theta_prev.theta).frobenius_norm() / denom;
}

namespace {

Mat center_rows(const Mat& rep) {
    Mat out = rep;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        double mean = 0.0;
        for (std::size_t j = 0; j < out.cols(); ++j) mean += out(i, j);
        mean /= static_cast<double>(out.cols());
        for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) -= mean;
    }
    return out;
}

}  // namespace

double linear_cka(const Mat& x_rep, const Mat& y_rep) {
    if (x_rep.cols() != y_rep.cols())
        throw std::invalid_argument("linear_cka: sample counts differ");
    if (x_rep.cols() < 2) throw std::invalid_argument("linear_cka: need at least 2 samples");
    Mat xc = center_rows(x_rep);
    Mat yc = center_rows(y_rep);
    double x_gram = gemm(xc, false, xc, true).frobenius_norm();
    double y_gram = gemm(yc, false, yc, true).frobenius_norm();
    if (x_gram == 0.0 || y_gram == 0.0)
        throw std::invalid_argument("linear_cka: zero-variance representation");
    Mat cross = gemm(yc, false, xc, true);
    double hsic = cross.frobenius_norm();
    double cka = (hsic * hsic) / (x_gram * y_gram);
    return std::clamp(cka, 0.0, 1.0);
}

Mat block_representations(const RevMlp& model, const ProbeSet& probe, std::size_t block) {
    if (block >= model.block_count())
        throw std::invalid_argument("block_representations: block index out of range");
    auto [y, cache] = forward(model, probe.x);
    (void)y;
    // block output = (X1_b ; X2_b); x1_out is cached, x2 after the block is
    // the next block's input (or the network output for the last block)
    const Mat& x1 = cache.blocks[block].x1_out;
    if (block + 1 < model.block_count())
        return vconcat(x1, cache.blocks[block + 1].x2_in);
    return vconcat(x1, cache.xl.row_block(model.d_half(), model.d()));
}

std::vector<double> weight_cosine(const RevMlp& model_t, const RevMlp& model_0) {
    if (model_t.block_count() != model_0.block_count() ||
        model_t.d() != model_0.d() || model_t.d_prime() != model_0.d_prime())
        throw std::invalid_argument("weight_cosine: architecture mismatch");
    std::vector<double> out;
    for (std::size_t b = 0; b < model_t.block_count(); ++b) {
        out.push_back(frobenius_cosine(model_t.block(b).w1, model_0.block(b).w1));
        out.push_back(frobenius_cosine(model_t.block(b).w2, model_0.block(b).w2));
    }
    return out;
}

double minibatch_loss_change(double loss_before, double loss_after) {
    if (loss_before <= 0.0)
        throw std::invalid_argument("minibatch_loss_change: loss_before must be positive");
    return 100.0 * (loss_after - loss_before) / loss_before;
}

}  // namespace revgn::analysis
