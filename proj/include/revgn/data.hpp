// Dataset ingestion (MNIST IDX, CIFAR-10 binary, numeric CSV, synthetic
// teacher data), preprocessing, augmentation and seeded epoch batching.
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "revgn/linalg.hpp"
#include "revgn/losses.hpp"
#include "revgn/revnet.hpp"

namespace revgn::data {

struct Dataset {
    Mat x;  // d x N, one column per sample
    TargetBatch targets;
    std::string name;
    std::size_t d_y = 0;
    std::string split;  // "train" or "test"
    bool padded = false;  // odd source dimension padded with one zero row
    std::string normalization;

    std::size_t d() const { return x.rows(); }
    std::size_t count() const { return x.cols(); }
};

/// Standard IDX pair (gzip accepted): train-images-idx3-ubyte[.gz] etc.
/// Pixels scaled to [0,1]; d = 784, d_y = 10.
std::pair<Dataset, Dataset> load_mnist(const std::string& dir);

/// data_batch_1..5.bin + test_batch.bin. Pixels scaled to [0,1] then
/// standardized per channel with train statistics; d = 3072, d_y = 10.
std::pair<Dataset, Dataset> load_cifar10(const std::string& dir);

/// Numeric CSV with a header row. `target_cols` pick the regression
/// targets; everything else is a feature. Features and targets are
/// z-scored with train statistics; 90/10 split by seeded shuffle; the
/// feature dimension is zero-padded to even if needed.
std::pair<Dataset, Dataset> load_uci_csv(const std::string& path,
                                         const std::vector<std::size_t>& target_cols,
                                         std::uint64_t split_seed = 13);

/// x ~ N(0, I), targets from a frozen random teacher network plus
/// Gaussian noise. The teacher is reproducible via synthetic_teacher.
std::pair<Dataset, Dataset> synthetic_regression(std::size_t d, std::size_t n,
                                                 std::uint64_t teacher_seed,
                                                 std::size_t d_y = 2,
                                                 double noise_sigma = 0.01);
RevMlp synthetic_teacher(std::size_t d, std::uint64_t teacher_seed, std::size_t d_y);

/// Seeded sample of k items without replacement.
Dataset subset(const Dataset& ds, std::size_t k, std::uint64_t seed);

/// Pad-4 random 32x32 crop per image, re-flattened. CIFAR layout
/// (3 channel planes of 32x32). Deterministic in (seed, column index).
Mat augment_cifar(const Mat& x_batch, std::uint64_t seed);

/// Epoch batching: a seeded permutation consumed batch by batch, the final
/// short batch dropped, reshuffled with a fresh permutation each epoch.
struct BatchPlan {
    std::size_t batch_size = 0;
    std::uint64_t seed = 0;
    std::size_t epoch = 0;
    std::vector<std::size_t> permutation;
    std::size_t cursor = 0;
};

BatchPlan make_batch_plan(const Dataset& ds, std::size_t n, std::uint64_t seed);
std::pair<Mat, TargetBatch> next_batch(const Dataset& ds, BatchPlan& plan);

}  // namespace revgn::data
