// Generalization diagnostics: empirical NTK evolution, linear CKA of block
// representations, weight-space cosines, and per-mini-batch loss change.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "revgn/linalg.hpp"
#include "revgn/revnet.hpp"

namespace revgn::analysis {

/// Fixed probe inputs shared by every kernel/representation measurement in
/// a run (and across the optimizers being compared).
struct ProbeSet {
    Mat x;               // d x m
    std::size_t d_y = 0;
    std::uint64_t seed = 0;

    static ProbeSet gaussian(std::size_t d, std::size_t m, std::size_t d_y,
                             std::uint64_t seed);
    static ProbeSet from_samples(Mat x, std::size_t d_y, std::uint64_t seed);
};

void save_probe(const ProbeSet& probe, const std::string& path);
ProbeSet load_probe(const std::string& path);

/// Theta = J J^T over the trainable parameters, restricted to the logit
/// rows of the output. Row index = sample * d_y + class.
struct NtkMatrix {
    Mat theta;  // (m*d_y) x (m*d_y), symmetric PSD
};

NtkMatrix ntk(const RevMlp& model, const ProbeSet& probe);

/// Frobenius cosine between two kernels.
double ntk_similarity(const NtkMatrix& theta_t, const NtkMatrix& theta_0);

/// |theta_t - theta_prev|_F / |theta_prev|_F.
double ntk_rate_of_change(const NtkMatrix& theta_t, const NtkMatrix& theta_prev);

/// Linear CKA between two representations of the same m samples, computed
/// on the feature-space Gram matrices after column centering. In [0, 1].
double linear_cka(const Mat& x_rep, const Mat& y_rep);

/// Output of coupling block `block` (both halves) on the probe inputs.
Mat block_representations(const RevMlp& model, const ProbeSet& probe,
                          std::size_t block);

/// Cosine of each flattened trainable matrix against the reference model,
/// ordered block by block, w1 before w2.
std::vector<double> weight_cosine(const RevMlp& model_t, const RevMlp& model_0);

/// 100 * (after - before) / before. Requires before > 0.
double minibatch_loss_change(double loss_before, double loss_after);

}  // namespace revgn::analysis
