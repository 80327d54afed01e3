// Parameter-update rules: the exact layer-wise Gauss-Newton step for
// reversible coupling networks, plus SGD and Adam baselines.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "revgn/linalg.hpp"
#include "revgn/losses.hpp"
#include "revgn/revnet.hpp"

namespace revgn {

struct GnConfig {
    double lr = 1.0;
    PinvPolicy pinv = PinvPolicy::truncate(0.01, 1e-5);
    double weight_decay = 0.0;  // decoupled, applied after the GN step
};

struct SgdConfig {
    double lr = 0.1;
    double weight_decay = 0.0;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_hat = 1e-8;
    double weight_decay = 0.0;  // decoupled
};

/// Adam moment accumulators, shaped like each trainable matrix.
struct OptState {
    std::uint64_t step = 0;
    std::vector<Mat> m_w1, v_w1, m_w2, v_w2;

    static OptState for_model(const RevMlp& model);
};

struct GnBlockStats {
    std::size_t rank1 = 0;
    std::size_t rank2 = 0;
    double delta1_norm = 0.0;
    double delta2_norm = 0.0;
};

struct GnReport {
    std::vector<GnBlockStats> blocks;
    double loss_before = 0.0;  // loss at the pre-update parameters
    double error_norm = 0.0;   // |eps| of the batch-sum functional gradient
    bool precondition_waived = false;
};

/// One exact Gauss-Newton step. All per-block deltas are computed from a
/// single pre-update forward pass, then applied together:
///   delta1 = g1 * pinv(s1)
///   delta2 = (g2 - w_jvp(delta1)) * pinv(s2)
///   w -= (lr / L) * delta
/// where g1/g2 are the inverse-map tangents of the batch-sum functional
/// gradient. The sum (not per-sample mean) error is pulled back so one step
/// at lr=1 cancels the linearized error regardless of batch size.
/// Requires n <= d' so the post-activation matrices can have linearly
/// independent columns; models without bottlenecks waive the check (the
/// report flags it). Throws if any pseudoinverse truncates to rank zero.
GnReport gn_step(RevMlp& model, const Mat& x, const TargetBatch& y, LossKind kind,
                 const GnConfig& cfg);

/// theta <- theta - lr * (J^T eps + wd * theta).
void sgd_step(RevMlp& model, const ActivationCache& cache, const Mat& eps,
              const SgdConfig& cfg);

/// Bias-corrected Adam on vjp gradients, decoupled weight decay afterwards.
void adam_step(RevMlp& model, const ActivationCache& cache, const Mat& eps,
               const AdamConfig& cfg, OptState& state);

/// Piecewise-constant optimizer selection: entries are (epoch threshold,
/// optimizer id) pairs with strictly increasing thresholds starting at 0;
/// the active entry is the last one whose threshold is <= epoch. Optimizer
/// state is reinitialized by the caller at each switch.
struct SchedulePoint {
    std::size_t epoch = 0;
    std::string optimizer;
};
std::string switch_schedule(std::size_t epoch, std::span<const SchedulePoint> spec);

}  // namespace revgn
