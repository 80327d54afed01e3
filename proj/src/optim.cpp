#include "revgn/optim.hpp"

#include <cmath>
#include <stdexcept>

#include "revgn/rng.hpp"

namespace revgn {

OptState OptState::for_model(const RevMlp& model) {
    OptState s;
    std::size_t L = model.block_count();
    std::size_t h = model.d_half();
    std::size_t dp = model.d_prime();
    s.m_w1.assign(L, Mat(h, dp));
    s.v_w1.assign(L, Mat(h, dp));
    s.m_w2.assign(L, Mat(h, dp));
    s.v_w2.assign(L, Mat(h, dp));
    return s;
}

GnReport gn_step(RevMlp& model, const Mat& x, const TargetBatch& y, LossKind kind,
                 const GnConfig& cfg) {
    if (cfg.lr <= 0.0) throw std::invalid_argument("gn_step: lr must be positive");
    std::size_t n = x.cols();
    GnReport report;
    if (n > model.d_prime()) {
        if (!model.no_bottleneck())
            throw std::invalid_argument(
                "gn_step: batch larger than the bottleneck width (n <= d' required "
                "for linearly independent activation columns)");
        report.precondition_waived = true;
    }

    auto [out, cache] = forward(model, x);
    Mat lg = logits(out, model.d_y());
    report.loss_before = loss_value(kind, lg, y);

    // Pull back the batch-sum error: n * (mean-normalized functional gradient).
    Mat eps = functional_gradient(kind, lg, y, model.d(), model.d_y())
                  .scaled(static_cast<double>(n));
    report.error_norm = eps.frobenius_norm();

    std::size_t L = model.block_count();
    InverseTangents tangents = inverse_jvp_all(model, cache, eps);

    // All deltas come from the pre-update cache; application is deferred so
    // later blocks never see mutated parameters.
    std::vector<Mat> delta1(L), delta2(L);
    report.blocks.resize(L);
    for (std::size_t b = 0; b < L; ++b) {
        const ActivationCache::Block& c = cache.blocks[b];
        PinvPolicy p1 = cfg.pinv;
        PinvPolicy p2 = cfg.pinv;
        if (cfg.pinv.kind == PinvPolicy::Kind::Noise) {
            p1.seed = mix_seed(cfg.pinv.seed, model.step() * 2 * L + 2 * b);
            p2.seed = mix_seed(cfg.pinv.seed, model.step() * 2 * L + 2 * b + 1);
        }
        PinvResult pinv1 = pseudoinverse_ex(c.s1, p1);
        if (pinv1.degenerate)
            throw std::runtime_error("gn_step: pseudoinverse of s1 truncated to rank 0 at block " +
                                     std::to_string(b));
        delta1[b] = matmul(tangents.u1[b], pinv1.pinv);

        Mat correction = weight_jvp_x2(model, cache, b, delta1[b]);
        PinvResult pinv2 = pseudoinverse_ex(c.s2, p2);
        if (pinv2.degenerate)
            throw std::runtime_error("gn_step: pseudoinverse of s2 truncated to rank 0 at block " +
                                     std::to_string(b));
        delta2[b] = matmul(tangents.u2[b] - correction, pinv2.pinv);

        report.blocks[b].rank1 = pinv1.rank;
        report.blocks[b].rank2 = pinv2.rank;
        report.blocks[b].delta1_norm = delta1[b].frobenius_norm();
        report.blocks[b].delta2_norm = delta2[b].frobenius_norm();
    }

    double scale = cfg.lr / static_cast<double>(L);
    for (std::size_t b = 0; b < L; ++b) {
        CouplingBlock& cb = model.mutable_block(b);
        for (std::size_t i = 0; i < cb.w1.size(); ++i)
            cb.w1.data()[i] -= scale * delta1[b].data()[i];
        for (std::size_t i = 0; i < cb.w2.size(); ++i)
            cb.w2.data()[i] -= scale * delta2[b].data()[i];
        if (cfg.weight_decay > 0.0) {
            double wd = cfg.lr * cfg.weight_decay;
            for (std::size_t i = 0; i < cb.w1.size(); ++i) cb.w1.data()[i] -= wd * cb.w1.data()[i];
            for (std::size_t i = 0; i < cb.w2.size(); ++i) cb.w2.data()[i] -= wd * cb.w2.data()[i];
        }
        if (!cb.w1.all_finite() || !cb.w2.all_finite())
            throw std::runtime_error("gn_step: non-finite weights after update");
    }
    model.note_param_update();
    return report;
}

void sgd_step(RevMlp& model, const ActivationCache& cache, const Mat& eps,
              const SgdConfig& cfg) {
    ParamGrads grads = vjp(model, cache, eps);
    for (std::size_t b = 0; b < model.block_count(); ++b) {
        CouplingBlock& cb = model.mutable_block(b);
        for (std::size_t i = 0; i < cb.w1.size(); ++i)
            cb.w1.data()[i] -= cfg.lr * (grads.w1[b].data()[i] + cfg.weight_decay * cb.w1.data()[i]);
        for (std::size_t i = 0; i < cb.w2.size(); ++i)
            cb.w2.data()[i] -= cfg.lr * (grads.w2[b].data()[i] + cfg.weight_decay * cb.w2.data()[i]);
        if (!cb.w1.all_finite() || !cb.w2.all_finite())
            throw std::runtime_error("sgd_step: non-finite weights after update");
    }
    model.note_param_update();
}

namespace {

void adam_update_matrix(Mat& w, const Mat& g, Mat& m, Mat& v, const AdamConfig& cfg,
                        double bc1, double bc2) {
    for (std::size_t i = 0; i < w.size(); ++i) {
        double gi = g.data()[i];
        m.data()[i] = cfg.beta1 * m.data()[i] + (1.0 - cfg.beta1) * gi;
        v.data()[i] = cfg.beta2 * v.data()[i] + (1.0 - cfg.beta2) * gi * gi;
        double m_hat = m.data()[i] / bc1;
        double v_hat = v.data()[i] / bc2;
        w.data()[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps_hat);
    }
    if (cfg.weight_decay > 0.0)
        for (std::size_t i = 0; i < w.size(); ++i)
            w.data()[i] -= cfg.lr * cfg.weight_decay * w.data()[i];
}

}  // namespace

void adam_step(RevMlp& model, const ActivationCache& cache, const Mat& eps,
               const AdamConfig& cfg, OptState& state) {
    if (state.m_w1.size() != model.block_count())
        throw std::invalid_argument("adam_step: state does not match model");
    ParamGrads grads = vjp(model, cache, eps);
    ++state.step;
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t b = 0; b < model.block_count(); ++b) {
        CouplingBlock& cb = model.mutable_block(b);
        adam_update_matrix(cb.w1, grads.w1[b], state.m_w1[b], state.v_w1[b], cfg, bc1, bc2);
        adam_update_matrix(cb.w2, grads.w2[b], state.m_w2[b], state.v_w2[b], cfg, bc1, bc2);
        if (!cb.w1.all_finite() || !cb.w2.all_finite())
            throw std::runtime_error("adam_step: non-finite weights after update");
    }
    model.note_param_update();
}

std::string switch_schedule(std::size_t epoch, std::span<const SchedulePoint> spec) {
    if (spec.empty()) throw std::invalid_argument("switch_schedule: empty schedule");
    if (spec.front().epoch != 0)
        throw std::invalid_argument("switch_schedule: first threshold must be epoch 0");
    for (std::size_t i = 1; i < spec.size(); ++i)
        if (spec[i].epoch <= spec[i - 1].epoch)
            throw std::invalid_argument("switch_schedule: thresholds must increase");
    std::size_t active = 0;
    for (std::size_t i = 0; i < spec.size(); ++i)
        if (spec[i].epoch <= epoch) active = i;
    return spec[active].optimizer;
}

}  // namespace revgn
