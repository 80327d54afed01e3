#include "revgn/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "revgn/optim.hpp"
#include "revgn/rng.hpp"

namespace revgn::oracle {
namespace {

constexpr std::size_t kMaxOutputs = 512;   // n*d guard
constexpr std::size_t kMaxParams = 4096;   // p guard

void desk_guard(const RevMlp& model, const Mat& x) {
    std::size_t outputs = model.d() * x.cols();
    std::size_t p = model.trainable_parameter_count();
    if (outputs > kMaxOutputs || p > kMaxParams)
        throw std::invalid_argument("oracle: instance exceeds the desk-scale guard (n*d <= " +
                                    std::to_string(kMaxOutputs) + ", p <= " +
                                    std::to_string(kMaxParams) + ")");
}

PinvPolicy exact_pinv() { return PinvPolicy::truncate(1e-12, 0.0); }

double rank_relative_gap(const Mat& m) {
    SvdFactorization f = svd(m);
    return f.s.empty() || f.s.front() == 0.0 ? 0.0 : f.s.back() / f.s.front();
}

}  // namespace

Mat to_vec(const Mat& m) {
    Mat v(m.rows() * m.cols(), 1);
    for (std::size_t j = 0; j < m.cols(); ++j)
        for (std::size_t i = 0; i < m.rows(); ++i) v(i + m.rows() * j, 0) = m(i, j);
    return v;
}

Mat from_vec(const Mat& v, std::size_t rows, std::size_t cols) {
    if (v.size() != rows * cols) throw std::invalid_argument("from_vec: size mismatch");
    Mat m(rows, cols);
    for (std::size_t j = 0; j < cols; ++j)
        for (std::size_t i = 0; i < rows; ++i) m(i, j) = v.data()[i + rows * j];
    return m;
}

Mat kron_with_identity(const Mat& x, std::size_t k) {
    Mat out(x.rows() * k, x.cols() * k);
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) {
            double v = x(i, j);
            if (v == 0.0) continue;
            for (std::size_t t = 0; t < k; ++t) out(t + k * i, t + k * j) = v;
        }
    return out;
}

std::size_t DenseJacobian::col_index(std::size_t b, int which, std::size_t r,
                                     std::size_t c) const {
    std::size_t h = d / 2;
    std::size_t per_w = h * d_prime;
    return b * 2 * per_w + (which == 2 ? per_w : 0) + r + h * c;
}

DenseJacobian dense_jacobian(const RevMlp& model, const Mat& x, bool fd_crosscheck) {
    desk_guard(model, x);
    std::size_t d = model.d();
    std::size_t n = x.cols();
    std::size_t h = model.d_half();
    std::size_t p = model.trainable_parameter_count();
    auto [y, cache] = forward(model, x);
    (void)y;

    DenseJacobian dj;
    dj.d = d;
    dj.n = n;
    dj.d_prime = model.d_prime();
    dj.blocks = model.block_count();
    dj.j = Mat(n * d, p);

    // one reverse pass per output entry fills one row of J
    for (std::size_t jcol = 0; jcol < n; ++jcol) {
        for (std::size_t irow = 0; irow < d; ++irow) {
            Mat u(d, n);
            u(irow, jcol) = 1.0;
            ParamGrads g = vjp(model, cache, u);
            std::size_t row = irow + d * jcol;
            for (std::size_t b = 0; b < model.block_count(); ++b) {
                for (std::size_t c = 0; c < dj.d_prime; ++c)
                    for (std::size_t r = 0; r < h; ++r) {
                        dj.j(row, dj.col_index(b, 1, r, c)) = g.w1[b](r, c);
                        dj.j(row, dj.col_index(b, 2, r, c)) = g.w2[b](r, c);
                    }
            }
        }
    }

    if (fd_crosscheck) {
        Rng rng(mix_seed(0x0f4accULL, model.seed()));
        const double step = 1e-5;
        for (int trial = 0; trial < 20; ++trial) {
            std::size_t b = rng.below(model.block_count());
            int which = rng.below(2) ? 2 : 1;
            std::size_t r = rng.below(h);
            std::size_t c = rng.below(dj.d_prime);
            RevMlp probe = model;
            Mat& w = which == 1 ? probe.mutable_block(b).w1 : probe.mutable_block(b).w2;
            double saved = w(r, c);
            w(r, c) = saved + step;
            probe.note_param_update();
            Mat plus = forward(probe, x).first;
            w(r, c) = saved - step;
            probe.note_param_update();
            Mat minus = forward(probe, x).first;
            w(r, c) = saved;
            std::size_t col = dj.col_index(b, which, r, c);
            double num = 0.0, den = 0.0;
            for (std::size_t jj = 0; jj < n; ++jj)
                for (std::size_t ii = 0; ii < d; ++ii) {
                    double fd = (plus(ii, jj) - minus(ii, jj)) / (2.0 * step);
                    double ex = dj.j(ii + d * jj, col);
                    num += (fd - ex) * (fd - ex);
                    den += fd * fd;
                }
            double rel = std::sqrt(num) / std::max(std::sqrt(den), 1e-9);
            if (rel > 1e-5)
                throw std::runtime_error(
                    "dense_jacobian: finite-difference cross-check failed (rel " +
                    std::to_string(rel) + ")");
        }
    }
    return dj;
}

namespace {

// sigma'(a2) column-masked copies of vb, then B[(i+h*j),(a+h*c)] =
// s1(c,j) * (w2 * diag(sigma'(a2_col_j)) * vb)(i,a).
Mat dense_b_matrix(const RevMlp& model, const ActivationCache& cache, std::size_t b) {
    std::size_t h = model.d_half();
    std::size_t dp = model.d_prime();
    std::size_t n = cache.n;
    const CouplingBlock& cb = model.block(b);
    const ActivationCache::Block& c = cache.blocks[b];
    Mat out(h * n, h * dp);
    for (std::size_t j = 0; j < n; ++j) {
        Mat masked_vb(dp, h);
        for (std::size_t k = 0; k < dp; ++k) {
            bool on = model.activation() == Activation::Linear || c.a2(k, j) > 0.0;
            if (!on) continue;
            for (std::size_t a = 0; a < h; ++a) masked_vb(k, a) = cb.vb(k, a);
        }
        Mat mj = matmul(cb.w2, masked_vb);  // h x h
        for (std::size_t cc = 0; cc < dp; ++cc) {
            double s = c.s1(cc, j);
            if (s == 0.0) continue;
            for (std::size_t i = 0; i < h; ++i)
                for (std::size_t a = 0; a < h; ++a)
                    out(i + h * j, a + h * cc) = s * mj(i, a);
        }
    }
    return out;
}

// Dense (d x_b / d x_L) for both halves at every block, one JVP sweep per
// unit direction.
struct DenseInverseMaps {
    std::vector<Mat> m1;  // (h*n) x (d*n) per block
    std::vector<Mat> m2;
};

DenseInverseMaps dense_inverse_maps(const RevMlp& model, const ActivationCache& cache) {
    std::size_t d = model.d();
    std::size_t n = cache.n;
    std::size_t h = model.d_half();
    std::size_t L = model.block_count();
    DenseInverseMaps maps;
    maps.m1.assign(L, Mat(h * n, d * n));
    maps.m2.assign(L, Mat(h * n, d * n));
    for (std::size_t col = 0; col < d * n; ++col) {
        Mat eps(d, n);
        std::size_t i = col % d;
        std::size_t j = col / d;
        eps(i, j) = 1.0;
        InverseTangents t = inverse_jvp_all(model, cache, eps);
        for (std::size_t b = 0; b < L; ++b)
            for (std::size_t jj = 0; jj < n; ++jj)
                for (std::size_t ii = 0; ii < h; ++ii) {
                    maps.m1[b](ii + h * jj, col) = t.u1[b](ii, jj);
                    maps.m2[b](ii + h * jj, col) = t.u2[b](ii, jj);
                }
    }
    return maps;
}

struct BlockRightInverse {
    Mat top;     // (h*d') x (d*n), the w1 rows
    Mat bottom;  // (h*d') x (d*n), the w2 rows
};

BlockRightInverse block_right_inverse(const RevMlp& model, const ActivationCache& cache,
                                      const DenseInverseMaps& maps, std::size_t b) {
    std::size_t h = model.d_half();
    const ActivationCache::Block& c = cache.blocks[b];
    if (rank_relative_gap(c.s1) <= 1e-8 || rank_relative_gap(c.s2) <= 1e-8)
        throw std::runtime_error(
            "dense_right_inverse: rank-deficient post-activation matrix at block " +
            std::to_string(b));
    Mat k1 = kron_with_identity(pseudoinverse(c.s1, exact_pinv()).transposed(), h);
    Mat k2 = kron_with_identity(pseudoinverse(c.s2, exact_pinv()).transposed(), h);
    Mat bmat = dense_b_matrix(model, cache, b);
    BlockRightInverse out;
    out.top = matmul(k1, maps.m1[b]);
    out.bottom = matmul(k2, maps.m2[b] - matmul(bmat, out.top));
    return out;
}

}  // namespace

Mat dense_right_inverse(const RevMlp& model, const Mat& x) {
    desk_guard(model, x);
    auto [y, cache] = forward(model, x);
    (void)y;
    std::size_t L = model.block_count();
    std::size_t d = model.d();
    std::size_t n = x.cols();
    std::size_t h = model.d_half();
    std::size_t per_w = h * model.d_prime();
    DenseInverseMaps maps = dense_inverse_maps(model, cache);
    Mat j_right(model.trainable_parameter_count(), d * n);
    double inv_l = 1.0 / static_cast<double>(L);
    for (std::size_t b = 0; b < L; ++b) {
        BlockRightInverse bri = block_right_inverse(model, cache, maps, b);
        for (std::size_t r = 0; r < per_w; ++r)
            for (std::size_t cc = 0; cc < d * n; ++cc) {
                j_right(b * 2 * per_w + r, cc) = inv_l * bri.top(r, cc);
                j_right(b * 2 * per_w + per_w + r, cc) = inv_l * bri.bottom(r, cc);
            }
    }
    return j_right;
}

double CheckReport::residual(const std::string& name) const {
    for (const auto& [k, v] : residuals)
        if (k == name) return v;
    throw std::out_of_range("CheckReport: no residual named " + name);
}

CheckReport check_right_inverse_identity(const RevMlp& model, const Mat& x,
                                         std::size_t probes, std::uint64_t seed) {
    DenseJacobian dj = dense_jacobian(model, x, false);
    Mat j_right = dense_right_inverse(model, x);
    Mat prod = matmul(dj.j, j_right);
    double identity_dev = (prod - Mat::identity(prod.rows())).max_abs();

    Rng rng(mix_seed(0x11d7ULL, seed));
    double worst = 0.0;
    for (std::size_t t = 0; t < probes; ++t) {
        Mat v(dj.j.rows(), 1);
        for (std::size_t i = 0; i < v.size(); ++i) v.data()[i] = rng.gaussian();
        Mat back = matmul(dj.j, matmul(j_right, v));
        worst = std::max(worst, (back - v).frobenius_norm() / v.frobenius_norm());
    }

    CheckReport report;
    report.check = "right_inverse_identity";
    report.instance = {{"d", double(model.d())}, {"d_prime", double(model.d_prime())},
                       {"blocks", double(model.block_count())}, {"n", double(x.cols())},
                       {"probes", double(probes)}};
    report.residuals = {{"identity_max_abs", identity_dev}, {"probe_rel_dev", worst}};
    report.pass = identity_dev <= 1e-8 && worst <= 1e-7;
    return report;
}

CheckReport check_layerwise_mpp(const RevMlp& model, const Mat& x) {
    desk_guard(model, x);
    auto [y, cache] = forward(model, x);
    (void)y;
    std::size_t h = model.d_half();
    std::size_t per_w = h * model.d_prime();
    DenseJacobian dj = dense_jacobian(model, x, false);
    DenseInverseMaps maps = dense_inverse_maps(model, cache);

    CheckReport report;
    report.check = "layerwise_mpp";
    report.instance = {{"d", double(model.d())}, {"d_prime", double(model.d_prime())},
                       {"blocks", double(model.block_count())}, {"n", double(x.cols())}};
    double worst_dev = 0.0;
    double worst_b_identity = 0.0;
    for (std::size_t b = 0; b < model.block_count(); ++b) {
        // block Jacobian = the block's column slice of the full J
        Mat jb(dj.j.rows(), 2 * per_w);
        for (std::size_t r = 0; r < dj.j.rows(); ++r)
            for (std::size_t c = 0; c < 2 * per_w; ++c)
                jb(r, c) = dj.j(r, b * 2 * per_w + c);
        BlockRightInverse bri = block_right_inverse(model, cache, maps, b);
        Mat jb_right = vconcat(bri.top, bri.bottom);
        Mat jb_mpp = pseudoinverse(jb, exact_pinv());
        double dev = (jb_right - jb_mpp).frobenius_norm() / jb_mpp.frobenius_norm();
        worst_dev = std::max(worst_dev, dev);

        const ActivationCache::Block& c = cache.blocks[b];
        Mat a = kron_with_identity(c.s1.transposed(), h);
        Mat a_pinv = kron_with_identity(pseudoinverse(c.s1, exact_pinv()).transposed(), h);
        Mat bmat = dense_b_matrix(model, cache, b);
        Mat diff = bmat - matmul(matmul(bmat, a_pinv), a);
        worst_b_identity = std::max(worst_b_identity, diff.max_abs());
    }
    report.residuals = {{"mpp_rel_dev", worst_dev}, {"b_identity_max_abs", worst_b_identity}};
    report.pass = worst_dev <= 1e-7 && worst_b_identity <= 1e-8;
    return report;
}

CheckReport check_projection(const RevMlp& model, const Mat& x, const Mat& h) {
    desk_guard(model, x);
    std::size_t nd = model.d() * x.cols();
    if (h.rows() != nd || h.cols() != nd)
        throw std::invalid_argument("check_projection: H must be (n*d) x (n*d)");
    SymEig eig_h = sym_eig(h);
    if (eig_h.w.front() <= 0.0)
        throw std::invalid_argument("check_projection: H must be symmetric positive definite");

    DenseJacobian dj = dense_jacobian(model, x, false);
    Mat jt_h_j = gemm(dj.j, true, matmul(h, dj.j), false);
    Mat core = pseudoinverse(jt_h_j, exact_pinv());
    Mat a = matmul(matmul(h, dj.j), gemm(core, false, dj.j, true));

    double proj_residual = (matmul(a, a) - a).frobenius_norm() / a.frobenius_norm();

    // A is similar to the symmetric H^1/2 J (J^T H J)^+ J^T H^1/2, so its
    // eigenvalues come from a symmetric eigensolve.
    Mat h_sqrt(nd, nd);
    for (std::size_t i = 0; i < nd; ++i)
        for (std::size_t j = 0; j < nd; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < nd; ++k)
                s += eig_h.v(i, k) * std::sqrt(eig_h.w[k]) * eig_h.v(j, k);
            h_sqrt(i, j) = s;
        }
    Mat hs_j = matmul(h_sqrt, dj.j);
    Mat sym = matmul(hs_j, gemm(core, false, hs_j, true));
    SymEig eig_a = sym_eig(sym);
    double eig_dev = 0.0;
    std::size_t rank_a = 0;
    for (double w : eig_a.w) {
        eig_dev = std::max(eig_dev, std::min(std::fabs(w), std::fabs(w - 1.0)));
        if (w > 0.5) ++rank_a;
    }
    SvdFactorization jsvd = svd(dj.j);
    std::size_t rank_j = 0;
    for (double s : jsvd.s)
        if (s > 1e-10 * jsvd.s.front()) ++rank_j;

    CheckReport report;
    report.check = "ggn_projection";
    report.instance = {{"d", double(model.d())}, {"d_prime", double(model.d_prime())},
                       {"blocks", double(model.block_count())}, {"n", double(x.cols())},
                       {"p", double(dj.param_count())}, {"nd", double(nd)}};
    report.residuals = {{"projection_rel", proj_residual},
                        {"eigenvalue_dev", eig_dev},
                        {"rank_a", double(rank_a)},
                        {"rank_j", double(rank_j)}};
    report.pass = proj_residual <= 1e-6 && eig_dev <= 1e-6 && rank_a == rank_j;
    return report;
}

CheckReport check_newton_function_space(const RevMlp& model, const Mat& x,
                                        const TargetBatch& y, const Mat& h) {
    desk_guard(model, x);
    std::size_t nd = model.d() * x.cols();
    std::size_t n = x.cols();
    Mat big_h = h.empty() ? Mat::identity(nd) : h;
    if (big_h.rows() != nd || big_h.cols() != nd)
        throw std::invalid_argument("check_newton_function_space: H must be (n*d) x (n*d)");

    auto [out, cache] = forward(model, x);
    Mat lg = logits(out, model.d_y());
    Mat eps = functional_gradient(LossKind::SquareLoss, lg, y, model.d(), model.d_y())
                  .scaled(static_cast<double>(n));
    Mat eps_vec = to_vec(eps);

    DenseJacobian dj = dense_jacobian(model, x, false);
    Mat grad_theta = gemm(dj.j, true, eps_vec, false);  // J^T eps

    Mat jt_h_j = gemm(dj.j, true, matmul(big_h, dj.j), false);
    Mat step_hessian = matmul(pseudoinverse(jt_h_j, exact_pinv()), grad_theta);

    Mat h_inv = pseudoinverse(big_h, exact_pinv());
    Mat step_functional = matmul(pseudoinverse(dj.j, exact_pinv()), matmul(h_inv, eps_vec));

    double rel = (step_hessian - step_functional).frobenius_norm() /
                 std::max(step_functional.frobenius_norm(), 1e-300);

    CheckReport report;
    report.check = "newton_function_space";
    report.instance = {{"d", double(model.d())}, {"d_prime", double(model.d_prime())},
                       {"blocks", double(model.block_count())}, {"n", double(n)},
                       {"identity_h", h.empty() ? 1.0 : 0.0}};
    report.residuals = {{"step_rel_dev", rel}};
    report.pass = rel <= 1e-7;

    // For a single block the layer-wise right inverse IS the Moore-Penrose
    // pseudoinverse, so the production gn_step must land on the same point.
    if (h.empty() && model.block_count() == 1) {
        RevMlp probe = model;
        GnConfig cfg;
        cfg.lr = 0.37;
        cfg.pinv = PinvPolicy::truncate(0.0, 0.0);
        gn_step(probe, x, y, LossKind::SquareLoss, cfg);
        double worst = 0.0;
        const CouplingBlock& b0 = model.block(0);
        const CouplingBlock& b1 = probe.block(0);
        std::size_t hh = model.d_half();
        for (int which : {1, 2}) {
            const Mat& before = which == 1 ? b0.w1 : b0.w2;
            const Mat& after = which == 1 ? b1.w1 : b1.w2;
            for (std::size_t r = 0; r < hh; ++r)
                for (std::size_t c = 0; c < model.d_prime(); ++c) {
                    std::size_t idx = dj.col_index(0, which, r, c);
                    double expected = before(r, c) - cfg.lr * step_functional.data()[idx];
                    worst = std::max(worst, std::fabs(after(r, c) - expected));
                }
        }
        report.residuals.emplace_back("gn_step_max_abs_dev", worst);
        report.pass = report.pass && worst <= 1e-8;
    }
    return report;
}

CheckReport check_right_inverse_equivalence(const RevMlp& model, const Mat& x,
                                            const TargetBatch& y,
                                            const std::vector<double>& alphas,
                                            std::size_t steps) {
    desk_guard(model, x);
    if (alphas.size() < 2)
        throw std::invalid_argument("check_right_inverse_equivalence: need >= 2 learning rates");
    std::size_t n = x.cols();
    std::size_t h = model.d_half();
    std::size_t per_w = h * model.d_prime();

    std::vector<double> gaps;
    double worst_decay_dev = 0.0;
    for (double alpha : alphas) {
        RevMlp layerwise = model;
        RevMlp dense = model;
        GnConfig cfg;
        cfg.lr = alpha;
        cfg.pinv = PinvPolicy::truncate(0.0, 0.0);
        double gap = 0.0;
        double eps0_norm = -1.0;
        for (std::size_t k = 0; k < steps; ++k) {
            GnReport rep = gn_step(layerwise, x, y, LossKind::SquareLoss, cfg);
            if (eps0_norm < 0.0) eps0_norm = rep.error_norm;

            auto [out, cache] = forward(dense, x);
            Mat lg = logits(out, model.d_y());
            Mat eps = functional_gradient(LossKind::SquareLoss, lg, y, model.d(), model.d_y())
                          .scaled(static_cast<double>(n));
            DenseJacobian dj = dense_jacobian(dense, x, false);
            Mat j_mpp = pseudoinverse(dj.j, exact_pinv());
            Mat step_vec = matmul(j_mpp, to_vec(eps));
            for (std::size_t b = 0; b < dense.block_count(); ++b) {
                CouplingBlock& cb = dense.mutable_block(b);
                for (std::size_t c = 0; c < dense.d_prime(); ++c)
                    for (std::size_t r = 0; r < h; ++r) {
                        cb.w1(r, c) -= alpha * step_vec.data()[b * 2 * per_w + r + h * c];
                        cb.w2(r, c) -= alpha * step_vec.data()[b * 2 * per_w + per_w + r + h * c];
                    }
            }
            dense.note_param_update();

            Mat eps_a = functional_gradient(
                LossKind::SquareLoss, logits(forward(layerwise, x).first, model.d_y()), y,
                model.d(), model.d_y()).scaled(static_cast<double>(n));
            Mat eps_b = functional_gradient(
                LossKind::SquareLoss, logits(forward(dense, x).first, model.d_y()), y,
                model.d(), model.d_y()).scaled(static_cast<double>(n));
            gap = std::max(gap, (eps_a - eps_b).frobenius_norm());

            double predicted = std::pow(1.0 - alpha, double(k + 1)) * eps0_norm;
            if (predicted > 1e-12) {
                worst_decay_dev = std::max(worst_decay_dev,
                                           std::fabs(eps_a.frobenius_norm() - predicted) / predicted);
                worst_decay_dev = std::max(worst_decay_dev,
                                           std::fabs(eps_b.frobenius_norm() - predicted) / predicted);
            }
        }
        gaps.push_back(gap);
    }

    // least-squares slope of log(gap) vs log(alpha)
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t m = alphas.size();
    for (std::size_t i = 0; i < m; ++i) {
        double lx = std::log(alphas[i]);
        double ly = std::log(std::max(gaps[i], 1e-300));
        sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
    }
    double slope = (double(m) * sxy - sx * sy) / (double(m) * sxx - sx * sx);

    CheckReport report;
    report.check = "right_inverse_equivalence";
    report.instance = {{"d", double(model.d())}, {"d_prime", double(model.d_prime())},
                       {"blocks", double(model.block_count())}, {"n", double(n)},
                       {"steps", double(steps)}};
    report.residuals = {{"gap_slope", slope}, {"decay_dev", worst_decay_dev}};
    for (std::size_t i = 0; i < m; ++i)
        report.residuals.emplace_back("gap_alpha_" + std::to_string(alphas[i]), gaps[i]);
    report.pass = slope >= 0.7 && worst_decay_dev <= 0.05;
    return report;
}

OracleInstance sample_instance(std::size_t d, std::size_t d_prime, std::size_t blocks,
                               std::size_t n, std::uint32_t seed, double weight_sigma,
                               double margin, Activation act) {
    for (std::uint32_t attempt = 0; attempt < 64; ++attempt) {
        std::uint32_t s = static_cast<std::uint32_t>(mix_seed(seed, attempt));
        RevMlp model = RevMlp::init(d, d_prime, blocks, d, s,
                                    InitScheme::gaussian(weight_sigma), act);
        Rng rng(mix_seed(0xda7afeedULL, s));
        Mat x(d, n);
        for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.gaussian();
        auto [y, cache] = forward(model, x);
        (void)y;
        if (act == Activation::Relu) {
            double min_abs = 1e300;
            for (const auto& blk : cache.blocks) {
                for (std::size_t i = 0; i < blk.a1.size(); ++i)
                    min_abs = std::min(min_abs, std::fabs(blk.a1.data()[i]));
                for (std::size_t i = 0; i < blk.a2.size(); ++i)
                    min_abs = std::min(min_abs, std::fabs(blk.a2.data()[i]));
            }
            if (min_abs <= margin) continue;
        }
        // the layer-wise construction assumes linearly independent
        // post-activation columns; reject draws that break it
        bool well_conditioned = true;
        for (const auto& blk : cache.blocks) {
            if (n <= d_prime &&
                (rank_relative_gap(blk.s1) <= 1e-4 || rank_relative_gap(blk.s2) <= 1e-4)) {
                well_conditioned = false;
                break;
            }
        }
        if (well_conditioned) return {std::move(model), std::move(x)};
    }
    throw std::runtime_error("sample_instance: could not find a kink-free instance");
}

}  // namespace revgn::oracle
