// Shared test utilities: generators and independent reference
// implementations (oracles) kept deliberately separate from the library
// code paths they check.
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "revgn/linalg.hpp"
#include "revgn/revnet.hpp"
#include "revgn/rng.hpp"

namespace testutil {

using revgn::Mat;

inline Mat random_mat(std::size_t r, std::size_t c, std::uint64_t seed, double scale = 1.0) {
    revgn::Rng rng(revgn::mix_seed(0x7e57ULL, seed));
    Mat m(r, c);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.gaussian();
    return m;
}

// reference product, plain triple loop
inline Mat naive_matmul(const Mat& a, const Mat& b) {
    Mat c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    return c;
}

inline double rel_diff(const Mat& a, const Mat& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a.data()[i] - b.data()[i];
        num += d * d;
        den += b.data()[i] * b.data()[i];
    }
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

// Hand-rolled forward-mode tangent of the coupling network with respect to
// weight directions: the reference the reverse-mode results are checked
// against. Returns the tangent of the network output.
inline Mat forward_weight_tangent(const revgn::RevMlp& model, const Mat& x,
                                  const std::vector<Mat>& dw1, const std::vector<Mat>& dw2) {
    std::size_t h = model.d_half();
    Mat x1 = x.row_block(0, h);
    Mat x2 = x.row_block(h, model.d());
    Mat t1(h, x.cols()), t2(h, x.cols());
    auto sigma = [&](const Mat& a) {
        if (model.activation() == revgn::Activation::Linear) return a;
        Mat s = a;
        for (std::size_t i = 0; i < s.size(); ++i)
            if (s.data()[i] <= 0.0) s.data()[i] = 0.0;
        return s;
    };
    auto dsigma = [&](const Mat& a, const Mat& t) {
        if (model.activation() == revgn::Activation::Linear) return t;
        Mat s = t;
        for (std::size_t i = 0; i < s.size(); ++i)
            if (a.data()[i] <= 0.0) s.data()[i] = 0.0;
        return s;
    };
    for (std::size_t b = 0; b < model.block_count(); ++b) {
        const revgn::CouplingBlock& cb = model.block(b);
        Mat a1 = revgn::matmul(cb.va, x2);
        Mat s1 = sigma(a1);
        Mat ds1 = dsigma(a1, revgn::matmul(cb.va, t2));
        t1 = t1 + revgn::matmul(cb.w1, ds1) + revgn::matmul(dw1[b], s1);
        x1 = x1 + revgn::matmul(cb.w1, s1);
        Mat a2 = revgn::matmul(cb.vb, x1);
        Mat s2 = sigma(a2);
        Mat ds2 = dsigma(a2, revgn::matmul(cb.vb, t1));
        t2 = t2 + revgn::matmul(cb.w2, ds2) + revgn::matmul(dw2[b], s2);
        x2 = x2 + revgn::matmul(cb.w2, s2);
    }
    return revgn::vconcat(t1, t2);
}

inline std::vector<Mat> zero_like_weights(const revgn::RevMlp& model) {
    return std::vector<Mat>(model.block_count(), Mat(model.d_half(), model.d_prime()));
}

}  // namespace testutil
