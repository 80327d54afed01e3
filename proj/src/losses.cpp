#include "revgn/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace revgn {
namespace {

void check_labels(const TargetBatch& y, std::size_t d_y, std::size_t n) {
    if (y.labels.size() != n)
        throw std::invalid_argument("targets: label count does not match batch");
    for (int c : y.labels)
        if (c < 0 || static_cast<std::size_t>(c) >= d_y)
            throw std::invalid_argument("targets: label out of range");
}

}  // namespace

TargetBatch TargetBatch::classification(std::vector<int> labels) {
    TargetBatch t;
    t.kind = Kind::Labels;
    t.labels = std::move(labels);
    return t;
}

TargetBatch TargetBatch::regression(Mat values) {
    if (!values.all_finite())
        throw std::invalid_argument("targets: regression targets must be finite");
    TargetBatch t;
    t.kind = Kind::Regression;
    t.values = std::move(values);
    return t;
}

std::size_t TargetBatch::count() const {
    return kind == Kind::Labels ? labels.size() : values.cols();
}

Mat softmax_columns(const Mat& logits) {
    Mat p = logits;
    for (std::size_t j = 0; j < p.cols(); ++j) {
        double mx = p(0, j);
        for (std::size_t i = 1; i < p.rows(); ++i) mx = std::max(mx, p(i, j));
        double z = 0.0;
        for (std::size_t i = 0; i < p.rows(); ++i) {
            p(i, j) = std::exp(p(i, j) - mx);
            z += p(i, j);
        }
        for (std::size_t i = 0; i < p.rows(); ++i) p(i, j) /= z;
    }
    return p;
}

double loss_value(LossKind kind, const Mat& logits, const TargetBatch& y) {
    std::size_t n = logits.cols();
    if (n == 0) throw std::invalid_argument("loss_value: empty batch");
    if (kind == LossKind::SquareLoss) {
        if (y.kind != TargetBatch::Kind::Regression)
            throw std::invalid_argument("loss_value: square loss needs regression targets");
        if (y.values.rows() != logits.rows() || y.values.cols() != n)
            throw std::invalid_argument("loss_value: target shape mismatch");
        Mat r = logits - y.values;
        double s = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i) s += r.data()[i] * r.data()[i];
        return 0.5 * s / static_cast<double>(n);
    }
    if (y.kind != TargetBatch::Kind::Labels)
        throw std::invalid_argument("loss_value: cross-entropy needs class labels");
    check_labels(y, logits.rows(), n);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double mx = logits(0, j);
        for (std::size_t i = 1; i < logits.rows(); ++i) mx = std::max(mx, logits(i, j));
        double z = 0.0;
        for (std::size_t i = 0; i < logits.rows(); ++i) z += std::exp(logits(i, j) - mx);
        std::size_t c = static_cast<std::size_t>(y.labels[j]);
        s += std::log(z) - (logits(c, j) - mx);
    }
    double v = s / static_cast<double>(n);
    if (!std::isfinite(v)) throw std::runtime_error("loss_value: non-finite loss");
    return v;
}

Mat functional_gradient(LossKind kind, const Mat& logits, const TargetBatch& y,
                        std::size_t d, std::size_t d_y) {
    std::size_t n = logits.cols();
    if (logits.rows() != d_y)
        throw std::invalid_argument("functional_gradient: logits must have d_y rows");
    if (d_y > d) throw std::invalid_argument("functional_gradient: d_y exceeds d");
    Mat g(d, n);
    double inv_n = 1.0 / static_cast<double>(n);
    if (kind == LossKind::SquareLoss) {
        if (y.kind != TargetBatch::Kind::Regression)
            throw std::invalid_argument("functional_gradient: square loss needs regression targets");
        if (y.values.rows() != d_y || y.values.cols() != n)
            throw std::invalid_argument("functional_gradient: target shape mismatch");
        for (std::size_t i = 0; i < d_y; ++i)
            for (std::size_t j = 0; j < n; ++j)
                g(i, j) = (logits(i, j) - y.values(i, j)) * inv_n;
        return g;
    }
    if (y.kind != TargetBatch::Kind::Labels)
        throw std::invalid_argument("functional_gradient: cross-entropy needs class labels");
    check_labels(y, d_y, n);
    Mat p = softmax_columns(logits);
    for (std::size_t i = 0; i < d_y; ++i)
        for (std::size_t j = 0; j < n; ++j) g(i, j) = p(i, j) * inv_n;
    for (std::size_t j = 0; j < n; ++j)
        g(static_cast<std::size_t>(y.labels[j]), j) -= inv_n;
    return g;
}

double accuracy(const Mat& logits, const TargetBatch& y) {
    if (y.kind != TargetBatch::Kind::Labels)
        throw std::invalid_argument("accuracy: needs class labels");
    std::size_t n = logits.cols();
    check_labels(y, logits.rows(), n);
    std::size_t hits = 0;
    for (std::size_t j = 0; j < n; ++j) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < logits.rows(); ++i)
            if (logits(i, j) > logits(best, j)) best = i;
        if (best == static_cast<std::size_t>(y.labels[j])) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(n);
}

}  // namespace revgn
