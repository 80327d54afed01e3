// Convex objectives in function space and their functional gradients.
#pragma once

#include <cstddef>
#include <vector>

#include "revgn/linalg.hpp"

namespace revgn {

struct TargetBatch {
    enum class Kind { Labels, Regression };
    Kind kind = Kind::Labels;
    std::vector<int> labels;  // Labels: one class index per sample
    Mat values;               // Regression: d_y x n

    static TargetBatch classification(std::vector<int> labels);
    static TargetBatch regression(Mat values);
    std::size_t count() const;
};

enum class LossKind {
    SquareLoss,
    CrossEntropy,  // requires Labels targets
};

/// Per-sample mean loss. SquareLoss: (1/2n) sum |f_i - y_i|^2.
/// CrossEntropy: (1/n) sum -log softmax(f_i)_{y_i}, log-sum-exp stabilized.
double loss_value(LossKind kind, const Mat& logits, const TargetBatch& y);

/// Exact gradient of loss_value with respect to the full d x n network
/// output; rows [d_y, d) are zero because only the logit slice enters the
/// loss.
Mat functional_gradient(LossKind kind, const Mat& logits, const TargetBatch& y,
                        std::size_t d, std::size_t d_y);

/// Fraction of samples whose argmax logit equals the label; ties break to
/// the lowest row index.
double accuracy(const Mat& logits, const TargetBatch& y);

/// Column-wise stabilized softmax (helper shared by the ops above).
Mat softmax_columns(const Mat& logits);

}  // namespace revgn
