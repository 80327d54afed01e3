// Dense float64 matrices, SVD and policy-regularized pseudoinverses.
// Everything else in the library is built on top of these types.
#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace revgn {

/// Dense real matrix, row-major float64 storage. Values are immutable once
/// returned from an operation; operations return fresh matrices. Activation
/// batches follow the column-per-sample convention throughout the library.
class Mat {
public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols);  // zero-initialized
    Mat(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Mat identity(std::size_t n);
    static Mat from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    Mat transposed() const;
    Mat scaled(double c) const;
    // Rows [r0, r1) as a copy.
    Mat row_block(std::size_t r0, std::size_t r1) const;
    Mat col(std::size_t j) const;

    double frobenius_norm() const;
    double max_abs() const;
    bool all_finite() const;

    bool operator==(const Mat& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Mat operator+(const Mat& a, const Mat& b);
Mat operator-(const Mat& a, const Mat& b);

/// a*b with deterministic accumulation order. Throws on inner-dimension
/// mismatch or non-finite result entries.
Mat matmul(const Mat& a, const Mat& b);

/// General product with optional transposes: op(a)*op(b).
Mat gemm(const Mat& a, bool transpose_a, const Mat& b, bool transpose_b,
         double alpha = 1.0);

/// Stack a on top of b (column counts must match).
Mat vconcat(const Mat& a, const Mat& b);

/// Frobenius inner product <a,b>.
double frobenius_dot(const Mat& a, const Mat& b);

/// <a,b>_F / (|a|_F |b|_F), in [-1, 1]. Throws if either matrix is zero.
double frobenius_cosine(const Mat& a, const Mat& b);

/// Thin SVD a = u * diag(s) * vt with s descending, orthonormal u columns
/// and vt rows.
struct SvdFactorization {
    Mat u;                   // m x r
    std::vector<double> s;   // r, descending, >= 0
    Mat vt;                  // r x n
};

SvdFactorization svd(const Mat& a);

/// Regularization applied when pseudoinverting via SVD.
struct PinvPolicy {
    enum class Kind { Truncate, Damp, Noise };
    Kind kind = Kind::Truncate;
    double rtol = 0.0;        // Truncate: relative cutoff wrt largest singular value
    double atol = 0.0;        // Truncate: absolute cutoff
    double frac = 0.0;        // Damp: added fraction of s_max; Noise: noise scale
    std::uint64_t seed = 0;   // Noise: RNG stream seed

    static PinvPolicy truncate(double rtol, double atol);
    static PinvPolicy damp(double frac);
    static PinvPolicy noise(double frac, std::uint64_t seed);
};

struct PinvResult {
    Mat pinv;
    std::size_t rank = 0;
    bool degenerate = false;  // every singular value truncated
};

PinvResult pseudoinverse_ex(const Mat& a, const PinvPolicy& policy);
Mat pseudoinverse(const Mat& a, const PinvPolicy& policy);

/// Symmetric eigendecomposition a = v * diag(w) * v^T (w ascending).
/// Requires a symmetric; used by the verification checks.
struct SymEig {
    std::vector<double> w;
    Mat v;  // columns are eigenvectors
};
SymEig sym_eig(const Mat& a);

/// Number of BLAS threads used by matrix products (results are
/// bit-identical for a fixed input regardless of the setting).
void set_blas_threads(int n);
int blas_threads();

}  // namespace revgn
