#include "revgn/linalg.hpp"

#include <cblas.h>
#include <lapacke.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "revgn/rng.hpp"

extern "C" void openblas_set_num_threads(int);

namespace revgn {
namespace {

std::atomic<int> g_blas_threads{0};

void ensure_blas_threads() {
    if (g_blas_threads.load(std::memory_order_relaxed) == 0) {
        set_blas_threads(2);
    }
}

void check_finite(const Mat& m, const char* op) {
    if (!m.all_finite()) {
        throw std::runtime_error(std::string(op) + ": non-finite entries in result");
    }
}

void require_finite_input(const Mat& m, const char* op) {
    if (!m.all_finite()) {
        throw std::invalid_argument(std::string(op) + ": non-finite entries in input");
    }
}

}  // namespace

void set_blas_threads(int n) {
    if (n < 1) n = 1;
    g_blas_threads.store(n, std::memory_order_relaxed);
    openblas_set_num_threads(n);
}

int blas_threads() {
    ensure_blas_threads();
    return g_blas_threads.load(std::memory_order_relaxed);
}

Mat::Mat(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Mat::Mat(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw std::invalid_argument("Mat: data length does not match rows*cols");
    }
}

Mat Mat::identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Mat Mat::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    std::size_t r = rows.size();
    std::size_t c = r ? rows.begin()->size() : 0;
    Mat m(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
        if (row.size() != c) throw std::invalid_argument("Mat::from_rows: ragged rows");
        std::size_t j = 0;
        for (double v : row) m(i, j++) = v;
        ++i;
    }
    return m;
}

Mat Mat::transposed() const {
    Mat t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

Mat Mat::scaled(double c) const {
    Mat m = *this;
    for (auto& v : m.data_) v *= c;
    check_finite(m, "scaled");
    return m;
}

Mat Mat::row_block(std::size_t r0, std::size_t r1) const {
    if (r0 > r1 || r1 > rows_) throw std::invalid_argument("Mat::row_block: bad range");
    Mat m(r1 - r0, cols_);
    std::memcpy(m.data(), data_.data() + r0 * cols_, (r1 - r0) * cols_ * sizeof(double));
    return m;
}

Mat Mat::col(std::size_t j) const {
    if (j >= cols_) throw std::invalid_argument("Mat::col: index out of range");
    Mat m(rows_, 1);
    for (std::size_t i = 0; i < rows_; ++i) m(i, 0) = (*this)(i, j);
    return m;
}

double Mat::frobenius_norm() const {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return std::sqrt(s);
}

double Mat::max_abs() const {
    double s = 0.0;
    for (double v : data_) s = std::max(s, std::fabs(v));
    return s;
}

bool Mat::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

Mat operator+(const Mat& a, const Mat& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("operator+: shape mismatch");
    Mat m(a.rows(), a.cols());
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = a.data()[i] + b.data()[i];
    check_finite(m, "operator+");
    return m;
}

Mat operator-(const Mat& a, const Mat& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("operator-: shape mismatch");
    Mat m(a.rows(), a.cols());
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = a.data()[i] - b.data()[i];
    check_finite(m, "operator-");
    return m;
}

Mat gemm(const Mat& a, bool transpose_a, const Mat& b, bool transpose_b, double alpha) {
    ensure_blas_threads();
    std::size_t m = transpose_a ? a.cols() : a.rows();
    std::size_t k = transpose_a ? a.rows() : a.cols();
    std::size_t kb = transpose_b ? b.cols() : b.rows();
    std::size_t n = transpose_b ? b.rows() : b.cols();
    if (k != kb) throw std::invalid_argument("gemm: inner dimension mismatch");
    Mat c(m, n);
    if (m == 0 || n == 0) return c;
    if (k == 0) return c;
    cblas_dgemm(CblasRowMajor, transpose_a ? CblasTrans : CblasNoTrans,
                transpose_b ? CblasTrans : CblasNoTrans, static_cast<int>(m),
                static_cast<int>(n), static_cast<int>(k), alpha, a.data(),
                static_cast<int>(a.cols()), b.data(), static_cast<int>(b.cols()), 0.0,
                c.data(), static_cast<int>(n));
    check_finite(c, "gemm");
    return c;
}

Mat matmul(const Mat& a, const Mat& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: dimension mismatch");
    return gemm(a, false, b, false);
}

Mat vconcat(const Mat& a, const Mat& b) {
    if (a.cols() != b.cols()) throw std::invalid_argument("vconcat: column mismatch");
    Mat m(a.rows() + b.rows(), a.cols());
    std::memcpy(m.data(), a.data(), a.size() * sizeof(double));
    std::memcpy(m.data() + a.size(), b.data(), b.size() * sizeof(double));
    return m;
}

double frobenius_dot(const Mat& a, const Mat& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("frobenius_dot: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
    return s;
}

double frobenius_cosine(const Mat& a, const Mat& b) {
    double na = a.frobenius_norm();
    double nb = b.frobenius_norm();
    if (na == 0.0 || nb == 0.0)
        throw std::invalid_argument("frobenius_cosine: undefined for a zero matrix");
    double c = frobenius_dot(a, b) / (na * nb);
    return std::clamp(c, -1.0, 1.0);
}

SvdFactorization svd(const Mat& a) {
    if (a.empty()) throw std::invalid_argument("svd: empty matrix");
    require_finite_input(a, "svd");
    ensure_blas_threads();
    int m = static_cast<int>(a.rows());
    int n = static_cast<int>(a.cols());
    int r = std::min(m, n);
    SvdFactorization f;
    f.u = Mat(a.rows(), static_cast<std::size_t>(r));
    f.s.assign(static_cast<std::size_t>(r), 0.0);
    f.vt = Mat(static_cast<std::size_t>(r), a.cols());
    Mat work = a;
    int info = LAPACKE_dgesdd(LAPACK_ROW_MAJOR, 'S', m, n, work.data(), n,
                              f.s.data(), f.u.data(), r, f.vt.data(), n);
    if (info != 0) {
        // divide-and-conquer can fail to converge on badly scaled inputs;
        // retry with the QR-iteration driver before giving up
        work = a;
        std::vector<double> superb(static_cast<std::size_t>(r));
        info = LAPACKE_dgesvd(LAPACK_ROW_MAJOR, 'S', 'S', m, n, work.data(), n,
                              f.s.data(), f.u.data(), r, f.vt.data(), n,
                              superb.data());
        if (info != 0) {
            throw std::runtime_error("svd: did not converge (info=" +
                                     std::to_string(info) + ")");
        }
    }
    check_finite(f.u, "svd");
    check_finite(f.vt, "svd");
    return f;
}

PinvPolicy PinvPolicy::truncate(double rtol, double atol) {
    if (rtol < 0.0 || rtol >= 1.0 || atol < 0.0)
        throw std::invalid_argument("PinvPolicy: need rtol in [0,1) and atol >= 0");
    PinvPolicy p;
    p.kind = Kind::Truncate;
    p.rtol = rtol;
    p.atol = atol;
    return p;
}

PinvPolicy PinvPolicy::damp(double frac) {
    if (frac < 0.0 || frac >= 1.0)
        throw std::invalid_argument("PinvPolicy: need frac in [0,1)");
    PinvPolicy p;
    p.kind = Kind::Damp;
    p.frac = frac;
    return p;
}

PinvPolicy PinvPolicy::noise(double frac, std::uint64_t seed) {
    if (frac < 0.0 || frac >= 1.0)
        throw std::invalid_argument("PinvPolicy: need frac in [0,1)");
    PinvPolicy p;
    p.kind = Kind::Noise;
    p.frac = frac;
    p.seed = seed;
    return p;
}

namespace {

// v * diag(inv_s) * u^T assembled without forming diag explicitly.
Mat assemble_pinv(const SvdFactorization& f, const std::vector<double>& inv_s) {
    Mat vs(f.vt.cols(), inv_s.size());
    for (std::size_t i = 0; i < f.vt.cols(); ++i)
        for (std::size_t k = 0; k < inv_s.size(); ++k)
            vs(i, k) = f.vt(k, i) * inv_s[k];
    return gemm(vs, false, f.u, true);
}

double entry_std(const Mat& a) {
    double mean = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) mean += a.data()[i];
    mean /= static_cast<double>(a.size());
    double var = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a.data()[i] - mean;
        var += d * d;
    }
    return std::sqrt(var / static_cast<double>(a.size()));
}

}  // namespace

PinvResult pseudoinverse_ex(const Mat& a, const PinvPolicy& policy) {
    require_finite_input(a, "pseudoinverse");
    PinvResult out;
    switch (policy.kind) {
        case PinvPolicy::Kind::Truncate: {
            SvdFactorization f = svd(a);
            double s_max = f.s.empty() ? 0.0 : f.s.front();
            // both thresholds apply; a value must clear each of them
            double cut = std::max(policy.rtol * s_max, policy.atol);
            std::vector<double> inv_s(f.s.size(), 0.0);
            for (std::size_t i = 0; i < f.s.size(); ++i) {
                if (f.s[i] > 0.0 && f.s[i] >= cut) {
                    inv_s[i] = 1.0 / f.s[i];
                    ++out.rank;
                }
            }
            if (out.rank == 0) {
                out.pinv = Mat(a.cols(), a.rows());
                out.degenerate = true;
                return out;
            }
            out.pinv = assemble_pinv(f, inv_s);
            break;
        }
        case PinvPolicy::Kind::Damp: {
            SvdFactorization f = svd(a);
            double s_max = f.s.empty() ? 0.0 : f.s.front();
            if (s_max == 0.0) {
                out.pinv = Mat(a.cols(), a.rows());
                out.degenerate = true;
                return out;
            }
            double shift = policy.frac * s_max;
            std::vector<double> inv_s(f.s.size());
            for (std::size_t i = 0; i < f.s.size(); ++i) inv_s[i] = 1.0 / (f.s[i] + shift);
            out.rank = f.s.size();
            out.pinv = assemble_pinv(f, inv_s);
            break;
        }
        case PinvPolicy::Kind::Noise: {
            double sd = policy.frac * entry_std(a);
            Mat noisy = a;
            Rng rng(policy.seed);
            for (std::size_t i = 0; i < noisy.size(); ++i)
                noisy.data()[i] += sd * rng.gaussian();
            SvdFactorization f = svd(noisy);
            std::vector<double> inv_s(f.s.size(), 0.0);
            for (std::size_t i = 0; i < f.s.size(); ++i) {
                if (f.s[i] > 0.0) {  // only exact zeros are dropped
                    inv_s[i] = 1.0 / f.s[i];
                    ++out.rank;
                }
            }
            if (out.rank == 0) {
                out.pinv = Mat(a.cols(), a.rows());
                out.degenerate = true;
                return out;
            }
            out.pinv = assemble_pinv(f, inv_s);
            break;
        }
    }
    check_finite(out.pinv, "pseudoinverse");
    return out;
}

Mat pseudoinverse(const Mat& a, const PinvPolicy& policy) {
    return pseudoinverse_ex(a, policy).pinv;
}

SymEig sym_eig(const Mat& a) {
    if (a.rows() != a.cols()) throw std::invalid_argument("sym_eig: not square");
    require_finite_input(a, "sym_eig");
    ensure_blas_threads();
    int n = static_cast<int>(a.rows());
    SymEig e;
    e.v = a;
    e.w.assign(a.rows(), 0.0);
    int info = LAPACKE_dsyev(LAPACK_ROW_MAJOR, 'V', 'U', n, e.v.data(), n, e.w.data());
    if (info != 0) throw std::runtime_error("sym_eig: dsyev failed");
    return e;
}

}  // namespace revgn
