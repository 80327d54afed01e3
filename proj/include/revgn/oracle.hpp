// Brute-force dense linear-algebra verification of the identities the
// layer-wise Gauss-Newton construction relies on. Desk scale only: every
// operation here materializes Jacobians explicitly.
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "revgn/linalg.hpp"
#include "revgn/losses.hpp"
#include "revgn/revnet.hpp"

namespace revgn::oracle {

/// Vectorization convention shared by every dense assembly: a d x n matrix
/// maps to a length-dn vector with entry (i, j) at position i + d*j, and
/// weight matrices flatten the same way. All Jacobian row/column indexing
/// below follows it.
Mat to_vec(const Mat& m);                                    // dn x 1
Mat from_vec(const Mat& v, std::size_t rows, std::size_t cols);

/// kron(x, I_k).
Mat kron_with_identity(const Mat& x, std::size_t k);

/// Dense model Jacobian d(x_L)/d(theta), shape (n*d) x p with
/// p = L*d*d'. Columns are ordered block by block, w1 before w2. Assembly
/// runs one vjp per output entry and cross-checks 20 random columns
/// against central finite differences of the forward pass.
struct DenseJacobian {
    Mat j;
    std::size_t d = 0, n = 0, d_prime = 0, blocks = 0;

    std::size_t param_count() const { return j.cols(); }
    /// Column index of weight entry (r, c) in block b; which = 1 or 2.
    std::size_t col_index(std::size_t b, int which, std::size_t r, std::size_t c) const;
};

DenseJacobian dense_jacobian(const RevMlp& model, const Mat& x,
                             bool fd_crosscheck = true);

/// The layer-wise right inverse assembled explicitly, p x (n*d), including
/// the 1/L stacking factor, so j * right_inverse = I. Throws if any
/// post-activation matrix is column-rank deficient.
Mat dense_right_inverse(const RevMlp& model, const Mat& x);

struct CheckReport {
    std::string check;
    std::vector<std::pair<std::string, double>> instance;
    std::vector<std::pair<std::string, double>> residuals;
    bool pass = false;

    double residual(const std::string& name) const;
};

/// J * J_right = I, both on the assembled product and on random probe
/// vectors.
CheckReport check_right_inverse_identity(const RevMlp& model, const Mat& x,
                                         std::size_t probes, std::uint64_t seed);

/// Per block: compares the block right inverse against the SVD
/// pseudoinverse of the block Jacobian, and verifies B = B A^+ A.
CheckReport check_layerwise_mpp(const RevMlp& model, const Mat& x);

/// A = H J (J^T H J)^+ J^T must be a projection with eigenvalues in {0,1}.
CheckReport check_projection(const RevMlp& model, const Mat& x, const Mat& h);

/// One dense step of (J^T H J)^+ grad equals one step of J^+ H^-1 eps.
/// With h empty the square-loss case (H = I) is checked, including
/// agreement with gn_step on single-block models.
CheckReport check_newton_function_space(const RevMlp& model, const Mat& x,
                                        const TargetBatch& y, const Mat& h = Mat());

/// Runs the layer-wise and the SVD-pseudoinverse trajectories side by side
/// for each learning rate and fits the gap's scaling exponent in alpha.
CheckReport check_right_inverse_equivalence(const RevMlp& model, const Mat& x,
                                            const TargetBatch& y,
                                            const std::vector<double>& alphas,
                                            std::size_t steps);

/// Samples a (model, input) pair whose ReLU pre-activations all stay at
/// least `margin` away from zero, so finite differences are trustworthy.
struct OracleInstance {
    RevMlp model;
    Mat x;
};
OracleInstance sample_instance(std::size_t d, std::size_t d_prime, std::size_t blocks,
                               std::size_t n, std::uint32_t seed, double weight_sigma = 0.25,
                               double margin = 1e-3, Activation act = Activation::Relu);

}  // namespace revgn::oracle
