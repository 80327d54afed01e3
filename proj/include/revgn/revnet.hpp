// Reversible coupling-layer MLP: construction, forward/inverse evaluation,
// and the forward/reverse differentiation passes used by the optimizers.
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "revgn/linalg.hpp"

namespace revgn {

enum class Activation {
    Relu,    // derivative at 0 defined as 0
    Linear,  // identity, kept as a testing hook
};

struct InitScheme {
    enum class Kind { Xavier, Gaussian };
    Kind kind = Kind::Gaussian;
    double sigma = 1e-3;  // Gaussian only

    static InitScheme xavier() { return {Kind::Xavier, 0.0}; }
    static InitScheme gaussian(double sigma);
    std::string name() const;
};

/// One coupling block. w1/w2 are trainable; va/vb are the frozen inverted
/// bottlenecks (va maps the incoming second half, vb the updated first half).
struct CouplingBlock {
    Mat w1;  // d/2 x d'
    Mat w2;  // d/2 x d'
    Mat va;  // d' x d/2
    Mat vb;  // d' x d/2
};

struct ActivationCache;

class RevMlp {
public:
    /// Fresh model; W drawn per `scheme`, V ~ N(0, 1/(d/2)), all
    /// deterministic in `seed`. Throws on odd d or d_y > d.
    static RevMlp init(std::size_t d, std::size_t d_prime, std::size_t blocks,
                       std::size_t d_y, std::uint32_t seed, InitScheme scheme,
                       Activation act = Activation::Relu);

    /// Variant with the inverted bottlenecks removed: d' = d/2 and
    /// va = vb = I (still frozen).
    static RevMlp init_no_bottleneck(std::size_t d, std::size_t blocks,
                                     std::size_t d_y, std::uint32_t seed,
                                     InitScheme scheme,
                                     Activation act = Activation::Relu);

    std::size_t d() const { return d_; }
    std::size_t d_half() const { return d_ / 2; }
    std::size_t d_prime() const { return d_prime_; }
    std::size_t block_count() const { return blocks_.size(); }
    std::size_t d_y() const { return d_y_; }
    std::uint32_t seed() const { return seed_; }
    InitScheme scheme() const { return scheme_; }
    Activation activation() const { return act_; }
    bool no_bottleneck() const { return no_bottleneck_; }
    std::size_t trainable_parameter_count() const;

    const CouplingBlock& block(std::size_t i) const { return blocks_[i]; }

    /// Write access for the optimizers. Callers must bump the step counter
    /// after mutating weights so stale caches get rejected.
    CouplingBlock& mutable_block(std::size_t i) { return blocks_[i]; }
    void note_param_update() { ++step_; }
    std::uint64_t step() const { return step_; }
    void set_step(std::uint64_t s) { step_ = s; }

private:
    std::vector<CouplingBlock> blocks_;
    std::size_t d_ = 0;
    std::size_t d_prime_ = 0;
    std::size_t d_y_ = 0;
    std::uint32_t seed_ = 0;
    InitScheme scheme_;
    Activation act_ = Activation::Relu;
    bool no_bottleneck_ = false;
    std::uint64_t step_ = 0;
};

/// Per-block activations retained from one forward pass.
struct ActivationCache {
    struct Block {
        Mat x2_in;   // X2_{l-1}, d/2 x n
        Mat x1_out;  // X1_l, d/2 x n
        Mat a1;      // va * x2_in
        Mat s1;      // sigma(a1)
        Mat a2;      // vb * x1_out
        Mat s2;      // sigma(a2)
    };
    Mat x0;
    Mat xl;
    std::vector<Block> blocks;
    std::uint64_t model_step = 0;
    std::size_t n = 0;
};

/// y and the cache of everything the differentiation passes need.
std::pair<Mat, ActivationCache> forward(const RevMlp& model, const Mat& x);

/// Analytic inverse of forward.
Mat inverse(const RevMlp& model, const Mat& y);

/// Directional derivative of the inverse map: the matrix form of
/// (d x^{half}_block / d x_L) * eps, evaluated at the cached activations.
/// `block` indexes the block whose output is differentiated, 0-based;
/// block = L-1 returns the corresponding half of eps unchanged.
Mat inverse_jvp(const RevMlp& model, const ActivationCache& cache,
                std::size_t block, int half, const Mat& eps);

/// Both halves of (d x_b / d x_L) * eps at every block output, computed in
/// one sweep down the inverse map. Equivalent to calling inverse_jvp for
/// every (block, half) pair but L times cheaper.
struct InverseTangents {
    std::vector<Mat> u1;  // d/2 x n per block
    std::vector<Mat> u2;
};
InverseTangents inverse_jvp_all(const RevMlp& model, const ActivationCache& cache,
                                const Mat& eps);

/// Matrix form of (d x2_block / d w1_block) applied to the direction
/// delta1: w2 * (sigma'(a2) .* (vb * (delta1 * s1))).
Mat weight_jvp_x2(const RevMlp& model, const ActivationCache& cache,
                  std::size_t block, const Mat& delta1);

struct ParamGrads {
    std::vector<Mat> w1;  // one per block
    std::vector<Mat> w2;
};

/// Reverse mode: gradients of <u, forward(x)> with respect to every
/// trainable matrix.
ParamGrads vjp(const RevMlp& model, const ActivationCache& cache, const Mat& u);

/// The per-block cotangents of the vjp sweep without the gradient outer
/// products (c1 pairs with s1 in the w1 gradient, c2 with s2). The kernel
/// computations in the analysis module only need these.
struct CotangentTrace {
    std::vector<Mat> c1;  // d/2 x n per block
    std::vector<Mat> c2;
};
CotangentTrace cotangent_sweep(const RevMlp& model, const ActivationCache& cache,
                               const Mat& u);

/// First d_y rows of y.
Mat logits(const Mat& y, std::size_t d_y);

/// Checkpoint I/O: flat binary ("RGN1" magic, u32 dims, row-major float64
/// matrices in block order) plus a sibling <path>.json with metadata.
void save_checkpoint(const RevMlp& model, const std::string& path,
                     const std::string& config_hash = "");
RevMlp load_checkpoint(const std::string& path);

}  // namespace revgn
