#include "revgn/revnet.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "revgn/rng.hpp"

namespace revgn {
namespace {

Mat apply_sigma(const Mat& a, Activation act) {
    if (act == Activation::Linear) return a;
    Mat s = a;
    for (std::size_t i = 0; i < s.size(); ++i)
        if (s.data()[i] <= 0.0) s.data()[i] = 0.0;
    return s;
}

// sigma'(pre) .* t, with the ReLU subgradient at 0 fixed to 0.
Mat mask_derivative(const Mat& pre, const Mat& t, Activation act) {
    if (act == Activation::Linear) return t;
    if (pre.rows() != t.rows() || pre.cols() != t.cols())
        throw std::invalid_argument("mask_derivative: shape mismatch");
    Mat out = t;
    for (std::size_t i = 0; i < out.size(); ++i)
        if (pre.data()[i] <= 0.0) out.data()[i] = 0.0;
    return out;
}

void check_cache(const RevMlp& model, const ActivationCache& cache) {
    if (cache.model_step != model.step())
        throw std::runtime_error("stale activation cache: parameters changed since forward");
    if (cache.blocks.size() != model.block_count())
        throw std::runtime_error("activation cache does not match model depth");
}

Mat fill_gaussian(std::size_t r, std::size_t c, double sigma, Rng& rng) {
    Mat m(r, c);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = sigma * rng.gaussian();
    return m;
}

Mat fill_xavier(std::size_t r, std::size_t c, std::size_t fan_in, std::size_t fan_out,
                Rng& rng) {
    // uniform with variance 2/(fan_in+fan_out)
    double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Mat m(r, c);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-a, a);
    return m;
}

}  // namespace

InitScheme InitScheme::gaussian(double sigma) {
    if (sigma <= 0.0) throw std::invalid_argument("InitScheme: sigma must be positive");
    return {Kind::Gaussian, sigma};
}

std::string InitScheme::name() const {
    return kind == Kind::Xavier ? "xavier" : "gaussian";
}

RevMlp RevMlp::init(std::size_t d, std::size_t d_prime, std::size_t blocks,
                    std::size_t d_y, std::uint32_t seed, InitScheme scheme,
                    Activation act) {
    if (d == 0 || d % 2 != 0) throw std::invalid_argument("RevMlp: d must be even");
    if (d_y > d) throw std::invalid_argument("RevMlp: d_y must not exceed d");
    if (blocks == 0) throw std::invalid_argument("RevMlp: need at least one block");
    if (d_prime == 0) throw std::invalid_argument("RevMlp: d_prime must be positive");
    RevMlp m;
    m.d_ = d;
    m.d_prime_ = d_prime;
    m.d_y_ = d_y;
    m.seed_ = seed;
    m.scheme_ = scheme;
    m.act_ = act;
    std::size_t h = d / 2;
    Rng rng(mix_seed(0x7265766eULL, seed));
    double v_sigma = std::sqrt(1.0 / static_cast<double>(h));
    m.blocks_.reserve(blocks);
    for (std::size_t b = 0; b < blocks; ++b) {
        CouplingBlock cb;
        if (scheme.kind == InitScheme::Kind::Gaussian) {
            cb.w1 = fill_gaussian(h, d_prime, scheme.sigma, rng);
            cb.w2 = fill_gaussian(h, d_prime, scheme.sigma, rng);
        } else {
            cb.w1 = fill_xavier(h, d_prime, d_prime, h, rng);
            cb.w2 = fill_xavier(h, d_prime, d_prime, h, rng);
        }
        cb.va = fill_gaussian(d_prime, h, v_sigma, rng);
        cb.vb = fill_gaussian(d_prime, h, v_sigma, rng);
        m.blocks_.push_back(std::move(cb));
    }
    return m;
}

RevMlp RevMlp::init_no_bottleneck(std::size_t d, std::size_t blocks, std::size_t d_y,
                                  std::uint32_t seed, InitScheme scheme, Activation act) {
    RevMlp m = init(d, d / 2, blocks, d_y, seed, scheme, act);
    Mat eye = Mat::identity(d / 2);
    for (auto& b : m.blocks_) {
        b.va = eye;
        b.vb = eye;
    }
    m.no_bottleneck_ = true;
    return m;
}

std::size_t RevMlp::trainable_parameter_count() const {
    return blocks_.size() * 2 * (d_ / 2) * d_prime_;
}

std::pair<Mat, ActivationCache> forward(const RevMlp& model, const Mat& x) {
    if (x.rows() != model.d())
        throw std::invalid_argument("forward: input must have d rows");
    std::size_t h = model.d_half();
    ActivationCache cache;
    cache.x0 = x;
    cache.model_step = model.step();
    cache.n = x.cols();
    Mat x1 = x.row_block(0, h);
    Mat x2 = x.row_block(h, model.d());
    for (std::size_t b = 0; b < model.block_count(); ++b) {
        const CouplingBlock& cb = model.block(b);
        ActivationCache::Block cb_cache;
        cb_cache.x2_in = x2;
        cb_cache.a1 = matmul(cb.va, x2);
        cb_cache.s1 = apply_sigma(cb_cache.a1, model.activation());
        x1 = x1 + matmul(cb.w1, cb_cache.s1);
        cb_cache.x1_out = x1;
        cb_cache.a2 = matmul(cb.vb, x1);
        cb_cache.s2 = apply_sigma(cb_cache.a2, model.activation());
        x2 = x2 + matmul(cb.w2, cb_cache.s2);
        cache.blocks.push_back(std::move(cb_cache));
    }
    Mat y = vconcat(x1, x2);
    cache.xl = y;
    return {y, std::move(cache)};
}

Mat inverse(const RevMlp& model, const Mat& y) {
    if (y.rows() != model.d())
        throw std::invalid_argument("inverse: input must have d rows");
    std::size_t h = model.d_half();
    Mat x1 = y.row_block(0, h);
    Mat x2 = y.row_block(h, model.d());
    for (std::size_t b = model.block_count(); b-- > 0;) {
        const CouplingBlock& cb = model.block(b);
        x2 = x2 - matmul(cb.w2, apply_sigma(matmul(cb.vb, x1), model.activation()));
        x1 = x1 - matmul(cb.w1, apply_sigma(matmul(cb.va, x2), model.activation()));
    }
    return vconcat(x1, x2);
}

namespace detail {

// One block of the inverse-map JVP: tangent at block b's output ->
// tangent at block b's input, using cached pre-activations.
void inverse_jvp_block(const RevMlp& model, const ActivationCache& cache,
                       std::size_t b, Mat& u1, Mat& u2) {
    const CouplingBlock& cb = model.block(b);
    const ActivationCache::Block& c = cache.blocks[b];
    u2 = u2 - matmul(cb.w2, mask_derivative(c.a2, matmul(cb.vb, u1), model.activation()));
    u1 = u1 - matmul(cb.w1, mask_derivative(c.a1, matmul(cb.va, u2), model.activation()));
}

}  // namespace detail

Mat inverse_jvp(const RevMlp& model, const ActivationCache& cache, std::size_t block,
                int half, const Mat& eps) {
    check_cache(model, cache);
    if (block >= model.block_count())
        throw std::invalid_argument("inverse_jvp: block index out of range");
    if (half != 1 && half != 2) throw std::invalid_argument("inverse_jvp: half must be 1 or 2");
    if (eps.rows() != model.d() || eps.cols() != cache.n)
        throw std::invalid_argument("inverse_jvp: direction shaped unlike the output");
    std::size_t h = model.d_half();
    Mat u1 = eps.row_block(0, h);
    Mat u2 = eps.row_block(h, model.d());
    for (std::size_t b = model.block_count(); b-- > block + 1;)
        detail::inverse_jvp_block(model, cache, b, u1, u2);
    return half == 1 ? u1 : u2;
}

InverseTangents inverse_jvp_all(const RevMlp& model, const ActivationCache& cache,
                                const Mat& eps) {
    check_cache(model, cache);
    if (eps.rows() != model.d() || eps.cols() != cache.n)
        throw std::invalid_argument("inverse_jvp_all: direction shaped unlike the output");
    std::size_t L = model.block_count();
    std::size_t h = model.d_half();
    InverseTangents t;
    t.u1.resize(L);
    t.u2.resize(L);
    Mat u1 = eps.row_block(0, h);
    Mat u2 = eps.row_block(h, model.d());
    t.u1[L - 1] = u1;
    t.u2[L - 1] = u2;
    for (std::size_t b = L - 1; b-- > 0;) {
        detail::inverse_jvp_block(model, cache, b + 1, u1, u2);
        t.u1[b] = u1;
        t.u2[b] = u2;
    }
    return t;
}

Mat weight_jvp_x2(const RevMlp& model, const ActivationCache& cache, std::size_t block,
                  const Mat& delta1) {
    check_cache(model, cache);
    if (block >= model.block_count())
        throw std::invalid_argument("weight_jvp_x2: block index out of range");
    std::size_t h = model.d_half();
    if (delta1.rows() != h || delta1.cols() != model.d_prime())
        throw std::invalid_argument("weight_jvp_x2: direction shaped unlike w1");
    const CouplingBlock& cb = model.block(block);
    const ActivationCache::Block& c = cache.blocks[block];
    // delta1 shifts X1 by delta1*s1; propagate through the second half-layer
    Mat shift = matmul(delta1, c.s1);
    return matmul(cb.w2, mask_derivative(c.a2, matmul(cb.vb, shift), model.activation()));
}

namespace {

void backward_sweep(const RevMlp& model, const ActivationCache& cache, const Mat& u,
                    ParamGrads* grads, CotangentTrace* trace) {
    check_cache(model, cache);
    if (u.rows() != model.d() || u.cols() != cache.n)
        throw std::invalid_argument("vjp: cotangent shaped unlike the output");
    std::size_t L = model.block_count();
    std::size_t h = model.d_half();
    if (grads) {
        grads->w1.resize(L);
        grads->w2.resize(L);
    }
    if (trace) {
        trace->c1.resize(L);
        trace->c2.resize(L);
    }
    Mat c1 = u.row_block(0, h);
    Mat c2 = u.row_block(h, model.d());
    for (std::size_t b = L; b-- > 0;) {
        const CouplingBlock& cb = model.block(b);
        const ActivationCache::Block& c = cache.blocks[b];
        // second half-layer: x2_out = x2_in + w2*sigma(vb*x1_out)
        if (grads) grads->w2[b] = gemm(c2, false, c.s2, true);
        if (trace) trace->c2[b] = c2;
        Mat m2 = mask_derivative(c.a2, gemm(cb.w2, true, c2, false), model.activation());
        c1 = c1 + gemm(cb.vb, true, m2, false);
        // first half-layer: x1_out = x1_in + w1*sigma(va*x2_in)
        if (grads) grads->w1[b] = gemm(c1, false, c.s1, true);
        if (trace) trace->c1[b] = c1;
        Mat m1 = mask_derivative(c.a1, gemm(cb.w1, true, c1, false), model.activation());
        c2 = c2 + gemm(cb.va, true, m1, false);
    }
}

}  // namespace

ParamGrads vjp(const RevMlp& model, const ActivationCache& cache, const Mat& u) {
    ParamGrads grads;
    backward_sweep(model, cache, u, &grads, nullptr);
    return grads;
}

CotangentTrace cotangent_sweep(const RevMlp& model, const ActivationCache& cache,
                               const Mat& u) {
    CotangentTrace trace;
    backward_sweep(model, cache, u, nullptr, &trace);
    return trace;
}

Mat logits(const Mat& y, std::size_t d_y) {
    if (d_y > y.rows()) throw std::invalid_argument("logits: d_y exceeds output rows");
    return y.row_block(0, d_y);
}

void save_checkpoint(const RevMlp& model, const std::string& path,
                     const std::string& config_hash) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path);
    f.write("RGN1", 4);
    auto put_u32 = [&f](std::uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v),
                              static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
        f.write(reinterpret_cast<const char*>(b), 4);
    };
    put_u32(static_cast<std::uint32_t>(model.d()));
    put_u32(static_cast<std::uint32_t>(model.d_prime()));
    put_u32(static_cast<std::uint32_t>(model.block_count()));
    put_u32(static_cast<std::uint32_t>(model.d_y()));
    put_u32(model.seed());
    for (std::size_t b = 0; b < model.block_count(); ++b) {
        const CouplingBlock& cb = model.block(b);
        for (const Mat* m : {&cb.w1, &cb.w2, &cb.va, &cb.vb})
            f.write(reinterpret_cast<const char*>(m->data()),
                    static_cast<std::streamsize>(m->size() * sizeof(double)));
    }
    if (!f) throw std::runtime_error("save_checkpoint: write failed for " + path);
    f.close();

    nlohmann::json meta;
    meta["init_scheme"] = model.scheme().name();
    meta["init_sigma"] = model.scheme().sigma;
    meta["step"] = model.step();
    meta["config_hash"] = config_hash;
    meta["no_bottleneck"] = model.no_bottleneck();
    std::ofstream mf(path + ".json");
    mf << meta.dump(2) << "\n";
}

RevMlp load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, "RGN1", 4) != 0)
        throw std::runtime_error("load_checkpoint: bad magic in " + path);
    auto get_u32 = [&f, &path]() {
        unsigned char b[4];
        f.read(reinterpret_cast<char*>(b), 4);
        if (!f) throw std::runtime_error("load_checkpoint: truncated header in " + path);
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) |
               (static_cast<std::uint32_t>(b[3]) << 24);
    };
    std::uint32_t d = get_u32();
    std::uint32_t d_prime = get_u32();
    std::uint32_t L = get_u32();
    std::uint32_t d_y = get_u32();
    std::uint32_t seed = get_u32();

    // Sidecar metadata; the binary payload is authoritative for weights.
    std::uint64_t step = 0;
    bool no_bottleneck = false;
    InitScheme scheme = InitScheme::gaussian(1e-3);
    std::ifstream mf(path + ".json");
    if (mf) {
        nlohmann::json meta = nlohmann::json::parse(mf, nullptr, false);
        if (!meta.is_discarded()) {
            step = meta.value("step", std::uint64_t{0});
            no_bottleneck = meta.value("no_bottleneck", false);
            if (meta.value("init_scheme", std::string{}) == "xavier")
                scheme = InitScheme::xavier();
            else if (meta.contains("init_sigma") && meta["init_sigma"].get<double>() > 0)
                scheme = InitScheme::gaussian(meta["init_sigma"].get<double>());
        }
    }

    RevMlp m = no_bottleneck && d_prime == d / 2
                   ? RevMlp::init_no_bottleneck(d, L, d_y, seed, scheme)
                   : RevMlp::init(d, d_prime, L, d_y, seed, scheme);
    for (std::size_t b = 0; b < m.block_count(); ++b) {
        CouplingBlock& cb = m.mutable_block(b);
        for (Mat* mat : {&cb.w1, &cb.w2, &cb.va, &cb.vb}) {
            f.read(reinterpret_cast<char*>(mat->data()),
                   static_cast<std::streamsize>(mat->size() * sizeof(double)));
            if (!f) throw std::runtime_error("load_checkpoint: truncated matrices in " + path);
            if (!mat->all_finite())
                throw std::runtime_error("load_checkpoint: non-finite weights in " + path);
        }
    }
    m.set_step(step);
    return m;
}

}  // namespace revgn
