#include <ostream>

#include <nlohmann/json.hpp>

#include "revgn/cli.hpp"
#include "revgn/oracle.hpp"
#include "revgn/rng.hpp"

namespace revgn::cli {
namespace {

using oracle::CheckReport;

nlohmann::json to_json(const CheckReport& r) {
    nlohmann::json j;
    j["check"] = r.check;
    nlohmann::json inst, res;
    for (const auto& [k, v] : r.instance) inst[k] = v;
    for (const auto& [k, v] : r.residuals) res[k] = v;
    j["instance_params"] = inst;
    j["residuals"] = res;
    j["pass"] = r.pass;
    return j;
}

Mat random_spd(std::size_t n, std::uint64_t seed) {
    Rng rng(mix_seed(0x59dULL, seed));
    Mat g(n, n);
    for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] = rng.gaussian();
    Mat spd = gemm(g, false, g, true);
    for (std::size_t i = 0; i < n; ++i) spd(i, i) += 0.5;  // bounded away from singular
    return spd;
}

TargetBatch nearby_targets(const RevMlp& model, const Mat& x, double spread,
                           std::uint64_t seed) {
    // targets close to the current outputs keep the error small, so the
    // trajectory checks stay in the regime where the step analysis applies
    Mat y = logits(forward(model, x).first, model.d_y());
    Rng rng(mix_seed(0x7a26ULL, seed));
    for (std::size_t i = 0; i < y.size(); ++i) y.data()[i] += spread * rng.gaussian();
    return TargetBatch::regression(std::move(y));
}

}  // namespace

int verify(bool full, std::ostream& report) {
    bool all_pass = true;
    auto emit = [&](auto&& make_report) {
        try {
            CheckReport r = make_report();
            report << to_json(r).dump() << "\n";
            all_pass = all_pass && r.pass;
        } catch (const std::exception& e) {
            nlohmann::json j;
            j["check"] = "exception";
            j["error"] = e.what();
            j["pass"] = false;
            report << j.dump() << "\n";
            all_pass = false;
        }
    };

    struct Shape {
        std::size_t d, dp, L, n;
    };
    const Shape shapes[] = {{4, 8, 1, 2}, {4, 8, 2, 3}, {8, 16, 2, 3},
                            {8, 16, 3, 2}, {6, 8, 2, 3}, {4, 16, 3, 3}};

    std::uint32_t seed = 20260;
    for (const Shape& s : shapes) {
        auto inst = oracle::sample_instance(s.d, s.dp, s.L, s.n, seed++);
        emit([&] { return oracle::check_right_inverse_identity(inst.model, inst.x, 20, seed); });
        emit([&] { return oracle::check_layerwise_mpp(inst.model, inst.x); });
    }

    // linear-activation variant: closed forms hold with sigma' = 1. The
    // post-activation matrix inherits rank d/2 from the linear map, so the
    // column-independence assumption needs n <= d/2 here.
    {
        auto inst = oracle::sample_instance(8, 8, 2, 3, seed++, 0.25, 1e-3,
                                            Activation::Linear);
        emit([&] { return oracle::check_layerwise_mpp(inst.model, inst.x); });
    }

    // projection operator: over- and under-parameterized, H = I and SPD
    {
        auto over = oracle::sample_instance(4, 16, 2, 3, seed++);
        std::size_t nd = over.model.d() * over.x.cols();
        emit([&] { return oracle::check_projection(over.model, over.x, Mat::identity(nd)); });
        emit([&] { return oracle::check_projection(over.model, over.x, random_spd(nd, 11)); });

        auto under = oracle::sample_instance(4, 4, 1, 12, seed++);
        nd = under.model.d() * under.x.cols();
        emit([&] { return oracle::check_projection(under.model, under.x, Mat::identity(nd)); });
        emit([&] { return oracle::check_projection(under.model, under.x, random_spd(nd, 12)); });
    }

    // Newton step in function space, incl. gn_step agreement on one block
    {
        auto inst = oracle::sample_instance(4, 16, 1, 3, seed++);
        TargetBatch y = nearby_targets(inst.model, inst.x, 0.3, 21);
        emit([&] { return oracle::check_newton_function_space(inst.model, inst.x, y); });
        std::size_t nd = inst.model.d() * inst.x.cols();
        emit([&] { return oracle::check_newton_function_space(inst.model, inst.x, y,
                                                 random_spd(nd, 22)); });
        auto deep = oracle::sample_instance(6, 12, 2, 3, seed++);
        TargetBatch y2 = nearby_targets(deep.model, deep.x, 0.3, 23);
        emit([&] { return oracle::check_newton_function_space(deep.model, deep.x, y2); });
    }

    if (full) {
        // learning-rate scaling of the trajectory gap between right inverses
        auto inst = oracle::sample_instance(6, 16, 2, 3, seed++);
        TargetBatch y = nearby_targets(inst.model, inst.x, 0.1, 31);
        emit([&] { return oracle::check_right_inverse_equivalence(inst.model, inst.x, y,
                                                     {0.2, 0.1, 0.05}, 20); });
    }

    report << (all_pass ? "{\"verify\":\"pass\"}" : "{\"verify\":\"fail\"}") << "\n";
    return all_pass ? 0 : 1;
}

}  // namespace revgn::cli
