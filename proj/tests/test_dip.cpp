#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "invrec/dip.hpp"
#include "invrec/verify.hpp"

using namespace invrec;

namespace {

InvariantModel model_for(const char* group, std::uint64_t seed, int side = 8) {
    const Grid grid{side, side};
    return InvariantModel(ParamVector::random_init(Arch{static_cast<int>(grid.size()), 12, 10}, seed),
                          GroupSpec::make(group, grid));
}

}  // namespace

TEST_SUITE("dip") {

TEST_CASE("generator shapes and output range") {
    const DipGenerator gen(Grid{8, 8}, DipConfig{3, 4, 2}, 5, 1);
    CHECK(gen.count() == 5);
    CHECK(gen.latent(0).size() == 3 * 2 * 2);
    // conv1 3->4, conv2 4->4, final 4->1, each 3x3 with bias
    CHECK(gen.param_count() == (3 * 4 * 9 + 4) + (4 * 4 * 9 + 4) + (4 * 9 + 1));
    const auto w = gen.init_weights(2);
    std::vector<double> x(64);
    for (std::size_t i = 0; i < 5; ++i) {
        gen.forward(i, w, x);
        for (double v : x) CHECK((v > 0.0 && v < 1.0));
    }
    CHECK_THROWS_AS(DipGenerator(Grid{6, 6}, DipConfig{3, 4, 2}, 2, 1), DimensionError);
    CHECK_THROWS_AS(gen.forward(0, std::vector<double>(3), x), DimensionError);
    DipConfig bad{0, 4, 2};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("zero steps gives the generator's initial outputs") {
    const auto m = model_for("flip_h", 3);
    GdConfig cfg;
    cfg.steps = 0;
    const DipConfig dip{3, 4, 2};
    const auto r = reconstruct_dip(m, dip, cfg, 4, 7);
    const DipGenerator gen(Grid{8, 8}, dip, 4, 7 ^ 0x9E3779B97F4A7C15ULL);
    const auto w = gen.init_weights(7 ^ 0xD1B54A32D192ED03ULL);
    CHECK(r.weights == w);
    for (std::size_t i = 0; i < 4; ++i) {
        std::vector<double> x(64);
        gen.forward(i, w, x);
        CHECK(r.state.candidates[i].vec() == x);
    }
    CHECK(r.state.lambdas == init_state(Grid{8, 8}, 4, cfg.lambda_init_max, 7).lambdas);
}

TEST_CASE("generator backward matches finite differences of the objective") {
    const auto m = model_for("flip_h", 4);
    const DipGenerator gen(Grid{8, 8}, DipConfig{3, 4, 2}, 3, 5);
    auto w = gen.init_weights(6);
    std::mt19937_64 rng(7);
    std::normal_distribution<double> jitter(0.0, 0.1);
    for (double& v : w) v += jitter(rng);  // keep biases off exact-zero kinks
    const auto state = init_state(Grid{8, 8}, 3, 0.5, 8);
    std::vector<std::size_t> coords(w.size());
    for (std::size_t k = 0; k < coords.size(); ++k) coords[k] = k;
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(50);
    for (Objective o : {Objective::AM, Objective::KKT}) {
        const auto g = generated_objective_grad(m, gen, w, state, o);
        std::vector<double> sub;
        for (auto k : coords) sub.push_back(g[k]);
        const auto fd = central_differences(
            [&](std::span<const double> ww) { return generated_objective(m, gen, ww, state, o); }, w, coords, 1e-6);
        CHECK(relative_error(fd, sub) <= 1e-4);
    }
}

TEST_CASE("affine generator reproduces the reparameterized candidate dynamics") {
    // x_i = A z_i + b, so one weight step moves candidate i by
    //   -lr * sum_j (z_i . z_j + 1) grad_{x_j} L
    std::mt19937_64 rng(9);
    const auto m = model_for("klein4", 10, 4);
    const Grid grid{4, 4};
    const std::size_t M = 4, k = 3;
    std::normal_distribution<double> nd;
    std::vector<std::vector<double>> z(M, std::vector<double>(k));
    for (auto& zi : z)
        for (double& v : zi) v = nd(rng);
    const AffineGenerator gen(grid, z);
    CHECK(gen.param_count() == 16 * k + 16);
    std::vector<double> w(gen.param_count());
    for (double& v : w) v = 0.3 * nd(rng);

    for (Objective o : {Objective::AM, Objective::KKT}) {
        GdConfig cfg;
        cfg.objective = o;
        cfg.steps = 25;
        cfg.lr = 1e-3;
        cfg.lr_lambda = 1e-3;
        const auto r = reconstruct_generated(m, gen, w, cfg, 11);

        auto s = init_state(grid, M, cfg.lambda_init_max, 11);
        for (std::size_t i = 0; i < M; ++i) {
            std::vector<double> x(16);
            gen.forward(i, w, x);
            s.candidates[i] = ImageTensor(grid, x);
        }
        for (long t = 0; t < cfg.steps; ++t) {
            const auto g = objective_grad(o, m, s.candidates, s.lambdas, s.labels);
            auto next = s.candidates;
            for (std::size_t i = 0; i < M; ++i)
                for (std::size_t j = 0; j < M; ++j) {
                    const double kij = dot(z[i], z[j]) + 1.0;
                    for (std::size_t p = 0; p < 16; ++p) next[i][p] -= cfg.lr * kij * g.grad_x[j][p];
                }
            s.candidates = next;
            if (o == Objective::KKT)
                for (std::size_t i = 0; i < M; ++i)
                    s.lambdas[i] = std::max(0.0, s.lambdas[i] - cfg.lr_lambda * g.grad_lambda[i]);
        }
        for (std::size_t i = 0; i < M; ++i)
            CHECK(max_abs_diff(r.state.candidates[i].values(), s.candidates[i].values()) <= 1e-10);
        CHECK(max_abs_diff(r.state.lambdas, s.lambdas) <= 1e-12);
    }
}

TEST_CASE("DIP runs are deterministic and keep multipliers nonnegative") {
    const auto m = model_for("flip_h", 12);
    GdConfig cfg;
    cfg.steps = 15;
    cfg.lr = 0.01;
    cfg.lr_lambda = 0.5;
    const DipConfig dip{3, 4, 2};
    const auto a = reconstruct_dip(m, dip, cfg, 4, 13, [](const ReconstructionState& s) {
        for (double l : s.lambdas) CHECK(l >= 0.0);
    });
    const auto b = reconstruct_dip(m, dip, cfg, 4, 13);
    CHECK(a.weights == b.weights);
    CHECK(a.state.candidates == b.state.candidates);
    CHECK(a.state.step == 15);
}

}  // TEST_SUITE
