#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "invrec/objectives.hpp"
#include "invrec/verify.hpp"

using namespace invrec;
using invrec::test::disjoint_invariant_samples;
using invrec::test::random_image;

namespace {

InvariantModel small_model(const char* group, std::uint64_t seed, int side = 4) {
    const Grid grid{side, side};
    return InvariantModel(ParamVector::random_init(Arch{static_cast<int>(grid.size()), 10, 8}, seed),
                          GroupSpec::make(group, grid));
}

ImageTensor off_kink(std::mt19937_64& rng, const InvariantModel& m) {
    for (;;) {
        auto x = random_image(rng, m.group().grid());
        bool ok = true;
        for (const auto& g : m.group().elements())
            ok = ok && min_abs_preactivation(m.params(), apply(g, x).values()) > 1e-3;
        if (ok) return x;
    }
}

}  // namespace

TEST_SUITE("objectives") {

TEST_CASE("objective names") {
    CHECK(parse_objective("am") == Objective::AM);
    CHECK(parse_objective("kkt") == Objective::KKT);
    CHECK(to_string(Objective::KKT) == "kkt");
    CHECK_THROWS_AS(parse_objective("l2"), std::invalid_argument);
}

TEST_CASE("am_loss: zero input, invariance, degree-1 scaling") {
    std::mt19937_64 rng(1);
    const auto m = small_model("d4", 2);
    CHECK(am_loss(m, std::vector<double>(16, 0.0), 1) == 0.0);
    for (int t = 0; t < 10; ++t) {
        const auto x = random_image(rng, Grid{4, 4});
        const double l = am_loss(m, x.values(), -1);
        CHECK(l == doctest::Approx(m.forward(x)).epsilon(1e-15));
        for (const auto& g : m.group().elements()) CHECK(am_loss(m, apply(g, x).values(), -1) == l);
        auto x2 = x;
        for (double& v : x2.values()) v *= 2.0;
        CHECK(std::abs(am_loss(m, x2.values(), -1)) == doctest::Approx(2.0 * std::abs(l)).epsilon(1e-12));
    }
}

TEST_CASE("kkt_loss: zero multipliers give |theta|^2") {
    std::mt19937_64 rng(2);
    const auto m = small_model("klein4", 3);
    const std::vector<ImageTensor> c{random_image(rng, Grid{4, 4}), random_image(rng, Grid{4, 4})};
    const std::vector<double> lam{0.0, 0.0};
    const std::vector<int> y{1, -1};
    CHECK(kkt_loss(m, c, lam, y) == doctest::Approx(dot(m.params().theta(), m.params().theta())).epsilon(1e-15));
    CHECK_THROWS_AS(kkt_loss(m, c, std::vector<double>{0.0}, y), DimensionError);
}

TEST_CASE("kkt residual vector matches a direct weighted sum of gradients") {
    std::mt19937_64 rng(3);
    const auto m = small_model("flip_h", 4);
    std::vector<ImageTensor> c;
    std::vector<double> lam;
    std::vector<int> y;
    for (int i = 0; i < 5; ++i) {
        c.push_back(random_image(rng, Grid{4, 4}));
        lam.push_back(0.1 * (i + 1));
        y.push_back(i % 2 ? -1 : 1);
    }
    std::vector<double> direct(m.params().theta().begin(), m.params().theta().end());
    for (int i = 0; i < 5; ++i) {
        const auto g = grad_params(m.params(), c[i].values());
        const auto gf = grad_params(m.params(), apply(m.group()[1], c[i]).values());
        for (std::size_t k = 0; k < direct.size(); ++k) direct[k] -= lam[i] * y[i] * 0.5 * (g[k] + gf[k]);
    }
    const auto r = kkt_residual_vector(m, c, lam, y);
    CHECK(max_abs_diff(r, direct) <= 1e-13);
    CHECK(kkt_loss(m, c, lam, y) == doctest::Approx(dot(direct, direct)).epsilon(1e-12));
}

TEST_CASE("kkt_loss vanishes at the training set of a stationary model") {
    std::mt19937_64 rng(4);
    for (const char* name : {"trivial", "flip_h", "klein4", "d4"}) {
        const auto group = GroupSpec::make(name, Grid{6, 6});
        const auto xs = disjoint_invariant_samples(rng, group, 5);
        const std::vector<int> ys{1, 1, -1, -1, 1};
        const std::vector<double> lam{0.3, 1.0, 0.7, 2.0, 1.5};
        const auto model = make_stationary_model(xs, ys, lam, group, 7, 6);
        CHECK(kkt_loss(model, xs, lam, ys) <= 1e-12);
        // perturbing one multiplier moves away from stationarity
        auto lam2 = lam;
        lam2[2] *= 1.5;
        CHECK(kkt_loss(model, xs, lam2, ys) > 1e-3);
    }
}

TEST_CASE("both objectives are invariant to independent per-candidate group elements") {
    std::mt19937_64 rng(5);
    const auto m = small_model("d4", 6);
    std::vector<ImageTensor> c;
    std::vector<double> lam;
    std::vector<int> y;
    for (int i = 0; i < 6; ++i) {
        c.push_back(random_image(rng, Grid{4, 4}));
        lam.push_back(0.05 * i);
        y.push_back(i < 3 ? 1 : -1);
    }
    for (Objective o : {Objective::AM, Objective::KKT}) {
        const double base = objective_value(o, m, c, lam, y);
        for (int t = 0; t < 5; ++t) {
            auto moved = c;
            for (auto& x : moved) x = apply(m.group()[rng() % 8], x);
            CHECK(std::abs(objective_value(o, m, moved, lam, y) - base) <= 1e-9 * std::max(1.0, std::abs(base)));
        }
    }
}

TEST_CASE("objective_grad: AM gradient is -y grad_x phi") {
    std::mt19937_64 rng(6);
    const auto m = small_model("klein4", 7);
    const std::vector<ImageTensor> c{random_image(rng, Grid{4, 4}), random_image(rng, Grid{4, 4})};
    const std::vector<double> lam{0.0, 0.0};
    const std::vector<int> y{1, -1};
    const auto g = objective_grad(Objective::AM, m, c, lam, y);
    CHECK(g.loss == doctest::Approx(am_loss(m, c[0].values(), 1) + am_loss(m, c[1].values(), -1)).epsilon(1e-14));
    for (int i = 0; i < 2; ++i) {
        auto expect = m.grad_input_sym(c[i].values());
        for (double& v : expect) v *= -y[i];
        CHECK(g.grad_x[i] == expect);
    }
    CHECK(g.grad_lambda == std::vector<double>{0.0, 0.0});
}

TEST_CASE("objective_grad: KKT gradients match finite differences (m = 2)") {
    std::mt19937_64 rng(7);
    for (const char* name : {"trivial", "flip_h", "klein4"}) {
        const auto m = small_model(name, 8);
        for (int t = 0; t < 3; ++t) {
            std::vector<ImageTensor> c{off_kink(rng, m), off_kink(rng, m)};
            const std::vector<double> lam{0.4, 0.9};
            const std::vector<int> y{1, -1};
            const auto g = objective_grad(Objective::KKT, m, c, lam, y);
            CHECK(g.loss == doctest::Approx(kkt_loss(m, c, lam, y)).epsilon(1e-12));

            // analytic form: grad_x_i = mixed_vjp_sym(x_i, -2 lambda_i y_i r)
            const auto r = kkt_residual_vector(m, c, lam, y);
            for (int i = 0; i < 2; ++i) {
                std::vector<double> v(r.size());
                for (std::size_t k = 0; k < r.size(); ++k) v[k] = -2.0 * lam[i] * y[i] * r[k];
                CHECK(relative_error(g.grad_x[i], m.mixed_vjp_sym(c[i].values(), v)) <= 1e-12);
            }

            std::vector<std::size_t> all(16);
            for (std::size_t k = 0; k < 16; ++k) all[k] = k;
            for (int i = 0; i < 2; ++i) {
                const auto fd = central_differences(
                    [&](std::span<const double> z) {
                        auto cc = c;
                        cc[i] = ImageTensor(cc[i].grid(), std::vector<double>(z.begin(), z.end()));
                        return kkt_loss(m, cc, lam, y);
                    },
                    c[i].values(), all, 1e-5);
                CHECK(relative_error(fd, g.grad_x[i]) <= 1e-4);
            }
            const std::vector<std::size_t> both{0, 1};
            const auto fl = central_differences([&](std::span<const double> l) { return kkt_loss(m, c, l, y); }, lam,
                                                both, 1e-6);
            CHECK(relative_error(fl, g.grad_lambda) <= 1e-6);
        }
    }
}

}  // TEST_SUITE
