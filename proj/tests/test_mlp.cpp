#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "invrec/mlp.hpp"
#include "invrec/verify.hpp"

using namespace invrec;
using invrec::test::random_image;

namespace {

// Independent forward pass written against the documented flattening order.
double naive_forward(const ParamVector& p, std::span<const double> x) {
    const Arch a = p.arch();
    const auto th = p.theta();
    std::vector<double> h1(a.h1), h2(a.h2);
    for (int j = 0; j < a.h1; ++j) {
        double s = 0.0;
        for (int i = 0; i < a.d; ++i) s += th[j * a.d + i] * x[i];
        h1[j] = std::max(0.0, s);
    }
    const std::size_t o2 = static_cast<std::size_t>(a.h1) * a.d;
    for (int k = 0; k < a.h2; ++k) {
        double s = 0.0;
        for (int j = 0; j < a.h1; ++j) s += th[o2 + k * a.h1 + j] * h1[j];
        h2[k] = std::max(0.0, s);
    }
    const std::size_t o3 = o2 + static_cast<std::size_t>(a.h2) * a.h1;
    double out = 0.0;
    for (int k = 0; k < a.h2; ++k) out += th[o3 + k] * h2[k];
    return out;
}

// x drawn away from every ReLU kink
std::vector<double> safe_input(std::mt19937_64& rng, const ParamVector& p) {
    for (;;) {
        auto x = random_image(rng, Grid{1, p.arch().d}).vec();
        if (min_abs_preactivation(p, x) > 1e-3) return x;
    }
}

ParamVector identity_net(int d, std::vector<double> w) {
    ParamVector p(Arch{d, d, d});
    auto th = p.theta();
    for (int i = 0; i < d; ++i) {
        th[i * d + i] = 1.0;
        th[p.w2_offset() + i * d + i] = 1.0;
        th[p.w3_offset() + i] = w[i];
    }
    return p;
}

}  // namespace

TEST_SUITE("mlp") {

TEST_CASE("layout and parameter count") {
    const Arch a{6, 4, 3};
    CHECK(a.param_count() == 6 * 4 + 4 * 3 + 3);
    const ParamVector p = ParamVector::random_init(a, 1);
    CHECK(p.size() == a.param_count());
    CHECK(p.w2_offset() == 24);
    CHECK(p.w3_offset() == 36);
    CHECK(p.w1().size() == 24);
    CHECK(p.w2().size() == 12);
    CHECK(p.w3().size() == 3);
    CHECK(ParamVector::random_init(a, 1) == p);
    CHECK_FALSE(ParamVector::random_init(a, 2) == p);
    CHECK_THROWS_AS(ParamVector(a, std::vector<double>(5)), DimensionError);
}

TEST_CASE("random init has per-layer 1/sqrt(fan_in) scale") {
    const Arch a{400, 300, 200};
    const ParamVector p = ParamVector::random_init(a, 3);
    auto var = [](std::span<const double> v) {
        double s = 0.0;
        for (double x : v) s += x * x;
        return s / static_cast<double>(v.size());
    };
    CHECK(var(p.w1()) == doctest::Approx(1.0 / 400).epsilon(0.05));
    CHECK(var(p.w2()) == doctest::Approx(1.0 / 300).epsilon(0.05));
    CHECK(var(p.w3()) == doctest::Approx(1.0 / 200).epsilon(0.25));
}

TEST_CASE("forward: zero cases, naive reference, shape errors") {
    std::mt19937_64 rng(1);
    const Arch a{9, 7, 5};
    const ParamVector p = ParamVector::random_init(a, 4);
    const auto x = random_image(rng, Grid{3, 3}).vec();
    CHECK(mlp_forward(ParamVector(a), x) == 0.0);
    CHECK(mlp_forward(p, std::vector<double>(9, 0.0)) == 0.0);
    CHECK(mlp_forward(p, x) == doctest::Approx(naive_forward(p, x)).epsilon(1e-13));
    CHECK_THROWS_AS(mlp_forward(p, std::vector<double>(8)), DimensionError);
}

TEST_CASE("homogeneity: degree 1 in x, degree 3 in theta") {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 10; ++t) {
        const ParamVector p = ParamVector::random_init(Arch{16, 10, 8}, 100 + t);
        auto x = random_image(rng, Grid{4, 4}).vec();
        const double f = mlp_forward(p, x);
        auto x2 = x;
        for (double& v : x2) v *= 2.0;
        CHECK(std::abs(mlp_forward(p, x2) - 2.0 * f) <= 1e-9 * std::abs(2.0 * f) + 1e-300);
        ParamVector p2 = p;
        for (double& v : p2.theta()) v *= 2.0;
        CHECK(std::abs(mlp_forward(p2, x) - 8.0 * f) <= 1e-9 * std::abs(8.0 * f) + 1e-300);
        const auto gx = grad_input(p, x);
        CHECK(dot(gx, x) == doctest::Approx(f).epsilon(1e-8));
        const auto gp = grad_params(p, x);
        CHECK(dot(gp, p.theta()) == doctest::Approx(3.0 * f).epsilon(1e-8));
    }
}

TEST_CASE("forward record masks are exactly pre-activation > 0") {
    std::mt19937_64 rng(3);
    const ParamVector p = ParamVector::random_init(Arch{16, 12, 12}, 5);
    EvalRecord rec;
    forward_record(p, random_image(rng, Grid{4, 4}).vec(), rec);
    for (std::size_t j = 0; j < rec.z1.size(); ++j) CHECK(rec.mask1[j] == (rec.z1[j] > 0.0));
    for (std::size_t k = 0; k < rec.z2.size(); ++k) CHECK(rec.mask2[k] == (rec.z2[k] > 0.0));
}

TEST_CASE("grad_input: zero params, identity net, finite differences") {
    std::mt19937_64 rng(4);
    CHECK(grad_input(ParamVector(Arch{4, 3, 2}), std::vector<double>{1, 2, 3, 4}) == std::vector<double>(4, 0.0));

    const std::vector<double> w{0.5, -1.0, 2.0, 3.0};
    const ParamVector id = identity_net(4, w);
    const std::vector<double> x{1.0, -2.0, 0.5, 0.0};
    CHECK(grad_input(id, x) == std::vector<double>{0.5, 0.0, 2.0, 0.0});  // relu'(0) = 0

    for (int t = 0; t < 20; ++t) {
        const ParamVector p = ParamVector::random_init(Arch{12, 9, 7}, 200 + t);
        const auto xs = safe_input(rng, p);
        std::vector<std::size_t> all(xs.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        const auto fd = central_differences([&](std::span<const double> z) { return mlp_forward(p, z); }, xs, all, 1e-5);
        CHECK(relative_error(fd, grad_input(p, xs)) <= 1e-5);
    }
}

TEST_CASE("grad_params: zero input, directional probe, finite differences") {
    std::mt19937_64 rng(5);
    const ParamVector p = ParamVector::random_init(Arch{12, 9, 7}, 6);
    CHECK(grad_params(p, std::vector<double>(12, 0.0)) == std::vector<double>(p.size(), 0.0));

    auto x = safe_input(rng, p);
    while (mlp_forward(p, x) == 0.0) x = safe_input(rng, p);  // need an active path
    const auto g = grad_params(p, x);
    ParamVector moved = p;
    const double eps = 1e-6;
    for (std::size_t k = 0; k < g.size(); ++k) moved.theta()[k] += eps * g[k];
    const double gain = mlp_forward(moved, x) - mlp_forward(p, x);
    CHECK(gain > 0.0);
    CHECK(gain == doctest::Approx(eps * dot(g, g)).epsilon(1e-4));

    for (int t = 0; t < 20; ++t) {
        const ParamVector q = ParamVector::random_init(Arch{12, 9, 7}, 300 + t);
        const auto xs = safe_input(rng, q);
        std::vector<std::size_t> coords;
        for (std::size_t k = 0; k < 50; ++k) coords.push_back((k * 37 + t) % q.size());
        const auto an = grad_params(q, xs);
        std::vector<double> sub;
        for (auto k : coords) sub.push_back(an[k]);
        const auto fd = central_differences(
            [&](std::span<const double> th) {
                return mlp_forward(ParamVector(q.arch(), std::vector<double>(th.begin(), th.end())), xs);
            },
            q.theta(), coords, 1e-5);
        CHECK(relative_error(fd, sub) <= 1e-5);
    }
}

TEST_CASE("mixed_vjp: zero v, linear identity case, finite differences") {
    std::mt19937_64 rng(6);
    const ParamVector p = ParamVector::random_init(Arch{12, 9, 7}, 7);
    const auto x = safe_input(rng, p);
    CHECK(mixed_vjp(p, x, std::vector<double>(p.size(), 0.0)) == std::vector<double>(12, 0.0));
    CHECK_THROWS_AS(mixed_vjp(p, x, std::vector<double>(3)), DimensionError);

    // identity hidden maps on a positive input: <v, grad phi> = v3 . x
    const ParamVector id = identity_net(4, {1.0, 1.0, 1.0, 1.0});
    const std::vector<double> xp{0.3, 0.7, 1.1, 0.2};
    std::vector<double> v(id.size(), 0.0);
    const std::vector<double> v3{0.5, -2.0, 1.5, 4.0};
    for (int k = 0; k < 4; ++k) v[id.w3_offset() + k] = v3[k];
    CHECK(mixed_vjp(id, xp, v) == v3);

    for (int t = 0; t < 20; ++t) {
        const ParamVector q = ParamVector::random_init(Arch{12, 9, 7}, 400 + t);
        const auto xs = safe_input(rng, q);
        std::vector<double> vv(q.size());
        std::normal_distribution<double> nd;
        for (double& e : vv) e = nd(rng);
        std::vector<std::size_t> all(xs.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        const auto fd = central_differences([&](std::span<const double> z) { return dot(vv, grad_params(q, z)); }, xs,
                                            all, 1e-5);
        CHECK(relative_error(fd, mixed_vjp(q, xs, vv)) <= 1e-4);
    }
}

}  // TEST_SUITE
