#include <doctest.h>

#include <cmath>
#include <sstream>

#include "helpers.hpp"
#include "invrec/verify.hpp"

using namespace invrec;

TEST_SUITE("verify") {

TEST_CASE("report bookkeeping and printing") {
    VerifyReport r;
    r.add("exact", 0.0, 0.0);
    r.add("close", 1e-12, 1e-10);
    CHECK(r.all_passed());
    r.add("nan", std::nan(""), 1.0);
    CHECK_FALSE(r.all_passed());
    CHECK_FALSE(r.checks.back().passed);
    std::ostringstream os;
    r.print(os);
    CHECK(os.str().find("[PASS] exact") != std::string::npos);
    CHECK(os.str().find("[FAIL] nan") != std::string::npos);
}

TEST_CASE("relative error and central differences") {
    const std::vector<double> a{1.0, 2.0}, b{1.0, 2.0 + 1e-6};
    CHECK(relative_error(a, b) == doctest::Approx(1e-6 / std::sqrt(1.0 + (2.0 + 1e-6) * (2.0 + 1e-6))));
    CHECK(relative_error(std::vector<double>{1e-13}, std::vector<double>{0.0}) == doctest::Approx(0.1));
    // f = x0^2 + 3 x0 x1, exact gradient (2 x0 + 3 x1, 3 x0); central differences are exact for quadratics
    const std::vector<double> x{0.5, -1.5};
    const std::vector<std::size_t> both{0, 1};
    const auto g = central_differences([](std::span<const double> v) { return v[0] * v[0] + 3.0 * v[0] * v[1]; }, x,
                                       both, 1e-3);
    CHECK(g[0] == doctest::Approx(2 * 0.5 + 3 * -1.5).epsilon(1e-10));
    CHECK(g[1] == doctest::Approx(1.5).epsilon(1e-10));
}

TEST_CASE("every group passes its structural checks") {
    for (const char* name : {"trivial", "flip_h", "klein4", "d4"}) {
        VerifyReport r;
        verify_group(GroupSpec::make(name, Grid{5, 5}), 3, r);
        CHECK(r.checks.size() >= 6);
        CHECK(r.all_passed());
    }
}

TEST_CASE("negative control: a broken group table fails the axiom check") {
    const Grid grid{3, 3};
    const auto d4 = GroupSpec::make("d4", grid);
    VerifyReport r;
    verify_group(GroupSpec::from_elements(GroupName::Dihedral4, grid, {d4[0], d4[1], d4[4]}), 1, r);
    CHECK_FALSE(r.all_passed());
    bool axioms_failed = false;
    for (const auto& c : r.checks)
        if (c.name.find("axioms") != std::string::npos) axioms_failed = !c.passed;
    CHECK(axioms_failed);
}

TEST_CASE("full suite passes on a few seeds") {
    for (std::uint64_t seed : {0u, 1u, 2u}) {
        VerifyConfig vc;
        vc.seed = seed;
        const auto r = run_verification(vc);
        CHECK(r.checks.size() > 80);
        if (!r.all_passed()) {
            std::ostringstream os;
            r.print(os);
            FAIL(os.str());
        }
    }
}

TEST_CASE("stationary construction: exact stationarity, argument checks") {
    std::mt19937_64 rng(4);
    const auto group = GroupSpec::make("d4", Grid{6, 6});
    const auto xs = invrec::test::disjoint_invariant_samples(rng, group, 3);
    const std::vector<int> ys{1, -1, 1};
    const std::vector<double> lam{0.5, 2.0, 1.0};
    const auto m = make_stationary_model(xs, ys, lam, group, 3, 3);
    std::vector<double> sum(m.params().size(), 0.0);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(ys[i] * m.forward(xs[i]) > 0.0);
        const auto g = m.grad_params_sym(xs[i].values());
        for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += lam[i] * ys[i] * g[k];
    }
    CHECK(max_abs_diff(sum, m.params().theta()) <= 1e-14);
    CHECK_THROWS_AS(make_stationary_model(xs, ys, lam, group, 2, 3), std::invalid_argument);
    CHECK_THROWS_AS(make_stationary_model(xs, {1, 1}, lam, group, 3, 3), DimensionError);
    CHECK_THROWS_AS(make_stationary_model(xs, ys, {0.5, 0.0, 1.0}, group, 3, 3), std::invalid_argument);
}

}  // TEST_SUITE
