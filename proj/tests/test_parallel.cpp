#include <doctest.h>

#include "helpers.hpp"
#include "invrec/data_io.hpp"
#include "invrec/dip.hpp"
#include "invrec/parallel.hpp"
#include "invrec/reconstruction.hpp"
#include "invrec/reference.hpp"

using namespace invrec;

namespace {

struct ThreadCount {
    int saved = omp_get_max_threads();
    explicit ThreadCount(int n) { omp_set_num_threads(n); }
    ~ThreadCount() { omp_set_num_threads(saved); }
};

bool same_matches(const MatchResult& a, const MatchResult& b) {
    if (a.pair_dssim != b.pair_dssim || a.matches.size() != b.matches.size()) return false;
    for (std::size_t i = 0; i < a.matches.size(); ++i)
        if (a.matches[i].nn_index != b.matches[i].nn_index || a.matches[i].best_g != b.matches[i].best_g ||
            a.matches[i].dssim != b.matches[i].dssim || a.matches[i].l2 != b.matches[i].l2)
            return false;
    return true;
}

}  // namespace

TEST_SUITE("parallel") {

TEST_CASE("kernels match the serial reference bit for bit at every thread count") {
    const Grid grid{8, 8};
    for (const char* name : {"flip_h", "d4"}) {
        const auto group = GroupSpec::make(name, grid);
        const InvariantModel model(ParamVector::random_init(Arch{64, 24, 16}, 1), group);
        const auto data = synth_dataset(2, 10, grid);
        const auto st = init_state(grid, 12, 1.0, 3);

        const auto ref_kkt = reference::objective_grad(Objective::KKT, model, st.candidates, st.lambdas, st.labels);
        const auto ref_am = reference::objective_grad(Objective::AM, model, st.candidates, st.lambdas, st.labels);
        std::vector<double> ref_g(model.params().size());
        const double ref_l = reference::bce_loss_and_grad(model, data, ref_g);
        const auto ref_m = reference::match_invariant(st.candidates, data, group);

        for (int threads : {1, 2, 3, 4}) {
            ThreadCount tc(threads);
            CHECK(max_threads() == threads);
            const auto k = objective_grad(Objective::KKT, model, st.candidates, st.lambdas, st.labels);
            CHECK(k.loss == ref_kkt.loss);
            CHECK(k.grad_x == ref_kkt.grad_x);
            CHECK(k.grad_lambda == ref_kkt.grad_lambda);
            const auto a = objective_grad(Objective::AM, model, st.candidates, st.lambdas, st.labels);
            CHECK(a.loss == ref_am.loss);
            CHECK(a.grad_x == ref_am.grad_x);
            std::vector<double> g(model.params().size());
            CHECK(bce_loss_and_grad(model, data, g) == ref_l);
            CHECK(g == ref_g);
            CHECK(same_matches(match_invariant(st.candidates, data, group), ref_m));
        }
    }
}

TEST_CASE("end-to-end runs do not depend on the thread count") {
    const Grid grid{8, 8};
    const auto group = GroupSpec::make("klein4", grid);
    const InvariantModel model(ParamVector::random_init(Arch{64, 16, 12}, 4), group);
    GdConfig cfg;
    cfg.steps = 30;
    cfg.lr = 1e-3;
    ReconstructionState one;
    GeneratedReconstruction dip_one;
    {
        ThreadCount tc(1);
        one = reconstruct_gd(model, cfg, 10, 5);
        dip_one = reconstruct_dip(model, DipConfig{2, 3, 2}, cfg, 6, 5);
    }
    ThreadCount tc(4);
    const auto four = reconstruct_gd(model, cfg, 10, 5);
    CHECK(four.candidates == one.candidates);
    CHECK(four.lambdas == one.lambdas);
    const auto dip_four = reconstruct_dip(model, DipConfig{2, 3, 2}, cfg, 6, 5);
    CHECK(dip_four.weights == dip_one.weights);
}

TEST_CASE("PerThread gives each thread its own slot") {
    ThreadCount tc(4);
    PerThread<int> slots;
    std::vector<int> seen(4, 0);
#pragma omp parallel num_threads(4)
    {
        slots.local() = thread_id() + 1;
#pragma omp barrier
        seen[thread_id()] = slots.local();
    }
    CHECK(seen == std::vector<int>{1, 2, 3, 4});
}

}  // TEST_SUITE
