// Times the OpenMP kernels against their serial references and checks that
// both produce identical results.
//
//   invrec-bench [repeats]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>

#include "invrec/data_io.hpp"
#include "invrec/parallel.hpp"
#include "invrec/reconstruction.hpp"
#include "invrec/reference.hpp"

using namespace invrec;

static double time_ms(int repeats, const std::function<void()>& fn) {
    fn();  // warm-up
    const auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < repeats; ++r) fn();
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count() / repeats;
}

static void report(const char* name, double par, double ser, bool same) {
    std::printf("%-22s parallel %9.3f ms  serial %9.3f ms  speedup %5.2fx  %s\n", name, par, ser, ser / par,
                same ? "identical" : "MISMATCH");
}

int main(int argc, char** argv) {
    const int repeats = argc > 1 ? std::atoi(argv[1]) : 5;
    const Grid grid{16, 16};
    const GroupSpec group = GroupSpec::make(GroupName::Dihedral4, grid);
    const InvariantModel model(ParamVector::random_init(Arch{256, 64, 64}, 1), group);
    const LabeledDataset data = synth_dataset(2, 50, grid);
    const ReconstructionState st = init_state(grid, 200, 1.0, 3);

    std::printf("threads: %d\n", max_threads());
    bool all_same = true;

    {
        ObjectiveGrad a, b;
        const double par = time_ms(repeats, [&] { a = objective_grad(Objective::KKT, model, st.candidates, st.lambdas, st.labels); });
        const double ser = time_ms(repeats, [&] {
            b = reference::objective_grad(Objective::KKT, model, st.candidates, st.lambdas, st.labels);
        });
        const bool same = a.loss == b.loss && a.grad_x == b.grad_x && a.grad_lambda == b.grad_lambda;
        all_same = all_same && same;
        report("kkt objective_grad", par, ser, same);
    }
    {
        std::vector<double> ga(model.params().size()), gb(ga.size());
        double la = 0, lb = 0;
        const double par = time_ms(repeats, [&] { la = bce_loss_and_grad(model, data, ga); });
        const double ser = time_ms(repeats, [&] { lb = reference::bce_loss_and_grad(model, data, gb); });
        const bool same = la == lb && ga == gb;
        all_same = all_same && same;
        report("bce_loss_and_grad", par, ser, same);
    }
    {
        MatchResult a, b;
        const double par = time_ms(repeats, [&] { a = match_invariant(st.candidates, data, group); });
        const double ser = time_ms(repeats, [&] { b = reference::match_invariant(st.candidates, data, group); });
        bool same = a.pair_dssim == b.pair_dssim && a.matches.size() == b.matches.size();
        for (std::size_t i = 0; same && i < a.matches.size(); ++i)
            same = a.matches[i].nn_index == b.matches[i].nn_index && a.matches[i].best_g == b.matches[i].best_g &&
                   a.matches[i].dssim == b.matches[i].dssim;
        all_same = all_same && same;
        report("match_invariant", par, ser, same);
    }
    return all_same ? 0 : 1;
}
