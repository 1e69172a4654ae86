#include "invrec/verify.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <random>

#include "invrec/dip.hpp"
#include "invrec/objectives.hpp"
#include "invrec/reconstruction.hpp"

namespace invrec {

bool VerifyReport::all_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

void VerifyReport::add(std::string name, double residual, double tolerance) {
    checks.push_back({std::move(name), residual, tolerance, std::isfinite(residual) && residual <= tolerance});
}

void VerifyReport::print(std::ostream& out) const {
    for (const auto& c : checks)
        out << (c.passed ? "[PASS] " : "[FAIL] ") << std::left << std::setw(58) << c.name << " residual="
            << std::scientific << std::setprecision(3) << c.residual << " tol=" << c.tolerance << std::defaultfloat
            << '\n';
}

double relative_error(std::span<const double> a, std::span<const double> b, double floor) {
    double num = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) num += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(num) / std::max(norm2(b), floor);
}

std::vector<double> central_differences(const std::function<double(std::span<const double>)>& f,
                                        std::span<const double> x, std::span<const std::size_t> coords,
                                        double step) {
    std::vector<double> xp(x.begin(), x.end()), out;
    out.reserve(coords.size());
    for (auto k : coords) {
        const double orig = xp[k];
        xp[k] = orig + step;
        const double fp = f(xp);
        xp[k] = orig - step;
        const double fm = f(xp);
        xp[k] = orig;
        out.push_back((fp - fm) / (2.0 * step));
    }
    return out;
}

InvariantModel make_stationary_model(const std::vector<ImageTensor>& samples, const std::vector<int>& labels,
                                     const std::vector<double>& lambdas, const GroupSpec& group, int h1, int h2) {
    const std::size_t n = samples.size();
    if (labels.size() != n || lambdas.size() != n) throw DimensionError("make_stationary_model: length mismatch");
    if (static_cast<std::size_t>(h1) < n || static_cast<std::size_t>(h2) < n)
        throw std::invalid_argument("make_stationary_model: need one hidden unit per sample in each layer");
    const int d = static_cast<int>(group.grid().size());
    ParamVector p(Arch{d, h1, h2});
    auto th = p.theta();
    for (std::size_t i = 0; i < n; ++i) {
        const auto x = samples[i].values();
        const double sq = dot(x, x);
        if (!(sq > 0) || !(lambdas[i] > 0)) throw std::invalid_argument("make_stationary_model: need x != 0, lambda > 0");
        // unit i of each layer carries sample i:
        //   W1[i,:] = s1 x^T, W2[i,i] = s1 |x|, w3[i] = y s1 |x|, s1 = 1 / (lambda |x|^2)
        const double s1 = 1.0 / (lambdas[i] * sq);
        const double nx = std::sqrt(sq);
        for (int k = 0; k < d; ++k) th[i * d + k] = s1 * x[k];
        th[p.w2_offset() + i * h1 + i] = s1 * nx;
        th[p.w3_offset() + i] = labels[i] * s1 * nx;
    }
    return InvariantModel(std::move(p), group);
}

namespace {

ImageTensor random_image(std::mt19937_64& rng, Grid grid, double scale = 1.0) {
    std::normal_distribution<double> nd(0.0, scale);
    ImageTensor x(grid);
    for (double& v : x.values()) v = nd(rng);
    return x;
}

// Images avoiding ReLU kinks by at least `margin` for every group element.
ImageTensor away_from_kinks(std::mt19937_64& rng, const InvariantModel& model, double margin) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
        ImageTensor x = random_image(rng, model.group().grid());
        bool ok = true;
        for (const auto& g : model.group().elements())
            if (min_abs_preactivation(model.params(), apply(g, x).values()) < margin) ok = false;
        if (ok) return x;
    }
    throw std::runtime_error("verify: could not sample a point away from ReLU kinks");
}

std::vector<std::size_t> sample_coords(std::mt19937_64& rng, std::size_t n, std::size_t k) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min(n, k));
    return idx;
}

std::vector<std::size_t> all_coords(std::size_t n) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    return idx;
}

ReconstructionState random_state(std::mt19937_64& rng, Grid grid, std::size_t m) {
    ReconstructionState s = init_state(grid, m, 1.0, rng());
    for (auto& c : s.candidates) c = random_image(rng, grid, 0.5);
    s.x_prev = s.candidates;
    return s;
}

}  // namespace

void verify_group(const GroupSpec& group, std::uint64_t seed, VerifyReport& report) {
    const std::string tag = "group[" + std::string(to_string(group.name())) + "] ";
    const AxiomReport ax = group.check_axioms();
    report.add(tag + "axioms (closure, identity, inverses)", ax.ok() ? 0.0 : 1.0, 0.0);
    if (!ax.ok()) return;

    std::mt19937_64 rng(seed);
    const ImageTensor x = random_image(rng, group.grid());
    double comp = 0.0, ortho = 0.0;
    for (std::size_t a = 0; a < group.order(); ++a) {
        const ImageTensor gx = apply(group[a], x);
        ortho = std::max(ortho, std::abs(norm2(gx.values()) - norm2(x.values())) / norm2(x.values()));
        for (std::size_t b = 0; b < group.order(); ++b) {
            const ImageTensor lhs = apply(group[a], apply(group[b], x));
            const ImageTensor rhs = apply(group[group.compose_index(a, b)], x);
            comp = std::max(comp, max_abs_diff(lhs.values(), rhs.values()));
        }
    }
    report.add(tag + "composition g(hx) == (gh)x", comp, 0.0);
    report.add(tag + "orthogonality | |gx| - |x| | / |x|", ortho, 1e-14);

    // orbit-stabilizer on generic, averaged and partially symmetric inputs
    std::vector<ImageTensor> probes{x, orbit_average(x, group), ImageTensor(group.grid(), std::vector<double>(x.size(), 0.3))};
    if (group.order() > 2) {
        const GroupSpec flip = GroupSpec::make(GroupName::FlipH, group.grid());
        probes.push_back(orbit_average(x, flip));
    }
    double os = 0.0;
    for (const auto& p : probes) {
        const std::size_t o = orbit(p, group).members.size();
        const std::size_t s = stabilizer_indices(p, group, 0.0).size();
        os = std::max(os, std::abs(static_cast<double>(o * s) - static_cast<double>(group.order())));
    }
    report.add(tag + "orbit-stabilizer |orb|*|stab| == |G|", os, 0.0);

    const ImageTensor y = random_image(rng, group.grid());
    report.add(tag + "invariant_distance symmetric",
               std::abs(invariant_distance(x, y, group) - invariant_distance(y, x, group)), 1e-12);
    const ImageTensor avg = orbit_average(x, group);
    report.add(tag + "orbit_average idempotent",
               max_abs_diff(orbit_average(avg, group).values(), avg.values()), 1e-15);
}

VerifyReport run_verification(const VerifyConfig& cfg) {
    VerifyReport report;
    const Grid grid{cfg.grid, cfg.grid};
    const int d = cfg.grid * cfg.grid;
    const GroupName names[] = {GroupName::Trivial, GroupName::FlipH, GroupName::Klein4, GroupName::Dihedral4};

    for (GroupName gn : names) {
        const GroupSpec group = GroupSpec::make(gn, grid);
        verify_group(group, cfg.seed, report);
        const std::string tag = std::string(to_string(gn)) + ": ";
        std::mt19937_64 rng(cfg.seed * 1000003ULL + static_cast<std::uint64_t>(gn));
        const InvariantModel model(ParamVector::random_init(Arch{d, cfg.h1, cfg.h2}, rng()), group);

        // invariance, homogeneity (degree 1 in x, degree 3 in theta), Euler
        // identities, gradient invariance/equivariance
        double inv = 0.0, hom_x = 0.0, hom_th = 0.0, euler_x = 0.0, euler_th = 0.0, gpar = 0.0, gin = 0.0;
        ParamVector doubled = model.params();
        for (double& v : doubled.theta()) v *= 2.0;
        const InvariantModel model2(doubled, group);
        for (int trial = 0; trial < cfg.fd_trials; ++trial) {
            const ImageTensor x = random_image(rng, grid);
            const double f = model.forward(x);
            ImageTensor x2 = x;
            for (double& v : x2.values()) v *= 2.0;
            hom_x = std::max(hom_x, std::abs(model.forward(x2) - 2.0 * f) / std::max(std::abs(2.0 * f), 1e-300));
            hom_th = std::max(hom_th, std::abs(model2.forward(x) - 8.0 * f) / std::max(std::abs(8.0 * f), 1e-300));
            const auto gx_sym = model.grad_input_sym(x.values());
            euler_x = std::max(euler_x, std::abs(dot(gx_sym, x.values()) - f) / std::max(std::abs(f), 1e-300));
            const auto gp = model.grad_params_sym(x.values());
            euler_th = std::max(euler_th,
                                std::abs(dot(gp, model.params().theta()) - 3.0 * f) / std::max(std::abs(3.0 * f), 1e-300));
            for (const auto& g : group.elements()) {
                const ImageTensor gx = apply(g, x);
                inv = std::max(inv, std::abs(model.forward(gx) - f) / (1.0 + std::abs(f)));
                gpar = std::max(gpar, max_abs_diff(model.grad_params_sym(gx.values()), gp));
                std::vector<double> moved(x.size());
                apply_into(g, gx_sym, moved);
                gin = std::max(gin, max_abs_diff(model.grad_input_sym(gx.values()), moved));
            }
        }
        report.add(tag + "model invariance |phi(gx)-phi(x)|/(1+|phi|)", inv, 1e-10);
        report.add(tag + "homogeneity in theta |phi(x;2t)-8phi(x;t)|/|8phi|", hom_th, 1e-9);
        report.add(tag + "homogeneity in x |phi(2x)-2phi(x)|/|2phi(x)|", hom_x, 1e-9);
        report.add(tag + "Euler <grad_theta phi, theta> == 3 phi (rel)", euler_th, 1e-8);
        report.add(tag + "Euler <grad_x phi, x> == phi (rel)", euler_x, 1e-8);
        report.add(tag + "invariant parameter gradient (inf-norm)", gpar, 1e-9);
        report.add(tag + "equivariant input gradient (inf-norm)", gin, 1e-8);

        // invariance of both reconstruction objectives under per-candidate g_i
        {
            auto st = random_state(rng, grid, cfg.candidates);
            std::uniform_int_distribution<std::size_t> pick(0, group.order() - 1);
            auto moved = st.candidates;
            for (auto& c : moved) c = apply(group[pick(rng)], c);
            for (Objective obj : {Objective::AM, Objective::KKT}) {
                const double a = objective_value(obj, model, st.candidates, st.lambdas, st.labels);
                const double b = objective_value(obj, model, moved, st.lambdas, st.labels);
                report.add(tag + "objective invariance [" + std::string(to_string(obj)) + "] (rel)",
                           std::abs(a - b) / std::max(1.0, std::abs(a)), 1e-9);
            }
        }

        // one GD step is equivariant: step(g x) == g step(x)
        for (Objective obj : {Objective::AM, Objective::KKT}) {
            GdConfig gd;
            gd.objective = obj;
            gd.lr = 1e-3;
            gd.lr_lambda = 1e-3;
            double worst = 0.0;
            for (std::size_t k = 0; k < group.order(); ++k) {
                auto st = random_state(rng, grid, cfg.candidates);
                auto moved = st;
                for (auto& c : moved.candidates) c = apply(group[k], c);
                gd_step(model, st, gd);
                gd_step(model, moved, gd);
                for (std::size_t i = 0; i < st.size(); ++i)
                    worst = std::max(worst, max_abs_diff(moved.candidates[i].values(),
                                                         apply(group[k], st.candidates[i]).values()));
                worst = std::max(worst, max_abs_diff(moved.lambdas, st.lambdas));
            }
            report.add(tag + "GD step equivariance [" + std::string(to_string(obj)) + "] (inf-norm)", worst, 1e-8);
        }

        // stabilizer nesting along long trajectories
        if (group.order() > 1) {
            for (Objective obj : {Objective::AM, Objective::KKT}) {
                GdConfig gd;
                gd.objective = obj;
                gd.steps = cfg.trajectory_steps;
                gd.lr = obj == Objective::AM ? 0.05 : 1e-3;
                gd.lr_lambda = 1e-3;
                gd.projection = obj == Objective::AM ? Projection::Box01 : Projection::None;
                auto st = init_state(grid, cfg.candidates, 1e-3, rng());
                const GroupSpec flip = GroupSpec::make(GroupName::FlipH, grid);
                for (std::size_t i = 0; i < st.size(); ++i) {
                    ImageTensor base = random_image(rng, grid, 1.0 / std::sqrt(static_cast<double>(d)));
                    // alternate fully invariant and flip-only symmetric starts
                    st.candidates[i] = (i % 2 == 0 || group.order() == 2) ? orbit_average(base, group)
                                                                          : orbit_average(base, flip);
                }
                std::vector<std::vector<std::size_t>> stabs;
                for (const auto& c : st.candidates) stabs.push_back(stabilizer_indices(c, group, 0.0));
                double worst = 0.0;
                auto observe = [&](const ReconstructionState& s) {
                    for (std::size_t i = 0; i < s.size(); ++i)
                        for (auto k : stabs[i])
                            worst = std::max(worst, max_abs_diff(apply(group[k], s.candidates[i]).values(),
                                                                 s.candidates[i].values()));
                };
                try {
                    reconstruct_gd_from(model, st, gd, observe);
                } catch (const DivergenceError&) {
                    worst = std::numeric_limits<double>::infinity();
                }
                report.add(tag + "stabilizer nesting over " + std::to_string(cfg.trajectory_steps) + " steps [" +
                               std::string(to_string(obj)) + "]",
                           worst, 1e-10);
            }
        }

        // finite-difference oracles
        double fd_in = 0.0, fd_par = 0.0, fd_mix = 0.0, fd_sym_in = 0.0, fd_sym_par = 0.0, fd_sym_mix = 0.0;
        const double h = 1e-5;
        for (int trial = 0; trial < cfg.fd_trials; ++trial) {
            const ImageTensor x = away_from_kinks(rng, model, 1e-3);
            const ParamVector& th = model.params();
            // base network at x
            if (min_abs_preactivation(th, x.values()) >= 1e-3) {
                auto an = grad_input(th, x.values());
                auto fd = central_differences([&](std::span<const double> z) { return mlp_forward(th, z); },
                                              x.values(), all_coords(x.size()), h);
                fd_in = std::max(fd_in, relative_error(fd, an));

                auto coords = sample_coords(rng, th.size(), 50);
                auto gp = grad_params(th, x.values());
                std::vector<double> an_sub;
                for (auto k : coords) an_sub.push_back(gp[k]);
                auto fdp = central_differences(
                    [&](std::span<const double> t) {
                        return mlp_forward(ParamVector(th.arch(), std::vector<double>(t.begin(), t.end())), x.values());
                    },
                    th.theta(), coords, h);
                fd_par = std::max(fd_par, relative_error(fdp, an_sub));

                std::vector<double> v(th.size());
                std::normal_distribution<double> nd(0.0, 1.0);
                for (double& e : v) e = nd(rng);
                auto mix = mixed_vjp(th, x.values(), v);
                auto fdm = central_differences(
                    [&](std::span<const double> z) { return dot(v, grad_params(th, z)); }, x.values(),
                    all_coords(x.size()), h);
                fd_mix = std::max(fd_mix, relative_error(fdm, mix));
            }
            // symmetrized model
            {
                auto an = model.grad_input_sym(x.values());
                auto fd = central_differences([&](std::span<const double> z) { return model.forward(z); }, x.values(),
                                              all_coords(x.size()), h);
                fd_sym_in = std::max(fd_sym_in, relative_error(fd, an));

                auto coords = sample_coords(rng, th.size(), 50);
                auto gp = model.grad_params_sym(x.values());
                std::vector<double> an_sub;
                for (auto k : coords) an_sub.push_back(gp[k]);
                auto fdp = central_differences(
                    [&](std::span<const double> t) {
                        InvariantModel m2(ParamVector(th.arch(), std::vector<double>(t.begin(), t.end())), group);
                        return m2.forward(x.values());
                    },
                    th.theta(), coords, h);
                fd_sym_par = std::max(fd_sym_par, relative_error(fdp, an_sub));

                std::vector<double> v(th.size());
                std::normal_distribution<double> nd(0.0, 1.0);
                for (double& e : v) e = nd(rng);
                auto mix = model.mixed_vjp_sym(x.values(), v);
                auto fdm = central_differences(
                    [&](std::span<const double> z) { return dot(v, model.grad_params_sym(z)); }, x.values(),
                    all_coords(x.size()), h);
                fd_sym_mix = std::max(fd_sym_mix, relative_error(fdm, mix));
            }
        }
        if (gn == GroupName::Trivial) {
            report.add(tag + "FD grad_input (rel, step 1e-5)", fd_in, 1e-5);
            report.add(tag + "FD grad_params, 50 coords (rel)", fd_par, 1e-5);
            report.add(tag + "FD mixed_vjp (rel)", fd_mix, 1e-4);
        }
        report.add(tag + "FD grad_input_sym (rel)", fd_sym_in, 1e-5);
        report.add(tag + "FD grad_params_sym, 50 coords (rel)", fd_sym_par, 1e-5);
        report.add(tag + "FD mixed_vjp_sym (rel)", fd_sym_mix, 1e-4);

        // KKT objective gradient w.r.t. one candidate
        {
            auto st = random_state(rng, grid, 2);
            for (auto& c : st.candidates) c = away_from_kinks(rng, model, 1e-3);
            auto g = objective_grad(Objective::KKT, model, st.candidates, st.lambdas, st.labels);
            double worst = 0.0;
            for (std::size_t i = 0; i < st.size(); ++i) {
                auto fd = central_differences(
                    [&](std::span<const double> z) {
                        auto cands = st.candidates;
                        cands[i] = ImageTensor(grid, std::vector<double>(z.begin(), z.end()));
                        return kkt_loss(model, cands, st.lambdas, st.labels);
                    },
                    st.candidates[i].values(), all_coords(static_cast<std::size_t>(d)), h);
                worst = std::max(worst, relative_error(fd, g.grad_x[i]));
            }
            report.add(tag + "FD kkt_loss candidate gradient (rel)", worst, 1e-4);
        }
    }

    // generator backward pass
    {
        std::mt19937_64 rng(cfg.seed ^ 0xABCDEF);
        const Grid g8{8, 8};
        const GroupSpec group = GroupSpec::make(GroupName::FlipH, g8);
        const InvariantModel model(ParamVector::random_init(Arch{64, cfg.h1, cfg.h2}, rng()), group);
        DipConfig dc;
        dc.latent_channels = 3;
        dc.channels = 4;
        dc.stages = 2;
        const DipGenerator gen(g8, dc, 3, rng());
        // zero biases leave exact-zero pre-activations in dead regions;
        // jitter so the finite differences see a differentiable point
        auto w = gen.init_weights(rng());
        std::normal_distribution<double> jitter(0.0, 0.1);
        for (double& v : w) v += jitter(rng);
        auto st = init_state(g8, 3, 1.0, rng());
        auto an = generated_objective_grad(model, gen, w, st, Objective::KKT);
        auto coords = sample_coords(rng, w.size(), 50);
        std::vector<double> an_sub;
        for (auto k : coords) an_sub.push_back(an[k]);
        auto fd = central_differences(
            [&](std::span<const double> ww) { return generated_objective(model, gen, ww, st, Objective::KKT); }, w,
            coords, 1e-6);
        report.add("dip: FD generator backward, 50 weights (rel)", relative_error(fd, an_sub), 1e-4);
    }
    return report;
}

}  // namespace invrec
