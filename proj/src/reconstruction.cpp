#include "invrec/reconstruction.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace invrec {

Projection parse_projection(std::string_view s) {
    if (s == "none") return Projection::None;
    if (s == "box01") return Projection::Box01;
    if (s == "sphere") return Projection::Sphere;
    throw std::invalid_argument("unknown projection '" + std::string(s) + "'");
}

std::string_view to_string(Projection p) {
    switch (p) {
        case Projection::None: return "none";
        case Projection::Box01: return "box01";
        case Projection::Sphere: return "sphere";
    }
    return "?";
}

PrevUpdate parse_prev_update(std::string_view s) {
    if (s == "elementwise_square") return PrevUpdate::ElementwiseSquare;
    if (s == "raw_gradient") return PrevUpdate::RawGradient;
    throw std::invalid_argument("unknown prev_update '" + std::string(s) + "'");
}

std::string_view to_string(PrevUpdate p) {
    return p == PrevUpdate::ElementwiseSquare ? "elementwise_square" : "raw_gradient";
}

void GdConfig::validate() const {
    if (steps < 0) throw std::invalid_argument("GdConfig: steps must be >= 0");
    if (!(lr > 0)) throw std::invalid_argument("GdConfig: lr must be > 0");
    if (!(lr_lambda >= 0)) throw std::invalid_argument("GdConfig: lr_lambda must be >= 0");
    if (projection == Projection::Sphere && !(radius > 0))
        throw std::invalid_argument("GdConfig: sphere radius must be > 0");
    if (!(lambda_init_max >= 0)) throw std::invalid_argument("GdConfig: lambda_init_max must be >= 0");
}

double Schedule::at(long t, long T) const {
    if (start == end || T <= 1) return start;
    const double s = static_cast<double>(t - 1) / static_cast<double>(T - 1);
    return start + (end - start) * std::clamp(s, 0.0, 1.0);
}

void SameGdConfig::validate() const {
    if (T_save < 1 || T_update < 1) throw std::invalid_argument("SameGdConfig: T_save and T_update must be >= 1");
    if (T < 0) throw std::invalid_argument("SameGdConfig: T must be >= 0");
    for (const Schedule* s : {&alpha, &beta})
        if (s->start < 0 || s->start > 1 || s->end < 0 || s->end > 1)
            throw std::invalid_argument("SameGdConfig: alpha and beta must lie in [0, 1]");
    if (!(eta.start > 0) || !(eta.end > 0)) throw std::invalid_argument("SameGdConfig: eta must be > 0");
}

ReconstructionState init_state(Grid grid, std::size_t m, double lambda_init_max, std::uint64_t seed) {
    if (m == 0) throw std::invalid_argument("init_state: m must be >= 1");
    ReconstructionState s;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> pix(0.0, 1.0 / std::sqrt(static_cast<double>(grid.size())));
    s.candidates.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        ImageTensor x(grid);
        for (std::size_t k = 0; k < x.size(); ++k) x[k] = pix(rng);
        s.candidates.push_back(std::move(x));
    }
    std::uniform_real_distribution<double> lam(0.0, lambda_init_max);
    s.lambdas.resize(m);
    for (auto& l : s.lambdas) l = lambda_init_max > 0 ? lam(rng) : 0.0;
    s.labels.resize(m);
    for (std::size_t i = 0; i < m; ++i) s.labels[i] = i < (m + 1) / 2 ? 1 : -1;
    s.x_prev = s.candidates;
    return s;
}

void project(std::span<double> x, Projection projection, double radius) {
    switch (projection) {
        case Projection::None: return;
        case Projection::Box01:
            for (double& v : x) v = std::clamp(v, 0.0, 1.0);
            return;
        case Projection::Sphere: {
            const double n = norm2(x);
            if (n > 0)
                for (double& v : x) v *= radius / n;
            return;
        }
    }
}

namespace {

void apply_gradient_step(ReconstructionState& state, const ObjectiveGrad& g, const GdConfig& config, double lr) {
    for (std::size_t i = 0; i < state.size(); ++i) {
        auto x = state.candidates[i].values();
        const auto& gx = g.grad_x[i];
        for (std::size_t k = 0; k < x.size(); ++k) x[k] -= lr * gx[k];
        project(x, config.projection, config.radius);
        for (double v : x)
            if (!std::isfinite(v)) throw DivergenceError("reconstruction: non-finite candidate", state.step);
    }
    if (config.objective == Objective::KKT)
        for (std::size_t i = 0; i < state.size(); ++i)
            state.lambdas[i] = std::max(0.0, state.lambdas[i] - config.lr_lambda * g.grad_lambda[i]);
}

ObjectiveGrad checked_grad(const InvariantModel& model, const ReconstructionState& state, const GdConfig& config) {
    auto g = objective_grad(config.objective, model, state.candidates, state.lambdas, state.labels);
    if (!std::isfinite(g.loss)) throw DivergenceError("reconstruction: non-finite objective", state.step);
    return g;
}

}  // namespace

void gd_step(const InvariantModel& model, ReconstructionState& state, const GdConfig& config) {
    auto g = checked_grad(model, state, config);
    apply_gradient_step(state, g, config, config.lr);
    ++state.step;
}

ReconstructionState reconstruct_gd_from(const InvariantModel& model, ReconstructionState state,
                                        const GdConfig& config, const StepObserver& observe) {
    config.validate();
    for (long t = 0; t < config.steps; ++t) {
        gd_step(model, state, config);
        if (observe) observe(state);
    }
    return state;
}

ReconstructionState reconstruct_gd(const InvariantModel& model, const GdConfig& config, std::size_t m,
                                   std::uint64_t seed, const StepObserver& observe) {
    config.validate();
    auto state = init_state(model.group().grid(), m, config.lambda_init_max, seed);
    return reconstruct_gd_from(model, std::move(state), config, observe);
}

ImageTensor same_gd_aggregate(const ImageTensor& x, const ImageTensor& x_prev, const GroupSpec& group,
                              double alpha) {
    require_same_grid(x, x_prev, "same_gd_aggregate");
    const ImageTensor avg = orbit_average(x_prev, group);
    ImageTensor out(x.grid());
    for (std::size_t k = 0; k < x.size(); ++k) out[k] = alpha * x[k] + (1.0 - alpha) * (x_prev[k] - avg[k]);
    return out;
}

ReconstructionState reconstruct_same_gd_from(const InvariantModel& model, ReconstructionState state,
                                             const GdConfig& base, const SameGdConfig& config,
                                             const StepObserver& observe) {
    base.validate();
    config.validate();
    if (state.x_prev.size() != state.size()) state.x_prev = state.candidates;
    const long T = config.T;
    for (long t = 1; t <= T; ++t) {
        if (t % config.T_update != 0) {
            auto g = checked_grad(model, state, base);
            apply_gradient_step(state, g, base, config.eta.at(t, T));
        } else {
            const double alpha = config.alpha.at(t, T);
            for (std::size_t i = 0; i < state.size(); ++i) {
                state.candidates[i] = same_gd_aggregate(state.candidates[i], state.x_prev[i], model.group(), alpha);
                project(state.candidates[i].values(), base.projection, base.radius);
            }
        }
        if (t % config.T_save == 0) {
            const double beta = config.beta.at(t, T);
            auto g = checked_grad(model, state, base);
            for (std::size_t i = 0; i < state.size(); ++i) {
                auto& prev = state.x_prev[i];
                const auto& x = state.candidates[i];
                const auto& gx = g.grad_x[i];
                for (std::size_t k = 0; k < x.size(); ++k) {
                    const double term = config.prev_update == PrevUpdate::ElementwiseSquare ? gx[k] * gx[k] : gx[k];
                    prev[k] = beta * x[k] + (1.0 - beta) * term;
                }
            }
        }
        ++state.step;
        if (observe) observe(state);
    }
    return state;
}

ReconstructionState reconstruct_same_gd(const InvariantModel& model, const GdConfig& base,
                                        const SameGdConfig& config, std::size_t m, std::uint64_t seed,
                                        const StepObserver& observe) {
    base.validate();
    auto state = init_state(model.group().grid(), m, base.lambda_init_max, seed);
    return reconstruct_same_gd_from(model, std::move(state), base, config, observe);
}

}  // namespace invrec
