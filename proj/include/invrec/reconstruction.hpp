#pragma once

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "invrec/objectives.hpp"

namespace invrec {

/// Candidate constraint applied after every candidate update. All options
/// act pixelwise or through the norm, so they commute with pixel permutations.
enum class Projection { None, Box01, Sphere };

Projection parse_projection(std::string_view s);
std::string_view to_string(Projection p);

struct ReconstructionState {
    std::vector<ImageTensor> candidates;
    std::vector<double> lambdas;   ///< >= 0 after every update
    std::vector<int> labels;       ///< +1 / -1, fixed for the run
    std::vector<ImageTensor> x_prev;  ///< SAME-GD memory
    long step = 0;

    std::size_t size() const noexcept { return candidates.size(); }
};

struct GdConfig {
    Objective objective = Objective::KKT;
    long steps = 1000;
    double lr = 0.01;          ///< candidate step
    double lr_lambda = 0.01;   ///< dual step (KKT only)
    Projection projection = Projection::None;
    double radius = 1.0;       ///< Sphere projection radius
    double lambda_init_max = 1e-3;

    void validate() const;
};

/// m candidates drawn iid N(0, 1/d) per pixel, lambdas uniform in
/// [0, lambda_init_max], labels split evenly (first ceil(m/2) are +1).
ReconstructionState init_state(Grid grid, std::size_t m, double lambda_init_max, std::uint64_t seed);

/// Optional per-step observer (state after the update).
using StepObserver = std::function<void(const ReconstructionState&)>;

/// One plain GD step on candidates and (for KKT) lambdas.
void gd_step(const InvariantModel& model, ReconstructionState& state, const GdConfig& config);

/// Plain GD from an explicit starting state.
ReconstructionState reconstruct_gd_from(const InvariantModel& model, ReconstructionState state,
                                        const GdConfig& config, const StepObserver& observe = {});

ReconstructionState reconstruct_gd(const InvariantModel& model, const GdConfig& config, std::size_t m,
                                   std::uint64_t seed, const StepObserver& observe = {});

/// Linear interpolation from `start` (t = 1) to `end` (t = T); constant when equal.
struct Schedule {
    double start = 0.0;
    double end = 0.0;

    static Schedule constant(double v) { return {v, v}; }
    double at(long t, long T) const;
};

enum class PrevUpdate { ElementwiseSquare, RawGradient };

PrevUpdate parse_prev_update(std::string_view s);
std::string_view to_string(PrevUpdate p);

struct SameGdConfig {
    Schedule eta = Schedule::constant(0.01);
    Schedule alpha = Schedule::constant(0.9);
    Schedule beta = Schedule::constant(0.9);
    long T_save = 50;
    long T_update = 10;
    long T = 1000;
    PrevUpdate prev_update = PrevUpdate::ElementwiseSquare;

    void validate() const;
};

/// Symmetry-aware memory-enhanced GD, per candidate:
///   t % T_update != 0:  x_t = x_{t-1} - eta_t grad L(x_{t-1})   (lambdas step too)
///   otherwise:          x_t = alpha_t x_{t-1} + (1 - alpha_t)(x_prev - avg_G x_prev)
///   t % T_save == 0:    x_prev = beta_t x_t + (1 - beta_t) grad L(x_t)^2
/// `base` supplies objective, lambda step, projection and initialization.
ReconstructionState reconstruct_same_gd_from(const InvariantModel& model, ReconstructionState state,
                                             const GdConfig& base, const SameGdConfig& config,
                                             const StepObserver& observe = {});

ReconstructionState reconstruct_same_gd(const InvariantModel& model, const GdConfig& base,
                                        const SameGdConfig& config, std::size_t m, std::uint64_t seed,
                                        const StepObserver& observe = {});

/// The aggregation move on its own, for one candidate.
ImageTensor same_gd_aggregate(const ImageTensor& x, const ImageTensor& x_prev, const GroupSpec& group, double alpha);

/// Project onto the configured constraint set in place.
void project(std::span<double> x, Projection projection, double radius);

}  // namespace invrec
