#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "invrec/reconstruction.hpp"

namespace invrec {

/// Maps generator weights w to m candidate images. Implementations are
/// read-only after construction and safe to call concurrently.
class CandidateGenerator {
public:
    virtual ~CandidateGenerator() = default;
    virtual Grid grid() const = 0;
    virtual std::size_t count() const = 0;
    virtual std::size_t param_count() const = 0;
    /// x_i = G_i(w)
    virtual void forward(std::size_t i, std::span<const double> w, std::span<double> x) const = 0;
    /// grad_w = (dG_i/dw)^T grad_x, overwriting grad_w.
    virtual void backward(std::size_t i, std::span<const double> w, std::span<const double> grad_x,
                          std::span<double> grad_w) const = 0;
};

struct DipConfig {
    int latent_channels = 8;
    int channels = 16;
    int stages = 3;

    void validate() const;
};

/// Untrained convolutional decoder shared by all candidates, each with its
/// own frozen latent z_i (latent_channels x H/2^stages x W/2^stages):
///   stages x [2x nearest upsample -> 3x3 conv + bias -> ReLU]
///   -> 3x3 conv + bias (1 channel) -> sigmoid.
/// Zero padding keeps spatial size through every convolution.
class DipGenerator final : public CandidateGenerator {
public:
    DipGenerator(Grid grid, DipConfig config, std::size_t m, std::uint64_t seed);

    Grid grid() const override { return grid_; }
    std::size_t count() const override { return latents_.size(); }
    std::size_t param_count() const override { return param_count_; }
    void forward(std::size_t i, std::span<const double> w, std::span<double> x) const override;
    void backward(std::size_t i, std::span<const double> w, std::span<const double> grad_x,
                  std::span<double> grad_w) const override;

    /// He-normal convolution weights, zero biases.
    std::vector<double> init_weights(std::uint64_t seed) const;
    const std::vector<double>& latent(std::size_t i) const { return latents_.at(i); }

private:
    struct Layer {
        int cin, cout, height, width;  // output spatial size
        bool upsample;
        std::size_t w_offset, b_offset;
    };

    Grid grid_;
    DipConfig config_;
    int latent_h_, latent_w_;
    std::vector<Layer> layers_;
    std::size_t param_count_ = 0;
    std::vector<std::vector<double>> latents_;
};

/// x_i = A z_i + b with fixed z_i in R^k; w = [A (d x k row-major), b (d)].
class AffineGenerator final : public CandidateGenerator {
public:
    AffineGenerator(Grid grid, std::vector<std::vector<double>> latents);

    Grid grid() const override { return grid_; }
    std::size_t count() const override { return latents_.size(); }
    std::size_t param_count() const override { return grid_.size() * k_ + grid_.size(); }
    void forward(std::size_t i, std::span<const double> w, std::span<double> x) const override;
    void backward(std::size_t i, std::span<const double> w, std::span<const double> grad_x,
                  std::span<double> grad_w) const override;

private:
    Grid grid_;
    std::size_t k_;
    std::vector<std::vector<double>> latents_;
};

struct GeneratedReconstruction {
    ReconstructionState state;     ///< candidates = G(weights) after the last step
    std::vector<double> weights;
};

/// Loss of the objective as a function of generator weights (and the
/// state's lambdas); candidates are regenerated from w.
double generated_objective(const InvariantModel& model, const CandidateGenerator& gen, std::span<const double> w,
                           const ReconstructionState& state, Objective objective);

/// Gradient of generated_objective w.r.t. w (ordered reduction over candidates).
std::vector<double> generated_objective_grad(const InvariantModel& model, const CandidateGenerator& gen,
                                             std::span<const double> w, const ReconstructionState& state,
                                             Objective objective, std::vector<double>* grad_lambda = nullptr);

/// GD on generator weights (and lambdas for KKT). Lambdas/labels are
/// initialized like init_state(seed); candidates are G(w).
GeneratedReconstruction reconstruct_generated(const InvariantModel& model, const CandidateGenerator& gen,
                                              std::vector<double> w0, const GdConfig& config, std::uint64_t seed,
                                              const StepObserver& observe = {});

/// reconstruct_generated with a DipGenerator seeded from `seed`.
GeneratedReconstruction reconstruct_dip(const InvariantModel& model, const DipConfig& dip, const GdConfig& config,
                                        std::size_t m, std::uint64_t seed, const StepObserver& observe = {});

}  // namespace invrec
