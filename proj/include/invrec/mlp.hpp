#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "invrec/image.hpp"

namespace invrec {

/// Bias-free MLP shape: x in R^d -> h1 -> h2 -> scalar.
struct Arch {
    int d = 0;
    int h1 = 0;
    int h2 = 0;

    std::size_t param_count() const noexcept {
        return static_cast<std::size_t>(h1) * d + static_cast<std::size_t>(h2) * h1 + h2;
    }
    friend bool operator==(const Arch&, const Arch&) = default;
};

/// Flat parameters theta, layer-major and row-major within each layer:
/// W1 (h1 x d), then W2 (h2 x h1), then w3 (h2).
class ParamVector {
public:
    ParamVector() = default;
    explicit ParamVector(Arch arch);
    ParamVector(Arch arch, std::vector<double> theta);

    const Arch& arch() const noexcept { return arch_; }
    std::size_t size() const noexcept { return theta_.size(); }

    std::span<double> theta() noexcept { return theta_; }
    std::span<const double> theta() const noexcept { return theta_; }
    const std::vector<double>& vec() const noexcept { return theta_; }

    std::span<const double> w1() const noexcept { return {theta_.data(), w2_offset()}; }
    std::span<const double> w2() const noexcept {
        return {theta_.data() + w2_offset(), static_cast<std::size_t>(arch_.h2) * arch_.h1};
    }
    std::span<const double> w3() const noexcept { return {theta_.data() + w3_offset(), static_cast<std::size_t>(arch_.h2)}; }
    std::size_t w2_offset() const noexcept { return static_cast<std::size_t>(arch_.h1) * arch_.d; }
    std::size_t w3_offset() const noexcept { return w2_offset() + static_cast<std::size_t>(arch_.h2) * arch_.h1; }

    /// Zero-mean Gaussian init with std 1/sqrt(fan_in) per layer.
    static ParamVector random_init(Arch arch, std::uint64_t seed);

    friend bool operator==(const ParamVector&, const ParamVector&) = default;

private:
    Arch arch_;
    std::vector<double> theta_;
};

/// Cached forward pass for one input. mask[k] is exactly (pre-activation > 0).
struct EvalRecord {
    std::vector<double> z1, a1, z2, a2;
    std::vector<char> mask1, mask2;
    double output = 0.0;
};

void forward_record(const ParamVector& theta, std::span<const double> x, EvalRecord& rec);

/// w3 . relu(W2 relu(W1 x))
double mlp_forward(const ParamVector& theta, std::span<const double> x);

/// Gradient w.r.t. the input; relu'(0) = 0.
std::vector<double> grad_input(const ParamVector& theta, std::span<const double> x);
void grad_input_into(const ParamVector& theta, std::span<const double> x, std::span<double> out, EvalRecord& rec);

/// Gradient w.r.t. theta in ParamVector order. Returns the forward value.
std::vector<double> grad_params(const ParamVector& theta, std::span<const double> x);
double grad_params_into(const ParamVector& theta, std::span<const double> x, std::span<double> out, EvalRecord& rec);

/// grad_x <v, grad_theta phi(x)> with the ReLU masks of x held fixed (exact
/// almost everywhere since the network is piecewise multilinear).
std::vector<double> mixed_vjp(const ParamVector& theta, std::span<const double> x, std::span<const double> v);
void mixed_vjp_into(const ParamVector& theta, std::span<const double> x, std::span<const double> v,
                    std::span<double> out, EvalRecord& rec);

/// Smallest |pre-activation| over both hidden layers; finite-difference
/// checks skip points closer than their step to a kink.
double min_abs_preactivation(const ParamVector& theta, std::span<const double> x);

}  // namespace invrec
