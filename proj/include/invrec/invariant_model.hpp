#pragma once

#include <span>
#include <vector>

#include "invrec/group.hpp"
#include "invrec/mlp.hpp"

namespace invrec {

/// Scratch buffers for the symmetrized passes; one per thread.
struct SymWorkspace {
    EvalRecord rec;
    std::vector<double> gx;
    std::vector<std::vector<double>> terms;
    std::vector<double> scalars;
    std::vector<double> column;
};

/// Reynolds-symmetrized MLP: phi(x) = 1/|G| sum_g phi~(g x).
///
/// Every group average is reduced with canonical_sum(), so the symmetrized
/// value and gradients are exactly (bitwise) invariant / equivariant for
/// permutation actions, not just up to rounding.
class InvariantModel {
public:
    InvariantModel(ParamVector params, GroupSpec group);

    const ParamVector& params() const noexcept { return params_; }
    ParamVector& mutable_params() noexcept { return params_; }
    const GroupSpec& group() const noexcept { return group_; }
    const Arch& arch() const noexcept { return params_.arch(); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(params_.arch().d); }

    double forward(std::span<const double> x) const;
    double forward(std::span<const double> x, SymWorkspace& ws) const;
    double forward(const ImageTensor& x) const { return forward(x.values()); }

    /// grad_theta phi(x) into out (length p); returns phi(x).
    double grad_params_sym(std::span<const double> x, std::span<double> out, SymWorkspace& ws) const;
    std::vector<double> grad_params_sym(std::span<const double> x) const;

    /// grad_x phi(x) = 1/|G| sum_g g^T grad phi~(g x)
    void grad_input_sym(std::span<const double> x, std::span<double> out, SymWorkspace& ws) const;
    std::vector<double> grad_input_sym(std::span<const double> x) const;

    /// grad_x <v, grad_theta phi(x)>
    void mixed_vjp_sym(std::span<const double> x, std::span<const double> v, std::span<double> out,
                       SymWorkspace& ws) const;
    std::vector<double> mixed_vjp_sym(std::span<const double> x, std::span<const double> v) const;

private:
    void check_dim(std::span<const double> x) const;
    // out[i] = canonical_sum_k terms[k][i] / |G|
    void reduce_terms(SymWorkspace& ws, std::span<double> out) const;

    ParamVector params_;
    GroupSpec group_;
};

}  // namespace invrec
