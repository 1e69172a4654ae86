#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "invrec/invariant_model.hpp"

namespace invrec {

enum class Objective { AM, KKT };

Objective parse_objective(std::string_view s);
std::string_view to_string(Objective o);

/// -y * phi(x); minimized. Scalar-output form of activation maximization.
double am_loss(const InvariantModel& model, std::span<const double> x, int y);

/// theta - sum_i lambda_i y_i grad_theta phi(x_i)
std::vector<double> kkt_residual_vector(const InvariantModel& model, const std::vector<ImageTensor>& candidates,
                                        std::span<const double> lambdas, std::span<const int> labels);

/// ||theta - sum_i lambda_i y_i grad_theta phi(x_i)||^2
double kkt_loss(const InvariantModel& model, const std::vector<ImageTensor>& candidates,
                std::span<const double> lambdas, std::span<const int> labels);

/// Loss and gradients of the full reconstruction objective. For AM the loss
/// is the sum of per-candidate am_loss values and grad_lambda is all zero.
struct ObjectiveGrad {
    double loss = 0.0;
    std::vector<std::vector<double>> grad_x;
    std::vector<double> grad_lambda;
};

/// OpenMP kernel: parallel over candidates and parameter coordinates, with
/// every reduction done in candidate order so results do not depend on the
/// thread count.
ObjectiveGrad objective_grad(Objective objective, const InvariantModel& model,
                             const std::vector<ImageTensor>& candidates, std::span<const double> lambdas,
                             std::span<const int> labels);

double objective_value(Objective objective, const InvariantModel& model, const std::vector<ImageTensor>& candidates,
                       std::span<const double> lambdas, std::span<const int> labels);

}  // namespace invrec
