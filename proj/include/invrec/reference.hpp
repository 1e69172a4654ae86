#pragma once

// Serial reference versions of the OpenMP kernels. They perform the same
// arithmetic in the same order, so parallel results must match bit for bit.

#include "invrec/evaluation.hpp"
#include "invrec/objectives.hpp"
#include "invrec/trainer.hpp"

namespace invrec::reference {

ObjectiveGrad objective_grad(Objective objective, const InvariantModel& model,
                             const std::vector<ImageTensor>& candidates, std::span<const double> lambdas,
                             std::span<const int> labels);

double bce_loss_and_grad(const InvariantModel& model, const LabeledDataset& data, std::span<double> grad);

MatchResult match_invariant(const std::vector<ImageTensor>& candidates, const LabeledDataset& data,
                            const GroupSpec& group);

}  // namespace invrec::reference
