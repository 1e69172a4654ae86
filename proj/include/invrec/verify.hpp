#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "invrec/group.hpp"
#include "invrec/invariant_model.hpp"

namespace invrec {

struct CheckResult {
    std::string name;
    double residual = 0.0;
    double tolerance = 0.0;
    bool passed = false;
};

struct VerifyReport {
    std::vector<CheckResult> checks;

    bool all_passed() const;
    void add(std::string name, double residual, double tolerance);
    void print(std::ostream& out) const;
};

struct VerifyConfig {
    std::uint64_t seed = 0;
    int grid = 6;               ///< square side; every group is exercised on it
    int h1 = 12;
    int h2 = 12;
    std::size_t candidates = 4;
    long trajectory_steps = 1000;
    int fd_trials = 3;
};

/// Group axioms plus exact composition/orthogonality/orbit-stabilizer checks.
void verify_group(const GroupSpec& group, std::uint64_t seed, VerifyReport& report);

/// Every numerical property check for one seed across all four groups.
VerifyReport run_verification(const VerifyConfig& config);

/// Relative error ||a - b|| / max(||b||, floor).
double relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-12);

/// Central differences of f along each listed coordinate of x.
std::vector<double> central_differences(const std::function<double(std::span<const double>)>& f,
                                        std::span<const double> x, std::span<const std::size_t> coords,
                                        double step);

/// A model whose theta equals sum_i lambda_i y_i grad_theta phi(x_i; theta)
/// exactly. The samples must be G-invariant with pairwise disjoint supports
/// (nonzero pixels); requires h1, h2 >= number of samples.
InvariantModel make_stationary_model(const std::vector<ImageTensor>& samples, const std::vector<int>& labels,
                                     const std::vector<double>& lambdas, const GroupSpec& group, int h1, int h2);

}  // namespace invrec
