#pragma once

#include <vector>

#include "invrec/image.hpp"

namespace invrec {

/// Samples with integer labels. After binarization labels are +1 / -1;
/// raw loaders keep class ids 0..9.
struct LabeledDataset {
    Grid grid;
    std::vector<ImageTensor> samples;
    std::vector<int> labels;

    std::size_t size() const noexcept { return samples.size(); }
    bool empty() const noexcept { return samples.empty(); }

    /// Throws unless sample/label counts agree and every sample is on grid.
    void validate() const;
    /// Throws unless validate() holds and every label is +1 or -1.
    void validate_binary() const;
};

}  // namespace invrec
