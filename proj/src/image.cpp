#include "invrec/image.hpp"

#include <algorithm>
#include <cmath>

namespace invrec {

ImageTensor::ImageTensor(Grid grid) : grid_(grid), data_(grid.size(), 0.0) {
    if (grid.height <= 0 || grid.width <= 0) throw DimensionError("ImageTensor: empty grid");
}

ImageTensor::ImageTensor(Grid grid, std::vector<double> data) : grid_(grid), data_(std::move(data)) {
    if (grid.height <= 0 || grid.width <= 0) throw DimensionError("ImageTensor: empty grid");
    if (data_.size() != grid.size())
        throw DimensionError("ImageTensor: data length " + std::to_string(data_.size()) +
                             " does not match grid " + std::to_string(grid.height) + "x" +
                             std::to_string(grid.width));
}

void require_same_grid(const ImageTensor& a, const ImageTensor& b, const char* where) {
    if (a.grid() != b.grid()) throw DimensionError(std::string(where) + ": grid mismatch");
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionError("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> a) {
    double s = 0.0;
    for (double v : a) s += v * v;
    return std::sqrt(s);
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionError("max_abs_diff: length mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace invrec
