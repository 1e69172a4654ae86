#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace invrec {

/// Raised when operand shapes disagree (grid, vector length, architecture).
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised by readers when a file does not follow its declared format.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when an optimizer produces a non-finite value; carries the step.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, long step)
        : std::runtime_error(what + " at step " + std::to_string(step)), step_(step) {}
    long step() const noexcept { return step_; }

private:
    long step_;
};

struct Grid {
    int height = 0;
    int width = 0;

    std::size_t size() const noexcept { return static_cast<std::size_t>(height) * width; }
    bool square() const noexcept { return height == width; }
    friend bool operator==(const Grid&, const Grid&) = default;
};

/// Flattened row-major image: pixel (r, c) lives at index r * width + c.
class ImageTensor {
public:
    ImageTensor() = default;
    explicit ImageTensor(Grid grid);
    ImageTensor(Grid grid, std::vector<double> data);

    const Grid& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return data_.size(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& at(int r, int c) { return data_[static_cast<std::size_t>(r) * grid_.width + c]; }
    double at(int r, int c) const { return data_[static_cast<std::size_t>(r) * grid_.width + c]; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    const std::vector<double>& vec() const noexcept { return data_; }

    friend bool operator==(const ImageTensor&, const ImageTensor&) = default;

private:
    Grid grid_;
    std::vector<double> data_;
};

void require_same_grid(const ImageTensor& a, const ImageTensor& b, const char* where);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double max_abs_diff(std::span<const double> a, std::span<const double> b);

/// Sum of a handful of terms in sorted order, so the result does not depend
/// on the order in which the terms are supplied. Reorders `terms`.
inline double canonical_sum(std::span<double> terms) {
    const std::size_t n = terms.size();
    if (n == 0) return 0.0;
    if (n == 1) return terms[0];
    if (n == 2) return terms[0] + terms[1];
    for (std::size_t i = 1; i < n; ++i) {
        const double v = terms[i];
        std::size_t j = i;
        for (; j > 0 && terms[j - 1] > v; --j) terms[j] = terms[j - 1];
        terms[j] = v;
    }
    double s = 0.0;
    for (double t : terms) s += t;
    return s;
}

}  // namespace invrec
