#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "invrec/image.hpp"

namespace invrec {

enum class GroupName { Trivial, FlipH, Klein4, Dihedral4 };

/// Config spelling: "trivial" | "flip_h" | "klein4" | "d4".
GroupName parse_group_name(std::string_view s);
std::string_view to_string(GroupName g);

/// A pixel permutation; apply() reads out[i] = x[perm[i]].
struct GroupElement {
    std::string label;
    std::vector<int> perm;

    friend bool operator==(const GroupElement& a, const GroupElement& b) { return a.perm == b.perm; }
};

/// Result of checking the group axioms on an element table.
struct AxiomReport {
    bool bijective = true;
    bool has_identity = true;
    bool closed = true;
    bool has_inverses = true;
    std::string detail;

    bool ok() const { return bijective && has_identity && closed && has_inverses; }
};

/// A finite group acting on an H x W pixel grid by permutations.
///
/// Element order is fixed: identity first, then
///   flip_h:  flip_h
///   klein4:  flip_h, flip_v, rot180
///   d4:      rot90, rot180, rot270, flip_h, flip_v, transpose, antitranspose
/// Klein4 and D4 are only built for square grids.
class GroupSpec {
public:
    static GroupSpec make(GroupName name, Grid grid);
    static GroupSpec make(std::string_view name, Grid grid) { return make(parse_group_name(name), grid); }

    /// Unchecked construction from an explicit element table (test fixtures,
    /// negative controls). Use check_axioms() to validate.
    static GroupSpec from_elements(GroupName name, Grid grid, std::vector<GroupElement> elements);

    GroupName name() const noexcept { return name_; }
    const Grid& grid() const noexcept { return grid_; }
    const std::vector<GroupElement>& elements() const noexcept { return elements_; }
    std::size_t order() const noexcept { return elements_.size(); }
    const GroupElement& operator[](std::size_t i) const { return elements_[i]; }

    std::optional<std::size_t> index_of(const GroupElement& g) const;
    /// Index of the element whose action equals apply(a, apply(b, .)).
    std::size_t compose_index(std::size_t a, std::size_t b) const;
    std::size_t inverse_index(std::size_t a) const;

    AxiomReport check_axioms() const;

private:
    GroupSpec(GroupName name, Grid grid, std::vector<GroupElement> elements)
        : name_(name), grid_(grid), elements_(std::move(elements)) {}

    GroupName name_;
    Grid grid_;
    std::vector<GroupElement> elements_;
};

/// The element acting as apply(a, apply(b, x)).
GroupElement compose(const GroupElement& a, const GroupElement& b);
GroupElement inverse(const GroupElement& g);

ImageTensor apply(const GroupElement& g, const ImageTensor& x);
/// apply() for raw vectors: out[i] = x[perm[i]].
void apply_into(const GroupElement& g, std::span<const double> x, std::span<double> out);
/// Transpose action: out[perm[i]] = y[i]. Equals apply(inverse(g), y).
void apply_transpose_into(const GroupElement& g, std::span<const double> y, std::span<double> out);

struct Orbit {
    ImageTensor base;
    std::vector<ImageTensor> members;
    /// members[k] == apply(G[element_index[k]], base)
    std::vector<std::size_t> element_index;
};

Orbit orbit(const ImageTensor& x, const GroupSpec& group);
ImageTensor orbit_average(const ImageTensor& x, const GroupSpec& group);
std::vector<std::size_t> stabilizer_indices(const ImageTensor& x, const GroupSpec& group, double tol = 0.0);
std::vector<GroupElement> stabilizer(const ImageTensor& x, const GroupSpec& group, double tol = 0.0);

/// One lattice point of the discretized orbitope: sum_k weights[k]/resolution * members[k].
struct OrbitopeBin {
    std::vector<int> weights;
    ImageTensor point;
};

/// Every convex combination with weights k_j / resolution, k_j >= 0 integers
/// summing to resolution, in descending lexicographic order of the weight
/// tuple (first vertex first).
std::vector<OrbitopeBin> orbitope_bins(const Orbit& orbit, int resolution);

/// Default orbitope lattice resolution for an orbit of the given size.
int default_orbitope_resolution(std::size_t orbit_size);

/// min over g of ||x - g x'||_2
double invariant_distance(const ImageTensor& x, const ImageTensor& xp, const GroupSpec& group);

}  // namespace invrec
