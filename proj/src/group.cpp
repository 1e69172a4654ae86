#include "invrec/group.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace invrec {

GroupName parse_group_name(std::string_view s) {
    if (s == "trivial") return GroupName::Trivial;
    if (s == "flip_h") return GroupName::FlipH;
    if (s == "klein4") return GroupName::Klein4;
    if (s == "d4") return GroupName::Dihedral4;
    throw std::invalid_argument("unknown group name '" + std::string(s) + "'");
}

std::string_view to_string(GroupName g) {
    switch (g) {
        case GroupName::Trivial: return "trivial";
        case GroupName::FlipH: return "flip_h";
        case GroupName::Klein4: return "klein4";
        case GroupName::Dihedral4: return "d4";
    }
    return "?";
}

namespace {

// Builds the permutation whose output pixel (r, c) reads source(r, c).
GroupElement from_source_map(std::string label, Grid grid,
                             const std::function<std::pair<int, int>(int, int)>& source) {
    GroupElement g{std::move(label), std::vector<int>(grid.size())};
    for (int r = 0; r < grid.height; ++r)
        for (int c = 0; c < grid.width; ++c) {
            auto [sr, sc] = source(r, c);
            g.perm[static_cast<std::size_t>(r) * grid.width + c] = sr * grid.width + sc;
        }
    return g;
}

}  // namespace

GroupSpec GroupSpec::make(GroupName name, Grid grid) {
    if (grid.height <= 0 || grid.width <= 0) throw DimensionError("GroupSpec: empty grid");
    const int H = grid.height, W = grid.width;
    std::vector<GroupElement> els;
    els.push_back(from_source_map("e", grid, [](int r, int c) { return std::pair{r, c}; }));
    auto flip_h = [&] { return from_source_map("flip_h", grid, [W](int r, int c) { return std::pair{r, W - 1 - c}; }); };
    auto flip_v = [&] { return from_source_map("flip_v", grid, [H](int r, int c) { return std::pair{H - 1 - r, c}; }); };
    auto rot180 = [&] {
        return from_source_map("rot180", grid, [H, W](int r, int c) { return std::pair{H - 1 - r, W - 1 - c}; });
    };
    switch (name) {
        case GroupName::Trivial: break;
        case GroupName::FlipH: els.push_back(flip_h()); break;
        case GroupName::Klein4:
            if (!grid.square()) throw DimensionError("klein4 requires a square grid");
            els.push_back(flip_h());
            els.push_back(flip_v());
            els.push_back(rot180());
            break;
        case GroupName::Dihedral4: {
            if (!grid.square()) throw DimensionError("d4 requires a square grid");
            const int N = H;
            els.push_back(from_source_map("rot90", grid, [N](int r, int c) { return std::pair{c, N - 1 - r}; }));
            els.push_back(rot180());
            els.push_back(from_source_map("rot270", grid, [N](int r, int c) { return std::pair{N - 1 - c, r}; }));
            els.push_back(flip_h());
            els.push_back(flip_v());
            els.push_back(from_source_map("transpose", grid, [](int r, int c) { return std::pair{c, r}; }));
            els.push_back(from_source_map("antitranspose", grid,
                                          [N](int r, int c) { return std::pair{N - 1 - c, N - 1 - r}; }));
            break;
        }
    }
    return GroupSpec(name, grid, std::move(els));
}

GroupSpec GroupSpec::from_elements(GroupName name, Grid grid, std::vector<GroupElement> elements) {
    for (const auto& g : elements)
        if (g.perm.size() != grid.size()) throw DimensionError("GroupSpec: element length does not match grid");
    return GroupSpec(name, grid, std::move(elements));
}

std::optional<std::size_t> GroupSpec::index_of(const GroupElement& g) const {
    for (std::size_t i = 0; i < elements_.size(); ++i)
        if (elements_[i].perm == g.perm) return i;
    return std::nullopt;
}

std::size_t GroupSpec::compose_index(std::size_t a, std::size_t b) const {
    auto idx = index_of(compose(elements_.at(a), elements_.at(b)));
    if (!idx) throw std::logic_error("GroupSpec: element table is not closed");
    return *idx;
}

std::size_t GroupSpec::inverse_index(std::size_t a) const {
    auto idx = index_of(inverse(elements_.at(a)));
    if (!idx) throw std::logic_error("GroupSpec: element table lacks an inverse");
    return *idx;
}

AxiomReport GroupSpec::check_axioms() const {
    AxiomReport rep;
    const std::size_t d = grid_.size();
    for (const auto& g : elements_) {
        std::vector<char> seen(d, 0);
        for (int p : g.perm) {
            if (p < 0 || static_cast<std::size_t>(p) >= d || seen[p]) {
                rep.bijective = false;
                rep.detail = "element '" + g.label + "' is not a permutation";
                return rep;
            }
            seen[p] = 1;
        }
    }
    GroupElement id{"e", std::vector<int>(d)};
    for (std::size_t i = 0; i < d; ++i) id.perm[i] = static_cast<int>(i);
    if (!index_of(id)) {
        rep.has_identity = false;
        rep.detail = "identity missing";
    }
    for (const auto& a : elements_) {
        if (!index_of(inverse(a))) {
            rep.has_inverses = false;
            rep.detail = "inverse of '" + a.label + "' missing";
        }
        for (const auto& b : elements_)
            if (!index_of(compose(a, b))) {
                rep.closed = false;
                rep.detail = "'" + a.label + "' o '" + b.label + "' not in table";
            }
    }
    return rep;
}

GroupElement compose(const GroupElement& a, const GroupElement& b) {
    if (a.perm.size() != b.perm.size()) throw DimensionError("compose: length mismatch");
    GroupElement out{a.label + "*" + b.label, std::vector<int>(a.perm.size())};
    for (std::size_t i = 0; i < a.perm.size(); ++i) out.perm[i] = b.perm[a.perm[i]];
    return out;
}

GroupElement inverse(const GroupElement& g) {
    GroupElement out{g.label + "^-1", std::vector<int>(g.perm.size())};
    for (std::size_t i = 0; i < g.perm.size(); ++i) out.perm[g.perm[i]] = static_cast<int>(i);
    return out;
}

void apply_into(const GroupElement& g, std::span<const double> x, std::span<double> out) {
    if (g.perm.size() != x.size() || out.size() != x.size()) throw DimensionError("apply: dimension mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[g.perm[i]];
}

void apply_transpose_into(const GroupElement& g, std::span<const double> y, std::span<double> out) {
    if (g.perm.size() != y.size() || out.size() != y.size()) throw DimensionError("apply: dimension mismatch");
    for (std::size_t i = 0; i < y.size(); ++i) out[g.perm[i]] = y[i];
}

ImageTensor apply(const GroupElement& g, const ImageTensor& x) {
    ImageTensor out(x.grid());
    apply_into(g, x.values(), out.values());
    return out;
}

Orbit orbit(const ImageTensor& x, const GroupSpec& group) {
    if (x.grid() != group.grid()) throw DimensionError("orbit: grid mismatch");
    Orbit o{x, {}, {}};
    for (std::size_t k = 0; k < group.order(); ++k) {
        ImageTensor gx = apply(group[k], x);
        if (std::find(o.members.begin(), o.members.end(), gx) == o.members.end()) {
            o.members.push_back(std::move(gx));
            o.element_index.push_back(k);
        }
    }
    return o;
}

ImageTensor orbit_average(const ImageTensor& x, const GroupSpec& group) {
    if (x.grid() != group.grid()) throw DimensionError("orbit_average: grid mismatch");
    ImageTensor out(x.grid());
    std::vector<double> terms(group.order());
    const double inv = 1.0 / static_cast<double>(group.order());
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t k = 0; k < group.order(); ++k) terms[k] = x[group[k].perm[i]];
        out[i] = canonical_sum(terms) * inv;
    }
    return out;
}

std::vector<std::size_t> stabilizer_indices(const ImageTensor& x, const GroupSpec& group, double tol) {
    if (tol < 0) throw std::invalid_argument("stabilizer: tol must be >= 0");
    if (x.grid() != group.grid()) throw DimensionError("stabilizer: grid mismatch");
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < group.order(); ++k) {
        const auto& perm = group[k].perm;
        double m = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[perm[i]] - x[i]));
        if (m <= tol) out.push_back(k);
    }
    return out;
}

std::vector<GroupElement> stabilizer(const ImageTensor& x, const GroupSpec& group, double tol) {
    std::vector<GroupElement> out;
    for (auto k : stabilizer_indices(x, group, tol)) out.push_back(group[k]);
    return out;
}

namespace {

void enumerate_weights(int remaining, std::size_t slot, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
    if (slot + 1 == cur.size()) {
        cur[slot] = remaining;
        out.push_back(cur);
        return;
    }
    for (int k = remaining; k >= 0; --k) {
        cur[slot] = k;
        enumerate_weights(remaining - k, slot + 1, cur, out);
    }
}

}  // namespace

std::vector<OrbitopeBin> orbitope_bins(const Orbit& orbit, int resolution) {
    if (resolution < 1) throw std::invalid_argument("orbitope_bins: resolution must be >= 1");
    if (orbit.members.empty()) throw std::invalid_argument("orbitope_bins: empty orbit");
    const std::size_t k = orbit.members.size();
    if (k == 1) return {OrbitopeBin{{resolution}, orbit.members[0]}};
    std::vector<std::vector<int>> tuples;
    std::vector<int> cur(k, 0);
    enumerate_weights(resolution, 0, cur, tuples);
    std::vector<OrbitopeBin> bins;
    bins.reserve(tuples.size());
    const double inv = 1.0 / resolution;
    for (auto& w : tuples) {
        ImageTensor p(orbit.base.grid());
        for (std::size_t j = 0; j < k; ++j) {
            if (w[j] == 0) continue;
            const double c = w[j] * inv;
            for (std::size_t i = 0; i < p.size(); ++i) p[i] += c * orbit.members[j][i];
        }
        bins.push_back(OrbitopeBin{std::move(w), std::move(p)});
    }
    return bins;
}

int default_orbitope_resolution(std::size_t orbit_size) { return orbit_size <= 2 ? 10 : 4; }

double invariant_distance(const ImageTensor& x, const ImageTensor& xp, const GroupSpec& group) {
    require_same_grid(x, xp, "invariant_distance");
    if (x.grid() != group.grid()) throw DimensionError("invariant_distance: grid mismatch");
    double best = std::numeric_limits<double>::infinity();
    for (const auto& g : group.elements()) {
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double diff = x[i] - xp[g.perm[i]];
            s += diff * diff;
        }
        best = std::min(best, s);
    }
    return std::sqrt(best);
}

}  // namespace invrec
