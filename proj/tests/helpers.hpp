#pragma once

#include <random>

#include "invrec/group.hpp"
#include "invrec/image.hpp"
#include "invrec/mlp.hpp"

namespace invrec::test {

inline ImageTensor random_image(std::mt19937_64& rng, Grid grid, double scale = 1.0) {
    std::normal_distribution<double> nd(0.0, scale);
    ImageTensor x(grid);
    for (double& v : x.values()) v = nd(rng);
    return x;
}

inline ImageTensor uniform_image(std::mt19937_64& rng, Grid grid) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ImageTensor x(grid);
    for (double& v : x.values()) v = u(rng);
    return x;
}

inline ImageTensor from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const int h = static_cast<int>(rows.size());
    const int w = static_cast<int>(rows.begin()->size());
    std::vector<double> data;
    for (const auto& r : rows) data.insert(data.end(), r.begin(), r.end());
    return ImageTensor(Grid{h, w}, std::move(data));
}

/// n invariant images with pairwise disjoint supports: averaged indicators of
/// distinct pixel orbits, each with a random positive scale.
inline std::vector<ImageTensor> disjoint_invariant_samples(std::mt19937_64& rng, const GroupSpec& group, std::size_t n) {
    std::uniform_real_distribution<double> u(0.5, 1.5);
    const Grid grid = group.grid();
    std::vector<char> used(grid.size(), 0);
    std::vector<ImageTensor> out;
    for (std::size_t p = 0; p < grid.size() && out.size() < n; ++p) {
        if (used[p]) continue;
        ImageTensor e(grid);
        e[p] = 1.0;
        ImageTensor avg = orbit_average(e, group);
        const double s = u(rng);
        for (std::size_t i = 0; i < avg.size(); ++i) {
            if (avg[i] != 0.0) used[i] = 1;
            avg[i] *= s;
        }
        out.push_back(std::move(avg));
    }
    if (out.size() < n) throw std::invalid_argument("disjoint_invariant_samples: grid too small");
    return out;
}

}  // namespace invrec::test
