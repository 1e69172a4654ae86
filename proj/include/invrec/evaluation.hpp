#pragma once

#include <map>
#include <string_view>
#include <vector>

#include "invrec/dataset.hpp"
#include "invrec/group.hpp"

namespace invrec {

/// SSIM constants: 7x7 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
/// data range 1. Only windows fully inside the image are averaged; images
/// smaller than 7 pixels on a side use the largest odd window that fits.
struct SsimParams {
    int window = 7;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double data_range = 1.0;
};

/// Per-window first and second moments of one image.
struct SsimStats {
    std::vector<double> mean;
    std::vector<double> mean_sq;
};

class SsimKernel {
public:
    explicit SsimKernel(Grid grid, SsimParams params = {});

    SsimStats stats(std::span<const double> img) const;
    /// Mean SSIM; a/b must be the images the stats were computed from.
    double ssim(std::span<const double> a, const SsimStats& sa, std::span<const double> b, const SsimStats& sb) const;
    double ssim(std::span<const double> a, std::span<const double> b) const;

    const Grid& grid() const noexcept { return grid_; }
    int window() const noexcept { return win_; }
    const std::vector<double>& weights() const noexcept { return weights_; }

private:
    Grid grid_;
    SsimParams params_;
    int win_;
    int out_h_, out_w_;
    std::vector<double> weights_;  // win x win, sums to 1
};

double ssim(const ImageTensor& a, const ImageTensor& b);
/// (1 - SSIM) / 2; in [0, 1] for images in [0, 1].
double dssim(const ImageTensor& a, const ImageTensor& b);

/// How candidates are mapped into [0, 1] before evaluation.
enum class Normalization { None, MinMax, Clip };

Normalization parse_normalization(std::string_view s);
std::string_view to_string(Normalization n);

/// Per-candidate min-max scaling to [0, 1] (constant images map to 0.5).
ImageTensor normalize(const ImageTensor& x, Normalization mode);

struct Match {
    std::size_t nn_index = 0;
    std::size_t best_g = 0;  ///< index into the group's element list
    double dssim = 0.0;
    double l2 = 0.0;          ///< ||candidate - best_g * sample||
};

struct MatchResult {
    std::vector<Match> matches;
    /// pair_dssim[c][j] = min_g dssim(candidate c, g * sample j)
    std::vector<std::vector<double>> pair_dssim;
};

/// For every candidate, the (sample, group element) pair minimizing DSSIM;
/// ties go to the lower sample index, then the earlier group element.
/// OpenMP-parallel over candidates.
MatchResult match_invariant(const std::vector<ImageTensor>& candidates, const LabeledDataset& data,
                            const GroupSpec& group);

/// Each sample's best matched candidate DSSIM, averaged over samples; a
/// sample no candidate matched contributes the worst pair_dssim against it.
double mean_dssim(const MatchResult& result, std::size_t n_samples);

using OrbitopeHistogram = std::map<std::vector<int>, std::size_t>;

/// Histogram of nearest orbitope lattice points: every candidate is
/// assigned to the Euclidean-nearest bin of its matched sample's orbitope.
/// resolution <= 0 selects default_orbitope_resolution(|orbit|).
OrbitopeHistogram orbitope_histogram(const std::vector<ImageTensor>& candidates, const LabeledDataset& data,
                                     const GroupSpec& group, const std::vector<Match>& matches, int resolution = 0);

/// Index of the nearest bin (first on ties).
std::size_t nearest_bin(const ImageTensor& x, const std::vector<OrbitopeBin>& bins);

/// Mean ||x - avg_G x||_2 over the given images.
double symmetry_score(const std::vector<ImageTensor>& images, const GroupSpec& group);

/// Candidates and training samples are both normalized with the same mode
/// before matching, so an exact reconstruction scores 0.
struct EvalOptions {
    Normalization normalization = Normalization::MinMax;
    int orbitope_resolution = 0;
};

struct EvalReport {
    std::vector<ImageTensor> evaluated;  ///< candidates after normalization
    LabeledDataset reference;            ///< training samples, same normalization
    MatchResult match;
    double mean_dssim = 0.0;
    OrbitopeHistogram histogram;
    double symmetry_score = 0.0;
};

EvalReport evaluate(const std::vector<ImageTensor>& candidates, const LabeledDataset& data, const GroupSpec& group,
                    const EvalOptions& options = {});

}  // namespace invrec
