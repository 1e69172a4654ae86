#include "invrec/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "invrec/parallel.hpp"

namespace invrec {

SsimKernel::SsimKernel(Grid grid, SsimParams params) : grid_(grid), params_(params) {
    if (grid.height <= 0 || grid.width <= 0) throw DimensionError("SsimKernel: empty grid");
    win_ = std::min({params.window, grid.height, grid.width});
    if (win_ % 2 == 0) --win_;
    out_h_ = grid.height - win_ + 1;
    out_w_ = grid.width - win_ + 1;
    const int r = win_ / 2;
    std::vector<double> g1(win_);
    for (int u = -r; u <= r; ++u) g1[u + r] = std::exp(-(u * u) / (2.0 * params.sigma * params.sigma));
    weights_.resize(static_cast<std::size_t>(win_) * win_);
    double total = 0.0;
    for (int y = 0; y < win_; ++y)
        for (int x = 0; x < win_; ++x) total += weights_[y * win_ + x] = g1[y] * g1[x];
    for (double& w : weights_) w /= total;
}

SsimStats SsimKernel::stats(std::span<const double> img) const {
    if (img.size() != grid_.size()) throw DimensionError("ssim: image size mismatch");
    SsimStats s;
    s.mean.resize(static_cast<std::size_t>(out_h_) * out_w_);
    s.mean_sq.resize(s.mean.size());
    const int W = grid_.width;
    for (int oy = 0; oy < out_h_; ++oy)
        for (int ox = 0; ox < out_w_; ++ox) {
            double m = 0.0, q = 0.0;
            for (int y = 0; y < win_; ++y)
                for (int x = 0; x < win_; ++x) {
                    const double w = weights_[y * win_ + x];
                    const double v = img[(oy + y) * W + ox + x];
                    m += w * v;
                    q += w * (v * v);
                }
            s.mean[oy * out_w_ + ox] = m;
            s.mean_sq[oy * out_w_ + ox] = q;
        }
    return s;
}

double SsimKernel::ssim(std::span<const double> a, const SsimStats& sa, std::span<const double> b,
                        const SsimStats& sb) const {
    if (a.size() != grid_.size() || b.size() != grid_.size()) throw DimensionError("ssim: image size mismatch");
    const double c1 = (params_.k1 * params_.data_range) * (params_.k1 * params_.data_range);
    const double c2 = (params_.k2 * params_.data_range) * (params_.k2 * params_.data_range);
    const int W = grid_.width;
    double total = 0.0;
    for (int oy = 0; oy < out_h_; ++oy)
        for (int ox = 0; ox < out_w_; ++ox) {
            double cross = 0.0;
            for (int y = 0; y < win_; ++y)
                for (int x = 0; x < win_; ++x) {
                    const std::size_t k = static_cast<std::size_t>(oy + y) * W + ox + x;
                    cross += weights_[y * win_ + x] * (a[k] * b[k]);
                }
            const std::size_t o = static_cast<std::size_t>(oy) * out_w_ + ox;
            const double ma = sa.mean[o], mb = sb.mean[o];
            const double mab = ma * mb;
            const double va = sa.mean_sq[o] - ma * ma;
            const double vb = sb.mean_sq[o] - mb * mb;
            const double cov = cross - mab;
            const double num = (2.0 * mab + c1) * (2.0 * cov + c2);
            const double den = (ma * ma + mb * mb + c1) * (va + vb + c2);
            total += num / den;
        }
    return total / (static_cast<double>(out_h_) * out_w_);
}

double SsimKernel::ssim(std::span<const double> a, std::span<const double> b) const {
    return ssim(a, stats(a), b, stats(b));
}

double ssim(const ImageTensor& a, const ImageTensor& b) {
    require_same_grid(a, b, "ssim");
    return SsimKernel(a.grid()).ssim(a.values(), b.values());
}

double dssim(const ImageTensor& a, const ImageTensor& b) { return (1.0 - ssim(a, b)) / 2.0; }

Normalization parse_normalization(std::string_view s) {
    if (s == "none") return Normalization::None;
    if (s == "minmax") return Normalization::MinMax;
    if (s == "clip") return Normalization::Clip;
    throw std::invalid_argument("unknown normalization '" + std::string(s) + "'");
}

std::string_view to_string(Normalization n) {
    switch (n) {
        case Normalization::None: return "none";
        case Normalization::MinMax: return "minmax";
        case Normalization::Clip: return "clip";
    }
    return "?";
}

ImageTensor normalize(const ImageTensor& x, Normalization mode) {
    ImageTensor out = x;
    switch (mode) {
        case Normalization::None: break;
        case Normalization::Clip:
            for (double& v : out.values()) v = std::clamp(v, 0.0, 1.0);
            break;
        case Normalization::MinMax: {
            auto [lo, hi] = std::minmax_element(x.values().begin(), x.values().end());
            const double range = *hi - *lo;
            for (double& v : out.values()) v = range > 0 ? (v - *lo) / range : 0.5;
            break;
        }
    }
    return out;
}

MatchResult match_invariant(const std::vector<ImageTensor>& candidates, const LabeledDataset& data,
                            const GroupSpec& group) {
    if (data.empty()) throw std::invalid_argument("match_invariant: empty dataset");
    data.validate();
    if (data.grid != group.grid()) throw DimensionError("match_invariant: dataset grid does not match group");
    for (const auto& c : candidates)
        if (c.grid() != data.grid) throw DimensionError("match_invariant: candidate grid mismatch");

    const SsimKernel kernel(data.grid);
    const std::size_t n = data.size(), G = group.order();
    std::vector<ImageTensor> moved(n * G);
    std::vector<SsimStats> moved_stats(n * G);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < G; ++k) {
            moved[j * G + k] = apply(group[k], data.samples[j]);
            moved_stats[j * G + k] = kernel.stats(moved[j * G + k].values());
        }

    MatchResult res;
    res.matches.resize(candidates.size());
    res.pair_dssim.assign(candidates.size(), std::vector<double>(n));
    const long m = static_cast<long>(candidates.size());
#pragma omp parallel for schedule(dynamic)
    for (long c = 0; c < m; ++c) {
        const auto x = candidates[c].values();
        const SsimStats sx = kernel.stats(x);
        Match best;
        best.dssim = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
            double pair_best = std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < G; ++k) {
                const auto& y = moved[j * G + k];
                const double v = (1.0 - kernel.ssim(x, sx, y.values(), moved_stats[j * G + k])) / 2.0;
                pair_best = std::min(pair_best, v);
                if (v < best.dssim) {
                    best.dssim = v;
                    best.nn_index = j;
                    best.best_g = k;
                }
            }
            res.pair_dssim[c][j] = pair_best;
        }
        double s = 0.0;
        const auto& y = moved[best.nn_index * G + best.best_g];
        for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
        best.l2 = std::sqrt(s);
        res.matches[c] = best;
    }
    return res;
}

double mean_dssim(const MatchResult& result, std::size_t n_samples) {
    if (n_samples == 0) throw std::invalid_argument("mean_dssim: no samples");
    std::vector<double> best(n_samples, std::numeric_limits<double>::infinity());
    for (const auto& mt : result.matches) best[mt.nn_index] = std::min(best[mt.nn_index], mt.dssim);
    double total = 0.0;
    for (std::size_t j = 0; j < n_samples; ++j) {
        if (std::isinf(best[j])) {
            double worst = 0.0;
            for (const auto& row : result.pair_dssim) worst = std::max(worst, row.at(j));
            best[j] = result.pair_dssim.empty() ? 1.0 : worst;
        }
        total += best[j];
    }
    return total / static_cast<double>(n_samples);
}

std::size_t nearest_bin(const ImageTensor& x, const std::vector<OrbitopeBin>& bins) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < bins.size(); ++b) {
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double diff = x[i] - bins[b].point[i];
            s += diff * diff;
        }
        if (s < best_d) {
            best_d = s;
            best = b;
        }
    }
    return best;
}

OrbitopeHistogram orbitope_histogram(const std::vector<ImageTensor>& candidates, const LabeledDataset& data,
                                     const GroupSpec& group, const std::vector<Match>& matches, int resolution) {
    if (matches.size() != candidates.size()) throw DimensionError("orbitope_histogram: one match per candidate");
    std::map<std::size_t, std::vector<OrbitopeBin>> cache;
    for (const auto& mt : matches)
        if (!cache.count(mt.nn_index)) {
            Orbit o = orbit(data.samples.at(mt.nn_index), group);
            const int res = resolution > 0 ? resolution : default_orbitope_resolution(o.members.size());
            cache.emplace(mt.nn_index, orbitope_bins(o, res));
        }
    std::vector<std::size_t> assigned(candidates.size());
    const long m = static_cast<long>(candidates.size());
#pragma omp parallel for schedule(dynamic)
    for (long c = 0; c < m; ++c) assigned[c] = nearest_bin(candidates[c], cache.at(matches[c].nn_index));
    OrbitopeHistogram hist;
    for (std::size_t c = 0; c < candidates.size(); ++c) ++hist[cache.at(matches[c].nn_index)[assigned[c]].weights];
    return hist;
}

double symmetry_score(const std::vector<ImageTensor>& images, const GroupSpec& group) {
    if (images.empty()) return 0.0;
    double total = 0.0;
    for (const auto& x : images) {
        const ImageTensor avg = orbit_average(x, group);
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - avg[i]) * (x[i] - avg[i]);
        total += std::sqrt(s);
    }
    return total / static_cast<double>(images.size());
}

EvalReport evaluate(const std::vector<ImageTensor>& candidates, const LabeledDataset& data, const GroupSpec& group,
                    const EvalOptions& options) {
    EvalReport rep;
    rep.evaluated.reserve(candidates.size());
    for (const auto& c : candidates) rep.evaluated.push_back(normalize(c, options.normalization));
    rep.reference = data;
    for (auto& x : rep.reference.samples) x = normalize(x, options.normalization);
    rep.match = match_invariant(rep.evaluated, rep.reference, group);
    rep.mean_dssim = mean_dssim(rep.match, data.size());
    rep.histogram =
        orbitope_histogram(rep.evaluated, rep.reference, group, rep.match.matches, options.orbitope_resolution);
    rep.symmetry_score = symmetry_score(rep.evaluated, group);
    return rep;
}

}  // namespace invrec
