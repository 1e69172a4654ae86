#include "invrec/dip.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "invrec/parallel.hpp"

namespace invrec {

void DipConfig::validate() const {
    if (latent_channels < 1 || channels < 1) throw std::invalid_argument("DipConfig: channel counts must be >= 1");
    if (stages < 1) throw std::invalid_argument("DipConfig: stages must be >= 1");
}

namespace {

// in: cin x H x W, out: cout x H x W, 3x3 kernel, zero padding
void conv3x3(std::span<const double> in, int cin, int H, int W, const double* weight, const double* bias, int cout,
             std::span<double> out) {
    for (int o = 0; o < cout; ++o) {
        double* dst = out.data() + static_cast<std::size_t>(o) * H * W;
        for (int p = 0; p < H * W; ++p) dst[p] = bias[o];
        for (int c = 0; c < cin; ++c) {
            const double* src = in.data() + static_cast<std::size_t>(c) * H * W;
            const double* k = weight + (static_cast<std::size_t>(o) * cin + c) * 9;
            for (int y = 0; y < H; ++y)
                for (int ky = 0; ky < 3; ++ky) {
                    const int sy = y + ky - 1;
                    if (sy < 0 || sy >= H) continue;
                    for (int x = 0; x < W; ++x)
                        for (int kx = 0; kx < 3; ++kx) {
                            const int sx = x + kx - 1;
                            if (sx < 0 || sx >= W) continue;
                            dst[y * W + x] += k[ky * 3 + kx] * src[sy * W + sx];
                        }
                }
        }
    }
}

// Accumulates weight/bias gradients and writes the input gradient.
void conv3x3_backward(std::span<const double> in, int cin, int H, int W, const double* weight, int cout,
                      std::span<const double> gout, double* gweight, double* gbias, std::span<double> gin) {
    std::fill(gin.begin(), gin.end(), 0.0);
    for (int o = 0; o < cout; ++o) {
        const double* go = gout.data() + static_cast<std::size_t>(o) * H * W;
        double sb = 0.0;
        for (int p = 0; p < H * W; ++p) sb += go[p];
        gbias[o] += sb;
        for (int c = 0; c < cin; ++c) {
            const double* src = in.data() + static_cast<std::size_t>(c) * H * W;
            double* gsrc = gin.data() + static_cast<std::size_t>(c) * H * W;
            const double* k = weight + (static_cast<std::size_t>(o) * cin + c) * 9;
            double* gk = gweight + (static_cast<std::size_t>(o) * cin + c) * 9;
            for (int y = 0; y < H; ++y)
                for (int ky = 0; ky < 3; ++ky) {
                    const int sy = y + ky - 1;
                    if (sy < 0 || sy >= H) continue;
                    for (int x = 0; x < W; ++x) {
                        const double g = go[y * W + x];
                        if (g == 0.0) continue;
                        for (int kx = 0; kx < 3; ++kx) {
                            const int sx = x + kx - 1;
                            if (sx < 0 || sx >= W) continue;
                            gk[ky * 3 + kx] += g * src[sy * W + sx];
                            gsrc[sy * W + sx] += g * k[ky * 3 + kx];
                        }
                    }
                }
        }
    }
}

void upsample2(std::span<const double> in, int c, int h, int w, std::span<double> out) {
    const int H = 2 * h, W = 2 * w;
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                out[(static_cast<std::size_t>(ch) * H + y) * W + x] = in[(static_cast<std::size_t>(ch) * h + y / 2) * w + x / 2];
}

void upsample2_adjoint(std::span<const double> gout, int c, int h, int w, std::span<double> gin) {
    const int H = 2 * h, W = 2 * w;
    std::fill(gin.begin(), gin.end(), 0.0);
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                gin[(static_cast<std::size_t>(ch) * h + y / 2) * w + x / 2] += gout[(static_cast<std::size_t>(ch) * H + y) * W + x];
}

double sigmoid(double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); }

}  // namespace

DipGenerator::DipGenerator(Grid grid, DipConfig config, std::size_t m, std::uint64_t seed)
    : grid_(grid), config_(config) {
    config.validate();
    const int f = 1 << config.stages;
    if (grid.height % f != 0 || grid.width % f != 0)
        throw DimensionError("DipGenerator: grid must be divisible by 2^stages");
    latent_h_ = grid.height / f;
    latent_w_ = grid.width / f;
    std::size_t off = 0;
    int h = latent_h_, w = latent_w_;
    for (int s = 0; s < config.stages; ++s) {
        h *= 2;
        w *= 2;
        const int cin = s == 0 ? config.latent_channels : config.channels;
        Layer L{cin, config.channels, h, w, true, off, off + static_cast<std::size_t>(config.channels) * cin * 9};
        off = L.b_offset + static_cast<std::size_t>(config.channels);
        layers_.push_back(L);
    }
    Layer last{config.channels, 1, h, w, false, off, off + static_cast<std::size_t>(config.channels) * 9};
    off = last.b_offset + 1;
    layers_.push_back(last);
    param_count_ = off;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nz(0.0, 1.0);
    latents_.resize(m, std::vector<double>(static_cast<std::size_t>(config.latent_channels) * latent_h_ * latent_w_));
    for (auto& z : latents_)
        for (auto& v : z) v = nz(rng);
}

std::vector<double> DipGenerator::init_weights(std::uint64_t seed) const {
    std::vector<double> w(param_count_, 0.0);
    std::mt19937_64 rng(seed);
    for (const auto& L : layers_) {
        std::normal_distribution<double> nd(0.0, std::sqrt(2.0 / (9.0 * L.cin)));
        for (std::size_t k = L.w_offset; k < L.b_offset; ++k) w[k] = nd(rng);
    }
    return w;
}

void DipGenerator::forward(std::size_t i, std::span<const double> w, std::span<double> x) const {
    if (w.size() != param_count_) throw DimensionError("DipGenerator: weight length mismatch");
    if (x.size() != grid_.size()) throw DimensionError("DipGenerator: output length mismatch");
    std::vector<double> cur = latents_.at(i), up, out;
    int h = latent_h_, wd = latent_w_, c = config_.latent_channels;
    for (const auto& L : layers_) {
        if (L.upsample) {
            up.resize(static_cast<std::size_t>(c) * L.height * L.width);
            upsample2(cur, c, h, wd, up);
        } else {
            up = cur;
        }
        out.resize(static_cast<std::size_t>(L.cout) * L.height * L.width);
        conv3x3(up, L.cin, L.height, L.width, w.data() + L.w_offset, w.data() + L.b_offset, L.cout, out);
        if (L.upsample)
            for (double& v : out) v = v > 0.0 ? v : 0.0;
        cur.swap(out);
        h = L.height;
        wd = L.width;
        c = L.cout;
    }
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = sigmoid(cur[k]);
}

void DipGenerator::backward(std::size_t i, std::span<const double> w, std::span<const double> grad_x,
                            std::span<double> grad_w) const {
    if (w.size() != param_count_ || grad_w.size() != param_count_)
        throw DimensionError("DipGenerator: weight length mismatch");
    // Forward with cached layer inputs (post-upsample) and outputs.
    std::vector<std::vector<double>> inputs(layers_.size()), outputs(layers_.size());
    std::vector<double> cur = latents_.at(i);
    int h = latent_h_, wd = latent_w_, c = config_.latent_channels;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& L = layers_[l];
        auto& in = inputs[l];
        if (L.upsample) {
            in.resize(static_cast<std::size_t>(c) * L.height * L.width);
            upsample2(cur, c, h, wd, in);
        } else {
            in = cur;
        }
        auto& out = outputs[l];
        out.resize(static_cast<std::size_t>(L.cout) * L.height * L.width);
        conv3x3(in, L.cin, L.height, L.width, w.data() + L.w_offset, w.data() + L.b_offset, L.cout, out);
        cur = out;
        if (L.upsample)
            for (double& v : cur) v = v > 0.0 ? v : 0.0;
        h = L.height;
        wd = L.width;
        c = L.cout;
    }

    std::fill(grad_w.begin(), grad_w.end(), 0.0);
    std::vector<double> g(grad_x.size()), gin;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const double s = sigmoid(outputs.back()[k]);
        g[k] = grad_x[k] * s * (1.0 - s);
    }
    for (std::size_t l = layers_.size(); l-- > 0;) {
        const auto& L = layers_[l];
        if (L.upsample)
            for (std::size_t k = 0; k < g.size(); ++k)
                if (!(outputs[l][k] > 0.0)) g[k] = 0.0;
        gin.resize(inputs[l].size());
        conv3x3_backward(inputs[l], L.cin, L.height, L.width, w.data() + L.w_offset, L.cout, g,
                         grad_w.data() + L.w_offset, grad_w.data() + L.b_offset, gin);
        if (l == 0) break;
        if (L.upsample) {
            g.resize(gin.size() / 4);
            upsample2_adjoint(gin, L.cin, L.height / 2, L.width / 2, g);
        } else {
            g = gin;
        }
    }
}

AffineGenerator::AffineGenerator(Grid grid, std::vector<std::vector<double>> latents)
    : grid_(grid), k_(latents.empty() ? 0 : latents[0].size()), latents_(std::move(latents)) {
    if (latents_.empty() || k_ == 0) throw std::invalid_argument("AffineGenerator: need nonempty latents");
    for (const auto& z : latents_)
        if (z.size() != k_) throw DimensionError("AffineGenerator: latent sizes differ");
}

void AffineGenerator::forward(std::size_t i, std::span<const double> w, std::span<double> x) const {
    if (w.size() != param_count()) throw DimensionError("AffineGenerator: weight length mismatch");
    const auto& z = latents_.at(i);
    const std::size_t d = grid_.size();
    for (std::size_t r = 0; r < d; ++r) {
        double s = w[d * k_ + r];
        for (std::size_t c = 0; c < k_; ++c) s += w[r * k_ + c] * z[c];
        x[r] = s;
    }
}

void AffineGenerator::backward(std::size_t i, std::span<const double> w, std::span<const double> grad_x,
                               std::span<double> grad_w) const {
    if (w.size() != param_count() || grad_w.size() != param_count())
        throw DimensionError("AffineGenerator: weight length mismatch");
    const auto& z = latents_.at(i);
    const std::size_t d = grid_.size();
    for (std::size_t r = 0; r < d; ++r) {
        for (std::size_t c = 0; c < k_; ++c) grad_w[r * k_ + c] = grad_x[r] * z[c];
        grad_w[d * k_ + r] = grad_x[r];
    }
}

namespace {

std::vector<ImageTensor> generate_all(const CandidateGenerator& gen, std::span<const double> w) {
    std::vector<ImageTensor> xs(gen.count(), ImageTensor(gen.grid()));
    const long m = static_cast<long>(gen.count());
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < m; ++i) gen.forward(static_cast<std::size_t>(i), w, xs[i].values());
    return xs;
}

}  // namespace

double generated_objective(const InvariantModel& model, const CandidateGenerator& gen, std::span<const double> w,
                           const ReconstructionState& state, Objective objective) {
    auto xs = generate_all(gen, w);
    return objective_value(objective, model, xs, state.lambdas, state.labels);
}

std::vector<double> generated_objective_grad(const InvariantModel& model, const CandidateGenerator& gen,
                                             std::span<const double> w, const ReconstructionState& state,
                                             Objective objective, std::vector<double>* grad_lambda) {
    auto xs = generate_all(gen, w);
    auto g = objective_grad(objective, model, xs, state.lambdas, state.labels);
    if (!std::isfinite(g.loss)) throw DivergenceError("reconstruction: non-finite objective", state.step);
    const long m = static_cast<long>(gen.count());
    std::vector<std::vector<double>> parts(gen.count(), std::vector<double>(gen.param_count()));
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < m; ++i) gen.backward(static_cast<std::size_t>(i), w, g.grad_x[i], parts[i]);
    std::vector<double> gw(gen.param_count(), 0.0);
    const long P = static_cast<long>(gw.size());
#pragma omp parallel for schedule(static)
    for (long k = 0; k < P; ++k) {
        double s = 0.0;
        for (long i = 0; i < m; ++i) s += parts[i][k];
        gw[k] = s;
    }
    if (grad_lambda) *grad_lambda = std::move(g.grad_lambda);
    return gw;
}

GeneratedReconstruction reconstruct_generated(const InvariantModel& model, const CandidateGenerator& gen,
                                              std::vector<double> w0, const GdConfig& config, std::uint64_t seed,
                                              const StepObserver& observe) {
    config.validate();
    if (w0.size() != gen.param_count()) throw DimensionError("reconstruct_generated: weight length mismatch");
    if (gen.grid() != model.group().grid()) throw DimensionError("reconstruct_generated: generator grid mismatch");
    GeneratedReconstruction res;
    res.state = init_state(gen.grid(), gen.count(), config.lambda_init_max, seed);
    res.weights = std::move(w0);
    res.state.candidates = generate_all(gen, res.weights);
    std::vector<double> glam;
    for (long t = 0; t < config.steps; ++t) {
        auto gw = generated_objective_grad(model, gen, res.weights, res.state, config.objective, &glam);
        for (std::size_t k = 0; k < gw.size(); ++k) res.weights[k] -= config.lr * gw[k];
        for (double v : res.weights)
            if (!std::isfinite(v)) throw DivergenceError("reconstruction: non-finite generator weight", t);
        if (config.objective == Objective::KKT)
            for (std::size_t i = 0; i < glam.size(); ++i)
                res.state.lambdas[i] = std::max(0.0, res.state.lambdas[i] - config.lr_lambda * glam[i]);
        ++res.state.step;
        res.state.candidates = generate_all(gen, res.weights);
        if (observe) observe(res.state);
    }
    res.state.x_prev = res.state.candidates;
    return res;
}

GeneratedReconstruction reconstruct_dip(const InvariantModel& model, const DipConfig& dip, const GdConfig& config,
                                        std::size_t m, std::uint64_t seed, const StepObserver& observe) {
    // latents and weights draw from streams separate from the lambda init
    DipGenerator gen(model.group().grid(), dip, m, seed ^ 0x9E3779B97F4A7C15ULL);
    auto w0 = gen.init_weights(seed ^ 0xD1B54A32D192ED03ULL);
    return reconstruct_generated(model, gen, std::move(w0), config, seed, observe);
}

}  // namespace invrec
