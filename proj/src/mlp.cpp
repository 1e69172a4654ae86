#include "invrec/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace invrec {

ParamVector::ParamVector(Arch arch) : arch_(arch), theta_(arch.param_count(), 0.0) {
    if (arch.d <= 0 || arch.h1 <= 0 || arch.h2 <= 0) throw DimensionError("ParamVector: non-positive layer size");
}

ParamVector::ParamVector(Arch arch, std::vector<double> theta) : arch_(arch), theta_(std::move(theta)) {
    if (arch.d <= 0 || arch.h1 <= 0 || arch.h2 <= 0) throw DimensionError("ParamVector: non-positive layer size");
    if (theta_.size() != arch.param_count())
        throw DimensionError("ParamVector: expected " + std::to_string(arch.param_count()) + " parameters, got " +
                             std::to_string(theta_.size()));
}

ParamVector ParamVector::random_init(Arch arch, std::uint64_t seed) {
    ParamVector p(arch);
    std::mt19937_64 rng(seed);
    auto fill = [&](std::size_t begin, std::size_t count, int fan_in) {
        std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(fan_in)));
        for (std::size_t i = 0; i < count; ++i) p.theta_[begin + i] = dist(rng);
    };
    fill(0, p.w2_offset(), arch.d);
    fill(p.w2_offset(), p.w3_offset() - p.w2_offset(), arch.h1);
    fill(p.w3_offset(), static_cast<std::size_t>(arch.h2), arch.h2);
    return p;
}

namespace {

void check_input(const ParamVector& theta, std::span<const double> x) {
    if (x.size() != static_cast<std::size_t>(theta.arch().d))
        throw DimensionError("mlp: input length " + std::to_string(x.size()) + " != d " +
                             std::to_string(theta.arch().d));
}

// out[r] = mask ? sum_c M[r, c] v[c] : 0, M is rows x cols row-major
void matvec(std::span<const double> M, int rows, int cols, std::span<const double> v, std::span<double> out) {
    for (int r = 0; r < rows; ++r) {
        const double* row = M.data() + static_cast<std::size_t>(r) * cols;
        double s = 0.0;
        for (int c = 0; c < cols; ++c) s += row[c] * v[c];
        out[r] = s;
    }
}

// out[c] = sum_r M[r, c] v[r]; rows with v[r] == 0 are skipped
void matvec_t(std::span<const double> M, int rows, int cols, std::span<const double> v, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (int r = 0; r < rows; ++r) {
        const double vr = v[r];
        if (vr == 0.0) continue;
        const double* row = M.data() + static_cast<std::size_t>(r) * cols;
        for (int c = 0; c < cols; ++c) out[c] += row[c] * vr;
    }
}

// delta2 = D2 w3, delta1 = D1 W2^T delta2
void backprop_deltas(const ParamVector& theta, const EvalRecord& rec, std::vector<double>& delta1,
                     std::vector<double>& delta2) {
    const Arch& a = theta.arch();
    delta2.resize(a.h2);
    delta1.resize(a.h1);
    auto w3 = theta.w3();
    for (int k = 0; k < a.h2; ++k) delta2[k] = rec.mask2[k] ? w3[k] : 0.0;
    matvec_t(theta.w2(), a.h2, a.h1, delta2, delta1);
    for (int j = 0; j < a.h1; ++j)
        if (!rec.mask1[j]) delta1[j] = 0.0;
}

}  // namespace

void forward_record(const ParamVector& theta, std::span<const double> x, EvalRecord& rec) {
    check_input(theta, x);
    const Arch& a = theta.arch();
    rec.z1.resize(a.h1);
    rec.a1.resize(a.h1);
    rec.mask1.resize(a.h1);
    rec.z2.resize(a.h2);
    rec.a2.resize(a.h2);
    rec.mask2.resize(a.h2);
    matvec(theta.w1(), a.h1, a.d, x, rec.z1);
    for (int j = 0; j < a.h1; ++j) {
        rec.mask1[j] = rec.z1[j] > 0.0;
        rec.a1[j] = rec.mask1[j] ? rec.z1[j] : 0.0;
    }
    matvec(theta.w2(), a.h2, a.h1, rec.a1, rec.z2);
    auto w3 = theta.w3();
    double out = 0.0;
    for (int k = 0; k < a.h2; ++k) {
        rec.mask2[k] = rec.z2[k] > 0.0;
        rec.a2[k] = rec.mask2[k] ? rec.z2[k] : 0.0;
        out += w3[k] * rec.a2[k];
    }
    rec.output = out;
}

double mlp_forward(const ParamVector& theta, std::span<const double> x) {
    EvalRecord rec;
    forward_record(theta, x, rec);
    return rec.output;
}

void grad_input_into(const ParamVector& theta, std::span<const double> x, std::span<double> out, EvalRecord& rec) {
    forward_record(theta, x, rec);
    if (out.size() != x.size()) throw DimensionError("grad_input: output length mismatch");
    std::vector<double> delta1, delta2;
    backprop_deltas(theta, rec, delta1, delta2);
    const Arch& a = theta.arch();
    matvec_t(theta.w1(), a.h1, a.d, delta1, out);
}

std::vector<double> grad_input(const ParamVector& theta, std::span<const double> x) {
    std::vector<double> out(x.size());
    EvalRecord rec;
    grad_input_into(theta, x, out, rec);
    return out;
}

double grad_params_into(const ParamVector& theta, std::span<const double> x, std::span<double> out, EvalRecord& rec) {
    forward_record(theta, x, rec);
    if (out.size() != theta.size()) throw DimensionError("grad_params: output length mismatch");
    const Arch& a = theta.arch();
    std::vector<double> delta1, delta2;
    backprop_deltas(theta, rec, delta1, delta2);
    // dW1 = delta1 x^T
    for (int j = 0; j < a.h1; ++j) {
        double* row = out.data() + static_cast<std::size_t>(j) * a.d;
        const double dj = delta1[j];
        if (dj == 0.0) {
            std::fill(row, row + a.d, 0.0);
            continue;
        }
        for (int i = 0; i < a.d; ++i) row[i] = dj * x[i];
    }
    // dW2 = delta2 a1^T
    for (int k = 0; k < a.h2; ++k) {
        double* row = out.data() + theta.w2_offset() + static_cast<std::size_t>(k) * a.h1;
        const double dk = delta2[k];
        for (int j = 0; j < a.h1; ++j) row[j] = dk * rec.a1[j];
    }
    // dw3 = a2
    std::copy(rec.a2.begin(), rec.a2.end(), out.begin() + static_cast<std::ptrdiff_t>(theta.w3_offset()));
    return rec.output;
}

std::vector<double> grad_params(const ParamVector& theta, std::span<const double> x) {
    std::vector<double> out(theta.size());
    EvalRecord rec;
    grad_params_into(theta, x, out, rec);
    return out;
}

void mixed_vjp_into(const ParamVector& theta, std::span<const double> x, std::span<const double> v,
                    std::span<double> out, EvalRecord& rec) {
    if (v.size() != theta.size()) throw DimensionError("mixed_vjp: v length must equal parameter count");
    if (out.size() != x.size()) throw DimensionError("mixed_vjp: output length mismatch");
    forward_record(theta, x, rec);
    const Arch& a = theta.arch();
    std::vector<double> delta1, delta2;
    backprop_deltas(theta, rec, delta1, delta2);

    auto V1 = v.subspan(0, theta.w2_offset());
    auto V2 = v.subspan(theta.w2_offset(), theta.w3_offset() - theta.w2_offset());
    auto V3 = v.subspan(theta.w3_offset(), static_cast<std::size_t>(a.h2));

    // q = D1 (W2^T D2 V3 + V2^T delta2)
    std::vector<double> t2(a.h2), q(a.h1), s(a.h1);
    for (int k = 0; k < a.h2; ++k) t2[k] = rec.mask2[k] ? V3[k] : 0.0;
    matvec_t(theta.w2(), a.h2, a.h1, t2, q);
    matvec_t(V2, a.h2, a.h1, delta2, s);
    for (int j = 0; j < a.h1; ++j) q[j] = rec.mask1[j] ? q[j] + s[j] : 0.0;

    // out = W1^T q + V1^T delta1
    matvec_t(theta.w1(), a.h1, a.d, q, out);
    for (int j = 0; j < a.h1; ++j) {
        const double dj = delta1[j];
        if (dj == 0.0) continue;
        const double* row = V1.data() + static_cast<std::size_t>(j) * a.d;
        for (int i = 0; i < a.d; ++i) out[i] += row[i] * dj;
    }
}

std::vector<double> mixed_vjp(const ParamVector& theta, std::span<const double> x, std::span<const double> v) {
    std::vector<double> out(x.size());
    EvalRecord rec;
    mixed_vjp_into(theta, x, v, out, rec);
    return out;
}

double min_abs_preactivation(const ParamVector& theta, std::span<const double> x) {
    EvalRecord rec;
    forward_record(theta, x, rec);
    double m = std::numeric_limits<double>::infinity();
    for (double z : rec.z1) m = std::min(m, std::abs(z));
    for (double z : rec.z2) m = std::min(m, std::abs(z));
    return m;
}

}  // namespace invrec
