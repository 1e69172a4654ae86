#include "invrec/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "invrec/parallel.hpp"

namespace invrec {

void LabeledDataset::validate() const {
    if (samples.size() != labels.size()) throw DimensionError("LabeledDataset: sample/label count mismatch");
    for (const auto& s : samples)
        if (s.grid() != grid) throw DimensionError("LabeledDataset: sample grid mismatch");
}

void LabeledDataset::validate_binary() const {
    validate();
    for (int y : labels)
        if (y != 1 && y != -1) throw std::invalid_argument("LabeledDataset: labels must be +1/-1");
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0)) throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
    if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
    if (log_every < 1) throw std::invalid_argument("TrainConfig: log_every must be >= 1");
    if (!(init_scale > 0)) throw std::invalid_argument("TrainConfig: init_scale must be > 0");
}

namespace {

// log(1 + exp(-m))
double softplus_neg(double m) { return m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m)); }

// 1 / (1 + exp(m))
double sigmoid_neg(double m) {
    if (m >= 0) {
        const double e = std::exp(-m);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(m));
}

std::vector<double> outputs(const InvariantModel& model, const LabeledDataset& data) {
    const long n = static_cast<long>(data.size());
    std::vector<double> out(data.size());
    PerThread<SymWorkspace> ws;
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) out[i] = model.forward(data.samples[i].values(), ws.local());
    return out;
}

}  // namespace

double bce_loss(const InvariantModel& model, const LabeledDataset& data) {
    if (data.empty()) throw std::invalid_argument("bce_loss: empty dataset");
    data.validate_binary();
    auto f = outputs(model, data);
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s += softplus_neg(data.labels[i] * f[i]);
    return s / static_cast<double>(f.size());
}

TrainStats evaluate_fit(const InvariantModel& model, const LabeledDataset& data) {
    if (data.empty()) throw std::invalid_argument("evaluate_fit: empty dataset");
    data.validate_binary();
    auto f = outputs(model, data);
    TrainStats st;
    st.min_margin = std::numeric_limits<double>::infinity();
    long correct = 0;
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double m = data.labels[i] * f[i];
        s += softplus_neg(m);
        correct += m > 0;
        st.min_margin = std::min(st.min_margin, m);
    }
    st.loss = s / static_cast<double>(f.size());
    st.accuracy = static_cast<double>(correct) / static_cast<double>(f.size());
    return st;
}

double bce_loss_and_grad(const InvariantModel& model, const LabeledDataset& data, std::span<double> grad) {
    if (data.empty()) throw std::invalid_argument("bce_loss: empty dataset");
    const long n = static_cast<long>(data.size());
    const std::size_t p = model.params().size();
    if (grad.size() != p) throw DimensionError("bce_loss_and_grad: gradient length mismatch");

    // reused across calls: training calls this once per epoch
    static thread_local std::vector<std::vector<double>> buffer;
    auto& per_sample = buffer;  // the parallel regions must share this thread's copy
    per_sample.resize(data.size());
    for (auto& v : per_sample) v.resize(p);
    std::vector<double> f(data.size());
    PerThread<SymWorkspace> ws;
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) f[i] = model.grad_params_sym(data.samples[i].values(), per_sample[i], ws.local());

    std::vector<double> coef(data.size());
    double loss = 0.0;
    for (long i = 0; i < n; ++i) {
        const double y = data.labels[i];
        loss += softplus_neg(y * f[i]);
        coef[i] = -y * sigmoid_neg(y * f[i]) / static_cast<double>(n);
    }
    const long pl = static_cast<long>(p);
#pragma omp parallel for schedule(static)
    for (long j = 0; j < pl; ++j) {
        double s = 0.0;
        for (long i = 0; i < n; ++i) s += coef[i] * per_sample[i][j];
        grad[j] = s;
    }
    return loss / static_cast<double>(n);
}

TrainResult train(InvariantModel& model, const LabeledDataset& data, const TrainConfig& config) {
    config.validate();
    data.validate_binary();
    if (data.empty()) throw std::invalid_argument("train: empty dataset");
    TrainResult res;
    std::vector<double> grad(model.params().size());
    auto theta = model.mutable_params().theta();

    auto log_row = [&](long epoch) {
        auto st = evaluate_fit(model, data);
        res.history.push_back({epoch, st.loss, st.accuracy, st.min_margin});
        return st;
    };

    log_row(0);
    long epoch = 0;
    while (epoch < config.epochs) {
        const double loss = bce_loss_and_grad(model, data, grad);
        if (!std::isfinite(loss)) throw DivergenceError("train: non-finite loss", epoch);
        if (loss <= config.target_loss) break;
        for (std::size_t j = 0; j < theta.size(); ++j) theta[j] -= config.learning_rate * grad[j];
        ++epoch;
        if (epoch % config.log_every == 0) {
            auto st = log_row(epoch);
            if (!std::isfinite(st.loss)) throw DivergenceError("train: non-finite loss", epoch);
        }
    }
    res.epochs_run = epoch;
    if (res.history.back().epoch != epoch) log_row(epoch);
    res.final = {res.history.back().loss, res.history.back().accuracy, res.history.back().min_margin};
    return res;
}

KktFit kkt_residual(const InvariantModel& model, const LabeledDataset& data, int iterations) {
    data.validate_binary();
    const std::size_t n = data.size();
    const std::size_t p = model.params().size();
    auto theta = model.params().theta();

    std::vector<std::vector<double>> cols(n, std::vector<double>(p));
    PerThread<SymWorkspace> ws;
    const long nl = static_cast<long>(n);
#pragma omp parallel for schedule(static)
    for (long i = 0; i < nl; ++i) {
        model.grad_params_sym(data.samples[i].values(), cols[i], ws.local());
        for (double& v : cols[i]) v *= data.labels[i];
    }

    // Gram matrix K = A^T A and b = A^T theta
    std::vector<double> K(n * n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
        b[i] = dot(cols[i], theta);
        for (std::size_t j = 0; j <= i; ++j) K[i * n + j] = K[j * n + i] = dot(cols[i], cols[j]);
    }

    // Largest eigenvalue of K by power iteration sets the step.
    std::vector<double> v(n, 1.0), w(n);
    double lmax = 0.0;
    for (int it = 0; it < 200; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += K[i * n + j] * v[j];
            w[i] = s;
        }
        const double nw = norm2(w);
        if (nw == 0.0) break;
        lmax = nw / std::max(norm2(v), 1e-300);
        for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / nw;
    }

    KktFit fit;
    fit.lambdas.assign(n, 0.0);
    if (lmax > 0.0) {
        const double step = 1.0 / (1.01 * lmax);
        std::vector<double> lam(n, 0.0), prev(n, 0.0), z(n, 0.0);
        double t = 1.0;
        for (int it = 0; it < iterations; ++it) {
            // gradient of 1/2 lam^T K lam - b^T lam at z
            for (std::size_t i = 0; i < n; ++i) {
                double g = -b[i];
                for (std::size_t j = 0; j < n; ++j) g += K[i * n + j] * z[j];
                lam[i] = std::max(0.0, z[i] - step * g);
            }
            const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
            double restart = 0.0;
            for (std::size_t i = 0; i < n; ++i) restart += (z[i] - lam[i]) * (lam[i] - prev[i]);
            if (restart > 0.0) {
                // momentum points uphill: restart
                t = 1.0;
                z = lam;
            } else {
                for (std::size_t i = 0; i < n; ++i) z[i] = lam[i] + ((t - 1.0) / tn) * (lam[i] - prev[i]);
                t = tn;
            }
            prev = lam;
        }
        fit.lambdas = prev;
    }

    std::vector<double> r(theta.begin(), theta.end());
    for (std::size_t i = 0; i < n; ++i)
        if (fit.lambdas[i] != 0.0)
            for (std::size_t j = 0; j < p; ++j) r[j] -= fit.lambdas[i] * cols[i][j];
    const double nt = norm2(theta);
    fit.residual = nt > 0 ? norm2(r) / nt : 0.0;
    return fit;
}

}  // namespace invrec
