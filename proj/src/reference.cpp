#include "invrec/reference.hpp"

#include <cmath>
#include <limits>

namespace invrec::reference {

ObjectiveGrad objective_grad(Objective objective, const InvariantModel& model,
                             const std::vector<ImageTensor>& candidates, std::span<const double> lambdas,
                             std::span<const int> labels) {
    const std::size_t m = candidates.size(), d = model.dim(), p = model.params().size();
    ObjectiveGrad out;
    out.grad_x.assign(m, std::vector<double>(d));
    out.grad_lambda.assign(m, 0.0);
    SymWorkspace ws;

    if (objective == Objective::AM) {
        for (std::size_t i = 0; i < m; ++i) {
            out.loss += -labels[i] * model.forward(candidates[i].values(), ws);
            model.grad_input_sym(candidates[i].values(), out.grad_x[i], ws);
            const double s = -static_cast<double>(labels[i]);
            for (double& g : out.grad_x[i]) g *= s;
        }
        return out;
    }

    std::vector<std::vector<double>> G(m, std::vector<double>(p));
    for (std::size_t i = 0; i < m; ++i) model.grad_params_sym(candidates[i].values(), G[i], ws);
    auto theta = model.params().theta();
    std::vector<double> r(p);
    for (std::size_t j = 0; j < p; ++j) {
        double s = theta[j];
        for (std::size_t i = 0; i < m; ++i) s -= lambdas[i] * labels[i] * G[i][j];
        r[j] = s;
    }
    out.loss = dot(r, r);
    for (std::size_t i = 0; i < m; ++i) {
        out.grad_lambda[i] = -2.0 * labels[i] * dot(r, G[i]);
        if (lambdas[i] == 0.0) continue;
        model.mixed_vjp_sym(candidates[i].values(), r, out.grad_x[i], ws);
        const double s = -2.0 * lambdas[i] * labels[i];
        for (double& g : out.grad_x[i]) g *= s;
    }
    return out;
}

double bce_loss_and_grad(const InvariantModel& model, const LabeledDataset& data, std::span<double> grad) {
    const std::size_t n = data.size(), p = model.params().size();
    std::vector<std::vector<double>> per(n, std::vector<double>(p));
    std::vector<double> f(n);
    SymWorkspace ws;
    for (std::size_t i = 0; i < n; ++i) f[i] = model.grad_params_sym(data.samples[i].values(), per[i], ws);
    double loss = 0.0;
    std::vector<double> coef(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double y = data.labels[i], m = y * f[i];
        loss += m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
        const double sig = m >= 0 ? std::exp(-m) / (1.0 + std::exp(-m)) : 1.0 / (1.0 + std::exp(m));
        coef[i] = -y * sig / static_cast<double>(n);
    }
    for (std::size_t j = 0; j < p; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += coef[i] * per[i][j];
        grad[j] = s;
    }
    return loss / static_cast<double>(n);
}

MatchResult match_invariant(const std::vector<ImageTensor>& candidates, const LabeledDataset& data,
                            const GroupSpec& group) {
    MatchResult res;
    for (const auto& x : candidates) {
        Match best;
        best.dssim = std::numeric_limits<double>::infinity();
        std::vector<double> row(data.size(), std::numeric_limits<double>::infinity());
        for (std::size_t j = 0; j < data.size(); ++j)
            for (std::size_t k = 0; k < group.order(); ++k) {
                const ImageTensor y = apply(group[k], data.samples[j]);
                const double v = dssim(x, y);
                row[j] = std::min(row[j], v);
                if (v < best.dssim) {
                    best = {j, k, v, 0.0};
                    double s = 0.0;
                    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
                    best.l2 = std::sqrt(s);
                }
            }
        res.matches.push_back(best);
        res.pair_dssim.push_back(std::move(row));
    }
    return res;
}

}  // namespace invrec::reference
