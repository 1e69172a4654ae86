#include "invrec/objectives.hpp"

#include <stdexcept>
#include <string>

#include "invrec/parallel.hpp"

namespace invrec {

Objective parse_objective(std::string_view s) {
    if (s == "am") return Objective::AM;
    if (s == "kkt") return Objective::KKT;
    throw std::invalid_argument("unknown objective '" + std::string(s) + "'");
}

std::string_view to_string(Objective o) { return o == Objective::AM ? "am" : "kkt"; }

double am_loss(const InvariantModel& model, std::span<const double> x, int y) { return -y * model.forward(x); }

namespace {

void check_state(const InvariantModel& model, const std::vector<ImageTensor>& candidates,
                 std::span<const double> lambdas, std::span<const int> labels) {
    if (lambdas.size() != candidates.size() || labels.size() != candidates.size())
        throw DimensionError("objective: candidates, lambdas and labels must have equal length");
    for (const auto& c : candidates)
        if (c.size() != model.dim()) throw DimensionError("objective: candidate dimension mismatch");
}

// Per-candidate parameter gradients G_i and r = theta - sum lambda_i y_i G_i.
void kkt_forward(const InvariantModel& model, const std::vector<ImageTensor>& candidates,
                 std::span<const double> lambdas, std::span<const int> labels,
                 std::vector<std::vector<double>>& G, std::vector<double>& r) {
    const long m = static_cast<long>(candidates.size());
    const std::size_t p = model.params().size();
    G.resize(candidates.size());
    for (auto& g : G) g.resize(p);  // every entry is overwritten below
    PerThread<SymWorkspace> ws;
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < m; ++i) model.grad_params_sym(candidates[i].values(), G[i], ws.local());

    auto theta = model.params().theta();
    r.resize(p);
    const long pl = static_cast<long>(p);
#pragma omp parallel for schedule(static)
    for (long j = 0; j < pl; ++j) {
        double s = theta[j];
        for (long i = 0; i < m; ++i) s -= lambdas[i] * labels[i] * G[i][j];
        r[j] = s;
    }
}

}  // namespace

std::vector<double> kkt_residual_vector(const InvariantModel& model, const std::vector<ImageTensor>& candidates,
                                        std::span<const double> lambdas, std::span<const int> labels) {
    check_state(model, candidates, lambdas, labels);
    static thread_local std::vector<std::vector<double>> G;  // reused across steps
    std::vector<double> r;
    kkt_forward(model, candidates, lambdas, labels, G, r);
    return r;
}

double kkt_loss(const InvariantModel& model, const std::vector<ImageTensor>& candidates,
                std::span<const double> lambdas, std::span<const int> labels) {
    auto r = kkt_residual_vector(model, candidates, lambdas, labels);
    return dot(r, r);
}

double objective_value(Objective objective, const InvariantModel& model, const std::vector<ImageTensor>& candidates,
                       std::span<const double> lambdas, std::span<const int> labels) {
    check_state(model, candidates, lambdas, labels);
    if (objective == Objective::KKT) return kkt_loss(model, candidates, lambdas, labels);
    double s = 0.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) s += am_loss(model, candidates[i].values(), labels[i]);
    return s;
}

ObjectiveGrad objective_grad(Objective objective, const InvariantModel& model,
                             const std::vector<ImageTensor>& candidates, std::span<const double> lambdas,
                             std::span<const int> labels) {
    check_state(model, candidates, lambdas, labels);
    const long m = static_cast<long>(candidates.size());
    const std::size_t d = model.dim();
    ObjectiveGrad out;
    out.grad_x.assign(candidates.size(), std::vector<double>(d));
    out.grad_lambda.assign(candidates.size(), 0.0);
    PerThread<SymWorkspace> ws;

    if (objective == Objective::AM) {
        std::vector<double> f(candidates.size());
#pragma omp parallel for schedule(dynamic)
        for (long i = 0; i < m; ++i) {
            auto& w = ws.local();
            f[i] = -labels[i] * model.forward(candidates[i].values(), w);
            model.grad_input_sym(candidates[i].values(), out.grad_x[i], w);
            const double s = -static_cast<double>(labels[i]);
            for (double& g : out.grad_x[i]) g *= s;
        }
        for (long i = 0; i < m; ++i) out.loss += f[i];
        return out;
    }

    // reused across steps; bound by reference so worker threads see this
    // thread's buffer rather than their own thread_local copy
    static thread_local std::vector<std::vector<double>> buffer;
    auto& G = buffer;
    std::vector<double> r;
    kkt_forward(model, candidates, lambdas, labels, G, r);
    out.loss = dot(r, r);
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < m; ++i) {
        out.grad_lambda[i] = -2.0 * labels[i] * dot(r, G[i]);
        if (lambdas[i] == 0.0) continue;
        model.mixed_vjp_sym(candidates[i].values(), r, out.grad_x[i], ws.local());
        const double s = -2.0 * lambdas[i] * labels[i];
        for (double& g : out.grad_x[i]) g *= s;
    }
    return out;
}

}  // namespace invrec
