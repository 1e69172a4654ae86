#include "invrec/invariant_model.hpp"

namespace invrec {

InvariantModel::InvariantModel(ParamVector params, GroupSpec group)
    : params_(std::move(params)), group_(std::move(group)) {
    if (static_cast<std::size_t>(params_.arch().d) != group_.grid().size())
        throw DimensionError("InvariantModel: arch.d does not match the group's grid");
}

void InvariantModel::check_dim(std::span<const double> x) const {
    if (x.size() != dim()) throw DimensionError("InvariantModel: input dimension mismatch");
}

void InvariantModel::reduce_terms(SymWorkspace& ws, std::span<double> out) const {
    const std::size_t G = group_.order();
    const double inv = 1.0 / static_cast<double>(G);
    if (G == 1) {
        std::copy(ws.terms[0].begin(), ws.terms[0].begin() + static_cast<std::ptrdiff_t>(out.size()), out.begin());
        return;
    }
    if (G == 2) {
        const double* t0 = ws.terms[0].data();
        const double* t1 = ws.terms[1].data();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = (t0[i] + t1[i]) * inv;
        return;
    }
    ws.column.resize(G);
    for (std::size_t i = 0; i < out.size(); ++i) {
        for (std::size_t k = 0; k < G; ++k) ws.column[k] = ws.terms[k][i];
        out[i] = canonical_sum(ws.column) * inv;
    }
}

double InvariantModel::forward(std::span<const double> x, SymWorkspace& ws) const {
    check_dim(x);
    const std::size_t G = group_.order();
    ws.gx.resize(dim());
    ws.scalars.resize(G);
    for (std::size_t k = 0; k < G; ++k) {
        apply_into(group_[k], x, ws.gx);
        forward_record(params_, ws.gx, ws.rec);
        ws.scalars[k] = ws.rec.output;
    }
    return canonical_sum(ws.scalars) / static_cast<double>(G);
}

double InvariantModel::forward(std::span<const double> x) const {
    SymWorkspace ws;
    return forward(x, ws);
}

double InvariantModel::grad_params_sym(std::span<const double> x, std::span<double> out, SymWorkspace& ws) const {
    check_dim(x);
    if (out.size() != params_.size()) throw DimensionError("grad_params_sym: output length mismatch");
    const std::size_t G = group_.order();
    ws.gx.resize(dim());
    ws.terms.resize(G);
    ws.scalars.resize(G);
    for (std::size_t k = 0; k < G; ++k) {
        ws.terms[k].resize(params_.size());
        apply_into(group_[k], x, ws.gx);
        ws.scalars[k] = grad_params_into(params_, ws.gx, ws.terms[k], ws.rec);
    }
    reduce_terms(ws, out);
    return canonical_sum(ws.scalars) / static_cast<double>(G);
}

std::vector<double> InvariantModel::grad_params_sym(std::span<const double> x) const {
    std::vector<double> out(params_.size());
    SymWorkspace ws;
    grad_params_sym(x, out, ws);
    return out;
}

void InvariantModel::grad_input_sym(std::span<const double> x, std::span<double> out, SymWorkspace& ws) const {
    check_dim(x);
    if (out.size() != dim()) throw DimensionError("grad_input_sym: output length mismatch");
    const std::size_t G = group_.order();
    ws.gx.resize(dim());
    ws.terms.resize(G);
    std::vector<double> g(dim());
    for (std::size_t k = 0; k < G; ++k) {
        ws.terms[k].resize(dim());
        apply_into(group_[k], x, ws.gx);
        grad_input_into(params_, ws.gx, g, ws.rec);
        apply_transpose_into(group_[k], g, std::span<double>(ws.terms[k].data(), dim()));
    }
    reduce_terms(ws, out);
}

std::vector<double> InvariantModel::grad_input_sym(std::span<const double> x) const {
    std::vector<double> out(dim());
    SymWorkspace ws;
    grad_input_sym(x, out, ws);
    return out;
}

void InvariantModel::mixed_vjp_sym(std::span<const double> x, std::span<const double> v, std::span<double> out,
                                   SymWorkspace& ws) const {
    check_dim(x);
    if (out.size() != dim()) throw DimensionError("mixed_vjp_sym: output length mismatch");
    const std::size_t G = group_.order();
    ws.gx.resize(dim());
    ws.terms.resize(G);
    std::vector<double> g(dim());
    for (std::size_t k = 0; k < G; ++k) {
        ws.terms[k].resize(std::max(ws.terms[k].size(), dim()));
        apply_into(group_[k], x, ws.gx);
        mixed_vjp_into(params_, ws.gx, v, g, ws.rec);
        apply_transpose_into(group_[k], g, std::span<double>(ws.terms[k].data(), dim()));
    }
    reduce_terms(ws, out);
}

std::vector<double> InvariantModel::mixed_vjp_sym(std::span<const double> x, std::span<const double> v) const {
    std::vector<double> out(dim());
    SymWorkspace ws;
    mixed_vjp_sym(x, v, out, ws);
    return out;
}

}  // namespace invrec
