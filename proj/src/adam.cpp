#include "traco/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace traco {

std::size_t ParamStore::add(std::string name, Matrix value) {
    if (index_.count(name)) throw std::invalid_argument("ParamStore: duplicate name " + name);
    Param p;
    p.name = std::move(name);
    p.grad = Matrix(value.rows(), value.cols());
    p.value = std::move(value);
    items_.push_back(std::move(p));
    index_.emplace(items_.back().name, items_.size() - 1);
    return items_.size() - 1;
}

Param& ParamStore::by_name(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("ParamStore: unknown name " + name);
    return items_[it->second];
}

const Param& ParamStore::by_name(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("ParamStore: unknown name " + name);
    return items_[it->second];
}

void ParamStore::zero_grads() {
    for (Param& p : items_) p.grad.fill(0.0);
}

void adam_update(Matrix& param, const Matrix& grad, Matrix& m, Matrix& v, long step,
                 const AdamState& cfg, double lr) {
    if (!param.same_shape(grad) || !param.same_shape(m) || !param.same_shape(v)) {
        throw ShapeError("adam_update: parameter/gradient/moment shapes differ");
    }
    if (!(lr > 0.0)) throw std::invalid_argument("adam_update: lr must be > 0");
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad.values()[i];
        double& mi = m.values()[i];
        double& vi = v.values()[i];
        mi = cfg.beta1 * mi + (1.0 - cfg.beta1) * g;
        vi = cfg.beta2 * vi + (1.0 - cfg.beta2) * g * g;
        const double mhat = mi / bc1;
        const double vhat = vi / bc2;
        param.values()[i] -= lr * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
}

void adam_step(ParamStore& params, AdamState& state, double lr) {
    if (state.m.size() != params.count()) {
        state.m.clear();
        state.v.clear();
        for (const Param& p : params) {
            state.m.emplace_back(p.value.rows(), p.value.cols());
            state.v.emplace_back(p.value.rows(), p.value.cols());
        }
    }
    ++state.step;
    for (std::size_t i = 0; i < params.count(); ++i) {
        Param& p = params.at(i);
        adam_update(p.value, p.grad, state.m[i], state.v[i], state.step, state, lr);
    }
}

double clip_global_norm(ParamStore& params, double max_norm) {
    double sq = 0.0;
    for (const Param& p : params) {
        for (double g : p.grad.values()) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (norm <= max_norm || norm == 0.0) return 1.0;
    const double factor = max_norm / norm;
    for (Param& p : params) {
        for (double& g : p.grad.values()) g *= factor;
    }
    return factor;
}

}  // namespace traco
