#include "nilm/core/adam.hpp"

#include <cmath>
#include <set>

#include "nilm/error.hpp"

namespace nilm {

Adam::Adam(AdamConfig config) : config_(config) {
    if (!(config_.learning_rate > 0.0)) throw Error("adam: learning rate must be positive");
    if (!(config_.beta1 > 0.0 && config_.beta1 < 1.0) || !(config_.beta2 > 0.0 && config_.beta2 < 1.0)) {
        throw Error("adam: decay rates must lie in (0, 1)");
    }
    if (!(config_.epsilon > 0.0)) throw Error("adam: epsilon must be positive");
}

const Adam::Moments* Adam::moments(const std::string& name) const {
    auto it = state_.find(name);
    return it == state_.end() ? nullptr : &it->second;
}

void Adam::step(std::span<Parameter> params) {
    std::set<std::string> seen;
    for (const Parameter& p : params) {
        if (!seen.insert(p.name).second) throw Error("adam: duplicate parameter name '" + p.name + "'");
        if (!p.trainable) continue;
        if (!p.tensor.has_grad()) throw Error("adam: trainable parameter '" + p.name + "' has no gradient");
        auto it = state_.find(p.name);
        if (it != state_.end() && it->second.first.size() != p.tensor.size()) {
            throw Error("adam: parameter '" + p.name + "' changed shape to " + shape_str(p.tensor.shape()));
        }
    }

    ++steps_;
    const double t = static_cast<double>(steps_);
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double correction1 = 1.0 - std::pow(b1, t);
    const double correction2 = 1.0 - std::pow(b2, t);
    const double lr = config_.learning_rate;
    const double eps = config_.epsilon;

    for (Parameter& p : params) {
        if (!p.trainable) continue;
        Moments& mom = state_[p.name];
        if (mom.first.empty()) {
            mom.first.assign(p.tensor.size(), 0.0);
            mom.second.assign(p.tensor.size(), 0.0);
        }
        double* theta = p.tensor.data();
        const double* g = p.tensor.grad().data();
        double* m = mom.first.data();
        double* v = mom.second.data();
        const std::size_t n = p.tensor.size();
#pragma omp parallel for schedule(static)
        for (std::size_t i = 0; i < n; ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            const double m_hat = m[i] / correction1;
            const double v_hat = v[i] / correction2;
            theta[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
        }
        p.tensor.clear_grad();
    }
}

}  // namespace nilm
