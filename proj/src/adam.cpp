#include "splatcast/adam.hpp"

#include <cmath>

namespace splatcast::diff {

Adam::Adam(std::vector<NamedParam> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
    states_.resize(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const std::size_t n = params_[i].tensor.values().size();
        states_[i].m.assign(n, 0.0);
        states_[i].v.assign(n, 0.0);
    }
}

void Adam::step() {
    for (const auto& p : params_) {
        if (!p.tensor.has_grad()) {
            throw OpError("adam_step: missing gradient for parameter '" + p.name + "'");
        }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto& vals = params_[i].tensor.values();
        const auto& g = params_[i].tensor.grad();
        auto& st = states_[i];
        for (std::size_t j = 0; j < vals.size(); ++j) {
            st.m[j] = cfg_.beta1 * st.m[j] + (1.0 - cfg_.beta1) * g[j];
            st.v[j] = cfg_.beta2 * st.v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
            const double mhat = st.m[j] / bc1;
            const double vhat = st.v[j] / bc2;
            vals[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
        params_[i].tensor.zero_grad();
    }
}

}  // namespace splatcast::diff
