#include "laketemp/adam.hpp"

#include <cmath>

#include "laketemp/errors.hpp"

namespace laketemp {

AdamState AdamState::init(const std::vector<std::pair<std::string, Tensor>>& params,
                          AdamConfig cfg) {
    AdamState st;
    st.cfg_ = cfg;
    st.m_.reserve(params.size());
    st.v_.reserve(params.size());
    for (const auto& [name, t] : params) {
        (void)name;
        st.m_.emplace_back(t.size(), 0.0);
        st.v_.emplace_back(t.size(), 0.0);
    }
    return st;
}

AdamState AdamState::restore(AdamConfig cfg, long long step,
                             std::vector<std::vector<double>> m,
                             std::vector<std::vector<double>> v) {
    if (m.size() != v.size()) throw NumericError("adam restore: accumulator count mismatch");
    AdamState st;
    st.cfg_ = cfg;
    st.step_ = step;
    st.m_ = std::move(m);
    st.v_ = std::move(v);
    return st;
}

void adam_step(std::vector<std::pair<std::string, Tensor>>& params, AdamState& state,
               double lr) {
    if (params.size() != state.m_.size())
        throw NumericError("adam_step: state holds a different number of parameters");
    const double b1 = state.cfg_.beta1;
    const double b2 = state.cfg_.beta2;
    const double eps = state.cfg_.epsilon;
    const long long t = state.step_ + 1;
    const double corr1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double corr2 = 1.0 - std::pow(b2, static_cast<double>(t));

    for (size_t p = 0; p < params.size(); ++p) {
        auto& [name, tensor] = params[p];
        auto vals = tensor.values_mut();
        auto grads = tensor.grad();
        auto& m = state.m_[p];
        auto& v = state.v_[p];
        if (m.size() != vals.size())
            throw NumericError("adam_step: accumulator shape mismatch for parameter '" +
                               name + "'");
        // A parameter that never entered any graph has an empty gradient
        // buffer; treat it as all-zero (no update beyond moment decay).
        if (!grads.empty() && grads.size() != vals.size())
            throw NumericError("adam_step: gradient shape mismatch for parameter '" + name +
                               "'");
        for (size_t i = 0; i < vals.size(); ++i) {
            const double g = grads.empty() ? 0.0 : grads[i];
            if (!std::isfinite(g))
                throw NumericError("adam_step: non-finite gradient in parameter '" + name +
                                   "'");
            m[i] = b1 * m[i] + (1.0 - b1) * g;
            v[i] = b2 * v[i] + (1.0 - b2) * g * g;
            const double mhat = m[i] / corr1;
            const double vhat = v[i] / corr2;
            vals[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
    state.step_ = t;
}

}  // namespace laketemp
