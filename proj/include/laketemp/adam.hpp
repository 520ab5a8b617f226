#pragma once

#include <string>
#include <utility>
#include <vector>

#include "laketemp/tensor.hpp"

namespace laketemp {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Bias-corrected ADAM with per-parameter first/second moment accumulators.
///
///   m <- b1*m + (1-b1)*g          v <- b2*v + (1-b2)*g^2
///   x <- x - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
class AdamState {
public:
    AdamState() = default;
    static AdamState init(const std::vector<std::pair<std::string, Tensor>>& params,
                          AdamConfig cfg = {});

    long long step_count() const { return step_; }
    const AdamConfig& config() const { return cfg_; }
    const std::vector<std::vector<double>>& first_moments() const { return m_; }
    const std::vector<std::vector<double>>& second_moments() const { return v_; }

    /// Restore a serialized state (checkpoint resume).
    static AdamState restore(AdamConfig cfg, long long step,
                             std::vector<std::vector<double>> m,
                             std::vector<std::vector<double>> v);

private:
    AdamConfig cfg_;
    long long step_ = 0;
    std::vector<std::vector<double>> m_, v_;

    friend void adam_step(std::vector<std::pair<std::string, Tensor>>& params,
                          AdamState& state, double lr);
};

/// One ADAM update over all parameters, reading each tensor's accumulated
/// gradient and writing the new values in place. Increments the step counter.
/// Throws NumericError on accumulator/parameter shape mismatch and on
/// non-finite gradients (message names the offending parameter).
void adam_step(std::vector<std::pair<std::string, Tensor>>& params, AdamState& state,
               double lr);

}  // namespace laketemp
