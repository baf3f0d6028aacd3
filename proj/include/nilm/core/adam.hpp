#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "nilm/core/tensor.hpp"

namespace nilm {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Adam with bias correction. Moment buffers are keyed by parameter name.
class Adam {
public:
    struct Moments {
        std::vector<double> first;
        std::vector<double> second;
    };

    explicit Adam(AdamConfig config = {});

    // Rejects the whole step (no parameter touched) if any trainable parameter
    // lacks a gradient. Clears the gradients of updated parameters.
    void step(std::span<Parameter> params);

    std::uint64_t steps() const { return steps_; }
    const AdamConfig& config() const { return config_; }
    const Moments* moments(const std::string& name) const;

private:
    AdamConfig config_;
    std::uint64_t steps_ = 0;
    std::map<std::string, Moments> state_;
};

}  // namespace nilm
