#pragma once

#include <string>
#include <vector>

#include "splatcast/tensor.hpp"

namespace splatcast::diff {

/// A learnable tensor with a stable name (used in error messages, dumps).
struct NamedParam {
    std::string name;
    Tensor tensor;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<double> m;  // first moment
    std::vector<double> v;  // second moment
};

/**
 * @brief Adam with bias correction over a fixed parameter list.
 *
 * step() applies the standard update using the post-increment step count for
 * bias correction, then clears every gradient. A parameter whose gradient was
 * never populated is an error naming the parameter.
 */
class Adam {
public:
    Adam(std::vector<NamedParam> params, AdamConfig cfg);

    void step();
    long step_count() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

private:
    std::vector<NamedParam> params_;
    std::vector<AdamState> states_;
    AdamConfig cfg_;
    long t_ = 0;
};

}  // namespace splatcast::diff
