#pragma once

#include <vector>

#include "rg4/params.hpp"

namespace rg4::core {

struct AdamWConfig {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
    // Linear ramp from 0 to lr over warmup_frac * total_steps, constant after.
    double warmup_frac = 0.1;
    long total_steps = 0;  // 0 disables warmup
};

// AdamW with decoupled weight decay over a fixed parameter list.
class AdamW {
public:
    AdamW(std::vector<NamedParam> params, AdamWConfig cfg);

    // Consumes accumulated gradients; throws on non-finite gradients, naming
    // the parameter. Does not clear gradients.
    void step();
    void zero_grad();

    long step_count() const { return step_; }
    double lr_at(long step) const;  // effective lr for 1-based step index
    double current_lr() const { return lr_at(step_ + 1); }

    const std::vector<double>& first_moment(size_t i) const { return m_[i]; }
    const std::vector<double>& second_moment(size_t i) const { return v_[i]; }

private:
    std::vector<NamedParam> params_;
    AdamWConfig cfg_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    long step_ = 0;
};

}  // namespace rg4::core
