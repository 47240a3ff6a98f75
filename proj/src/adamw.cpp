#include "rg4/adamw.hpp"

#include <cmath>
#include <stdexcept>

namespace rg4::core {

AdamW::AdamW(std::vector<NamedParam> params, AdamWConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
        m_.emplace_back(p.tensor->numel(), 0.0);
        v_.emplace_back(p.tensor->numel(), 0.0);
    }
}

double AdamW::lr_at(long step) const {
    if (cfg_.total_steps <= 0 || cfg_.warmup_frac <= 0.0) return cfg_.lr;
    const long warmup = std::max<long>(1, std::lround(cfg_.warmup_frac * cfg_.total_steps));
    if (step >= warmup) return cfg_.lr;
    return cfg_.lr * static_cast<double>(step) / static_cast<double>(warmup);
}

void AdamW::step() {
    ++step_;
    const double lr = lr_at(step_);
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (size_t k = 0; k < params_.size(); ++k) {
        auto& p = params_[k];
        auto& w = p.tensor->vec();
        const auto& g = p.tensor->grad();
        auto& m = m_[k];
        auto& v = v_[k];
        for (size_t i = 0; i < w.size(); ++i) {
            if (!std::isfinite(g[i]))
                throw std::runtime_error("adamw: non-finite gradient in parameter '" + p.name + "'");
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * w[i]);
        }
    }
}

void AdamW::zero_grad() {
    for (auto& p : params_) p.tensor->zero_grad();
}

}  // namespace rg4::core
