#include "rg4/lora.hpp"

#include <stdexcept>

namespace rg4::nn {

using namespace rg4::core;

void LoraLinear::enable(int r, double a_scale, Rng& rng) {
    if (r < 1) throw std::invalid_argument("lora: rank must be >= 1");
    rank = r;
    alpha = a_scale;
    a = Tensor::zeros({r, base.in_dim()});
    for (auto& v : a.vec()) v = rng.normal(0.0, 0.02);
    b = Tensor::zeros({base.out_dim(), r});
    enabled = true;
}

Tensor LoraLinear::forward(const Tensor& x) const {
    Tensor y = base.forward(x);
    if (!enabled) return y;
    Tensor delta = matmul(matmul(x, transpose(a)), transpose(b));
    return add(y, scale(delta, alpha / rank));
}

Tensor LoraLinear::merged_weight() const {
    NoGradGuard ng;
    if (!enabled) return base.w.clone();
    return add(base.w, scale(matmul(b, a), alpha / rank)).clone();
}

void LoraLinear::params(ParamRegistry& reg, const std::string& prefix, bool base_trainable,
                        bool adapter_trainable) {
    base.params(reg, prefix, base_trainable);
    if (enabled) {
        reg.add(prefix + ".lora_a", a, adapter_trainable);
        reg.add(prefix + ".lora_b", b, adapter_trainable);
    }
}

}  // namespace rg4::nn
