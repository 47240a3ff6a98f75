#pragma once

#include <map>
#include <string>
#include <vector>

#include "rg4/tensor.hpp"

namespace rg4::core {

struct NamedParam {
    std::string name;
    Tensor* tensor = nullptr;
    bool trainable = true;
};

// Flat registry of a model's parameters. Blocks append themselves under a
// dotted prefix; trainable mirrors requires_grad.
class ParamRegistry {
public:
    void add(std::string name, Tensor& t, bool trainable = true) {
        t.set_requires_grad(trainable);
        items_.push_back({std::move(name), &t, trainable});
    }

    std::vector<NamedParam>& items() { return items_; }
    const std::vector<NamedParam>& items() const { return items_; }

    std::vector<NamedParam> trainable() const {
        std::vector<NamedParam> out;
        for (const auto& p : items_)
            if (p.trainable) out.push_back(p);
        return out;
    }

    size_t count() const { return items_.size(); }

    size_t numel() const {
        size_t n = 0;
        for (const auto& p : items_) n += p.tensor->numel();
        return n;
    }

    void zero_grad() {
        for (auto& p : items_) p.tensor->zero_grad();
    }

    const NamedParam* find(const std::string& name) const {
        for (const auto& p : items_)
            if (p.name == name) return &p;
        return nullptr;
    }

    std::map<std::string, std::vector<double>> snapshot() const {
        std::map<std::string, std::vector<double>> out;
        for (const auto& p : items_) out[p.name] = p.tensor->vec();
        return out;
    }

private:
    std::vector<NamedParam> items_;
};

}  // namespace rg4::core
