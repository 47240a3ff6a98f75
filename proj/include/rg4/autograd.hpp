#pragma once

#include <functional>
#include <string>
#include <vector>

#include "rg4/tensor.hpp"

namespace rg4::core {

// One recorded primitive. `backward` reads the output gradient and
// accumulates into the input gradients.
struct TapeNode {
    const char* op;
    std::vector<int> input_ids;
    int output_id;
    Tensor output;
    std::function<void()> backward;
};

// Ordered record of primitive applications. Nodes are appended in execution
// order, so inputs always precede their consumers and one reverse sweep
// visits every node exactly once.
class Tape {
public:
    int record(const char* op, const std::vector<Tensor>& inputs, Tensor& output,
               std::function<void()> backward);
    void clear() { nodes_.clear(); }
    size_t size() const { return nodes_.size(); }
    bool empty() const { return nodes_.empty(); }
    const TapeNode& node(int id) const { return nodes_[static_cast<size_t>(id)]; }

    // Runs the reverse sweep from `loss` (which must be scalar), seeding its
    // gradient with 1. Leaf gradients accumulate across calls; intermediates
    // live only as long as the tape.
    friend void backward(Tape& tape, const Tensor& loss);

private:
    std::vector<TapeNode> nodes_;
};

void backward(Tape& tape, const Tensor& loss);

// Thread-local active tape: distinct threads train distinct models.
Tape& active_tape();

bool grad_enabled();

// Disables recording (and requires_grad propagation) while alive.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

}  // namespace rg4::core
