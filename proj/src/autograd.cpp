#include "rg4/autograd.hpp"

#include <stdexcept>

namespace rg4::core {

namespace {
thread_local Tape g_tape;
thread_local bool g_grad_enabled = true;
}  // namespace

Tape& active_tape() { return g_tape; }

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

int Tape::record(const char* op, const std::vector<Tensor>& inputs, Tensor& output,
                 std::function<void()> backward_fn) {
    TapeNode n;
    n.op = op;
    for (const auto& in : inputs) n.input_ids.push_back(in.node());
    n.output_id = static_cast<int>(nodes_.size());
    n.output = output;
    n.backward = std::move(backward_fn);
    output.set_node(n.output_id);
    n.output.set_node(n.output_id);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

void backward(Tape& tape, const Tensor& loss) {
    if (!loss.is_scalar())
        throw std::invalid_argument("backward: loss must be scalar, got " + loss.shape_str());
    if (tape.empty()) throw std::invalid_argument("backward: tape is empty");
    if (!loss.requires_grad() || loss.node() < 0) return;  // constant loss, nothing to propagate

    const_cast<Tensor&>(loss).grad()[0] += 1.0;
    for (int id = loss.node(); id >= 0; --id) {
        auto& n = tape.nodes_[static_cast<size_t>(id)];
        if (n.backward) n.backward();
    }
}

}  // namespace rg4::core
