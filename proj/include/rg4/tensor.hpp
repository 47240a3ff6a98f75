#pragma once

#include <memory>
#include <string>
#include <vector>

namespace rg4::core {

// Dense row-major f64 tensor. Copies are shallow handles: data and gradient
// buffers are shared, so a parameter copied into the tape accumulates into
// the same gradient storage the optimizer reads.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor full(std::vector<int> shape, double value, bool requires_grad = false);
    static Tensor from(std::vector<int> shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value);

    bool defined() const { return data_ != nullptr; }
    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    size_t numel() const;
    bool is_scalar() const { return numel() == 1; }

    int rows() const;  // rank-2 only
    int cols() const;

    double* data() { return data_->data(); }
    const double* data() const { return data_->data(); }
    std::vector<double>& vec() { return *data_; }
    const std::vector<double>& vec() const { return *data_; }

    double& at(int r, int c = 0);
    double at(int r, int c = 0) const;
    double item() const;  // scalar only

    bool requires_grad() const { return requires_grad_; }
    void set_requires_grad(bool v);

    // Gradient buffer; only tensors with requires_grad own one.
    std::vector<double>& grad();
    const std::vector<double>& grad() const;
    bool has_grad() const { return grad_ != nullptr; }
    void zero_grad();

    // Deep copy of values; the result is a detached leaf.
    Tensor clone() const;
    // Same storage, different shape; numel must match. No tape record needed
    // because the gradient buffer is shared too.
    Tensor reshape(std::vector<int> new_shape) const;

    int node() const { return node_; }
    void set_node(int id) { node_ = id; }

    std::string shape_str() const;

private:
    std::vector<int> shape_;
    std::shared_ptr<std::vector<double>> data_;
    std::shared_ptr<std::vector<double>> grad_;
    bool requires_grad_ = false;
    int node_ = -1;
};

std::string shape_str(const std::vector<int>& shape);
size_t shape_numel(const std::vector<int>& shape);

}  // namespace rg4::core
