#include "rg4/tensor.hpp"

#include <sstream>
#include <stdexcept>

namespace rg4::core {

size_t shape_numel(const std::vector<int>& shape) {
    size_t n = 1;
    for (int e : shape) {
        if (e < 0) throw std::invalid_argument("tensor: negative extent in shape " + shape_str(shape));
        n *= static_cast<size_t>(e);
    }
    return n;
}

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << '(';
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ')';
    return os.str();
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::make_shared<std::vector<double>>(shape_numel(t.shape_), 0.0);
    t.set_requires_grad(requires_grad);
    return t;
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (auto& x : *t.data_) x = value;
    return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values, bool requires_grad) {
    if (shape_numel(shape) != values.size())
        throw std::invalid_argument("tensor: " + std::to_string(values.size()) +
                                    " values do not fill shape " + core::shape_str(shape));
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::make_shared<std::vector<double>>(std::move(values));
    t.set_requires_grad(requires_grad);
    return t;
}

Tensor Tensor::scalar(double value) { return from({}, {value}); }

size_t Tensor::numel() const { return data_ ? data_->size() : 0; }

int Tensor::rows() const {
    if (rank() != 2) throw std::invalid_argument("tensor: rows() on rank-" + std::to_string(rank()) + " tensor");
    return shape_[0];
}

int Tensor::cols() const {
    if (rank() != 2) throw std::invalid_argument("tensor: cols() on rank-" + std::to_string(rank()) + " tensor");
    return shape_[1];
}

double& Tensor::at(int r, int c) {
    const int w = rank() == 2 ? shape_[1] : 1;
    return (*data_)[static_cast<size_t>(r) * w + c];
}

double Tensor::at(int r, int c) const {
    const int w = rank() == 2 ? shape_[1] : 1;
    return (*data_)[static_cast<size_t>(r) * w + c];
}

double Tensor::item() const {
    if (!is_scalar()) throw std::invalid_argument("tensor: item() on non-scalar " + core::shape_str(shape_));
    return (*data_)[0];
}

void Tensor::set_requires_grad(bool v) {
    requires_grad_ = v;
    if (v && !grad_) grad_ = std::make_shared<std::vector<double>>(numel(), 0.0);
    if (!v) grad_.reset();
}

std::vector<double>& Tensor::grad() {
    if (!grad_) throw std::runtime_error("tensor: grad() on tensor without requires_grad");
    return *grad_;
}

const std::vector<double>& Tensor::grad() const {
    if (!grad_) throw std::runtime_error("tensor: grad() on tensor without requires_grad");
    return *grad_;
}

void Tensor::zero_grad() {
    if (grad_) std::fill(grad_->begin(), grad_->end(), 0.0);
}

Tensor Tensor::clone() const {
    Tensor t;
    t.shape_ = shape_;
    t.data_ = std::make_shared<std::vector<double>>(*data_);
    return t;
}

Tensor Tensor::reshape(std::vector<int> new_shape) const {
    if (shape_numel(new_shape) != numel())
        throw std::invalid_argument("tensor: reshape " + core::shape_str(shape_) + " -> " + core::shape_str(new_shape));
    Tensor t = *this;
    t.shape_ = std::move(new_shape);
    return t;
}

std::string Tensor::shape_str() const { return core::shape_str(shape_); }

}  // namespace rg4::core
