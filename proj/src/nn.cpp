#include "rg4/nn.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

namespace rg4::nn {

using namespace rg4::core;

Linear Linear::init(int in_dim, int out_dim, Rng& rng, bool bias, double std) {
    Linear l;
    l.w = Tensor::zeros({out_dim, in_dim});
    for (auto& v : l.w.vec()) v = rng.normal(0.0, std);
    l.has_bias = bias;
    if (bias) l.b = Tensor::zeros({out_dim});
    return l;
}

Tensor Linear::forward(const Tensor& x) const {
    Tensor y = matmul(x, transpose(w));
    if (has_bias) y = add_rowwise(y, b);
    return y;
}

void Linear::params(ParamRegistry& reg, const std::string& prefix, bool trainable) {
    reg.add(prefix + ".w", w, trainable);
    if (has_bias) reg.add(prefix + ".b", b, trainable);
}

LayerNorm LayerNorm::init(int dim) {
    LayerNorm ln;
    ln.gain = Tensor::full({dim}, 1.0);
    ln.bias = Tensor::zeros({dim});
    return ln;
}

Tensor LayerNorm::forward(const Tensor& x) const { return layer_norm(x, gain, bias); }

void LayerNorm::params(ParamRegistry& reg, const std::string& prefix, bool trainable) {
    reg.add(prefix + ".gain", gain, trainable);
    reg.add(prefix + ".bias", bias, trainable);
}

MultiHeadAttention MultiHeadAttention::init(int dim, int heads, Rng& rng) {
    if (heads <= 0 || dim % heads != 0)
        throw std::invalid_argument("attention: dim " + std::to_string(dim) +
                                    " not divisible by heads " + std::to_string(heads));
    MultiHeadAttention a;
    a.heads = heads;
    a.wq = Linear::init(dim, dim, rng);
    a.wk = Linear::init(dim, dim, rng);
    a.wv = Linear::init(dim, dim, rng);
    a.wo = Linear::init(dim, dim, rng);
    return a;
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& mask, int heads) {
    const int dim = q.cols();
    if (heads <= 0 || dim % heads != 0)
        throw std::invalid_argument("attention: dim " + std::to_string(dim) +
                                    " not divisible by heads " + std::to_string(heads));
    if (k.cols() != dim || v.cols() != dim || k.rows() != v.rows())
        throw std::invalid_argument("attention: k " + k.shape_str() + " / v " + v.shape_str() +
                                    " inconsistent with q " + q.shape_str());
    if (mask.rows() != q.rows() || mask.cols() != k.rows())
        throw std::invalid_argument("attention: mask " + mask.shape_str() + " does not cover " +
                                    std::to_string(q.rows()) + "x" + std::to_string(k.rows()));
    const int dh = dim / heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<Tensor> head_outs;
    head_outs.reserve(static_cast<size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        Tensor qh = slice(q, 1, h * dh, dh);
        Tensor kh = slice(k, 1, h * dh, dh);
        Tensor vh = slice(v, 1, h * dh, dh);
        Tensor scores = add(scale(matmul(qh, transpose(kh)), inv_sqrt), mask);
        head_outs.push_back(matmul(softmax(scores), vh));
    }
    return heads == 1 ? head_outs[0] : concat(head_outs, 1);
}

Tensor MultiHeadAttention::forward(const Tensor& q_in, const Tensor& kv_in, const Tensor& mask) const {
    const int dim = wq.out_dim();
    if (q_in.cols() != dim || kv_in.cols() != dim)
        throw std::invalid_argument("attention: input dim " + q_in.shape_str() + "/" +
                                    kv_in.shape_str() + " vs model dim " + std::to_string(dim));
    return wo.forward(attention(wq.forward(q_in), wk.forward(kv_in), wv.forward(kv_in), mask, heads));
}

void MultiHeadAttention::params(ParamRegistry& reg, const std::string& prefix, bool trainable) {
    wq.params(reg, prefix + ".wq", trainable);
    wk.params(reg, prefix + ".wk", trainable);
    wv.params(reg, prefix + ".wv", trainable);
    wo.params(reg, prefix + ".wo", trainable);
}

FeedForward FeedForward::init(int dim, int hidden, Rng& rng) {
    FeedForward f;
    f.fc1 = Linear::init(dim, hidden, rng);
    f.fc2 = Linear::init(hidden, dim, rng);
    return f;
}

Tensor FeedForward::forward(const Tensor& x) const { return fc2.forward(gelu(fc1.forward(x))); }

void FeedForward::params(ParamRegistry& reg, const std::string& prefix, bool trainable) {
    fc1.params(reg, prefix + ".fc1", trainable);
    fc2.params(reg, prefix + ".fc2", trainable);
}

TransformerLayer TransformerLayer::init(int dim, int heads, Rng& rng) {
    TransformerLayer t;
    t.ln1 = LayerNorm::init(dim);
    t.ln2 = LayerNorm::init(dim);
    t.attn = MultiHeadAttention::init(dim, heads, rng);
    t.ff = FeedForward::init(dim, 4 * dim, rng);
    return t;
}

Tensor TransformerLayer::forward(const Tensor& x, const Tensor& mask) const {
    Tensor h = ln1.forward(x);
    Tensor y = add(x, attn.forward(h, h, mask));
    return add(y, ff.forward(ln2.forward(y)));
}

void TransformerLayer::params(ParamRegistry& reg, const std::string& prefix, bool trainable) {
    ln1.params(reg, prefix + ".ln1", trainable);
    ln2.params(reg, prefix + ".ln2", trainable);
    attn.params(reg, prefix + ".attn", trainable);
    ff.params(reg, prefix + ".ff", trainable);
}

Tensor full_mask(int q_len, int k_len) { return Tensor::zeros({q_len, k_len}); }

Tensor causal_prefix_mask(int prefix_len, int total_len) {
    Tensor m = Tensor::zeros({total_len, total_len});
    for (int i = 0; i < total_len; ++i)
        for (int j = 0; j < total_len; ++j) {
            const bool visible = j < prefix_len || (i >= prefix_len && j <= i);
            if (!visible) m.at(i, j) = kMaskOff;
        }
    return m;
}

void validate_decoder_mask(const Tensor& mask, int prefix_len) {
    for (int i = prefix_len; i < mask.rows(); ++i)
        for (int j = i + 1; j < mask.cols(); ++j)
            if (mask.at(i, j) == 0.0)
                throw std::invalid_argument("decoder mask violates causality at (" +
                                            std::to_string(i) + "," + std::to_string(j) + ")");
}

}  // namespace rg4::nn
