#include "rg4/ops.hpp"

#include <cmath>
#include <stdexcept>

namespace rg4::core {

namespace {

[[noreturn]] void shape_error(const char* op, Tensor a, Tensor b) {
    throw std::invalid_argument(std::string(op) + ": shape " + a.shape_str() +
                                " incompatible with " + b.shape_str());
}

[[noreturn]] void shape_error(const char* op, Tensor a, const char* why) {
    throw std::invalid_argument(std::string(op) + ": shape " + a.shape_str() + " " + why);
}

void require_rank2(const char* op, Tensor a) {
    if (a.rank() != 2) shape_error(op, a, "must be rank 2");
}

bool should_record(const std::vector<Tensor>& inputs) {
    if (!grad_enabled()) return false;
    for (const auto& t : inputs)
        if (t.requires_grad()) return true;
    return false;
}

// Records the node when the output tracks gradients. The output must be
// created with requires_grad already decided so every shared handle (caller,
// tape node, backward closure) sees the same gradient buffer.
Tensor finish(const char* op, const std::vector<Tensor>& inputs, Tensor out,
              std::function<void()> backward_fn) {
    if (out.requires_grad()) active_tape().record(op, inputs, out, std::move(backward_fn));
    return out;
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

}  // namespace

Tensor matmul(Tensor a, Tensor b) {
    require_rank2("matmul", a);
    require_rank2("matmul", b);
    if (a.cols() != b.rows()) shape_error("matmul", a, b);
    const int m = a.rows(), k = a.cols(), n = b.cols();
    Tensor out = Tensor::zeros({m, n}, should_record({a, b}));
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
            const double av = pa[i * k + p];
            if (av == 0.0) continue;
            const double* prow = pb + p * n;
            double* orow = po + i * n;
            for (int j = 0; j < n; ++j) orow[j] += av * prow[j];
        }
    return finish("matmul", {a, b}, out, [a, b, out, m, k, n]() mutable {
        const auto& go = out.grad();
        if (a.requires_grad()) {
            auto& ga = a.grad();
            const double* pb = b.data();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) {
                    const double g = go[static_cast<size_t>(i) * n + j];
                    if (g == 0.0) continue;
                    for (int p = 0; p < k; ++p) ga[static_cast<size_t>(i) * k + p] += g * pb[p * n + j];
                }
        }
        if (b.requires_grad()) {
            auto& gb = b.grad();
            const double* pa = a.data();
            for (int i = 0; i < m; ++i)
                for (int p = 0; p < k; ++p) {
                    const double av = pa[i * k + p];
                    if (av == 0.0) continue;
                    for (int j = 0; j < n; ++j)
                        gb[static_cast<size_t>(p) * n + j] += av * go[static_cast<size_t>(i) * n + j];
                }
        }
    });
}

Tensor add(Tensor a, Tensor b) {
    if (a.shape() != b.shape()) shape_error("add", a, b);
    Tensor out = Tensor::zeros(a.shape(), should_record({a, b}));
    const size_t n = a.numel();
    for (size_t i = 0; i < n; ++i) out.vec()[i] = a.vec()[i] + b.vec()[i];
    return finish("add", {a, b}, out, [a, b, out, n]() mutable {
        const auto& go = out.grad();
        if (a.requires_grad()) {
            auto& g = a.grad();
            for (size_t i = 0; i < n; ++i) g[i] += go[i];
        }
        if (b.requires_grad()) {
            auto& g = b.grad();
            for (size_t i = 0; i < n; ++i) g[i] += go[i];
        }
    });
}

Tensor add_rowwise(Tensor a, Tensor bias) {
    require_rank2("add_rowwise", a);
    if (bias.rank() != 1 || bias.shape()[0] != a.cols()) shape_error("add_rowwise", a, bias);
    const int m = a.rows(), n = a.cols();
    Tensor out = Tensor::zeros({m, n}, should_record({a, bias}));
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out.at(i, j) = a.at(i, j) + bias.vec()[static_cast<size_t>(j)];
    return finish("add_rowwise", {a, bias}, out, [a, bias, out, m, n]() mutable {
        const auto& go = out.grad();
        if (a.requires_grad()) {
            auto& g = a.grad();
            for (size_t i = 0; i < static_cast<size_t>(m) * n; ++i) g[i] += go[i];
        }
        if (bias.requires_grad()) {
            auto& g = bias.grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) g[static_cast<size_t>(j)] += go[static_cast<size_t>(i) * n + j];
        }
    });
}

Tensor mul(Tensor a, Tensor b) {
    if (a.shape() != b.shape()) shape_error("mul", a, b);
    Tensor out = Tensor::zeros(a.shape(), should_record({a, b}));
    const size_t n = a.numel();
    for (size_t i = 0; i < n; ++i) out.vec()[i] = a.vec()[i] * b.vec()[i];
    return finish("mul", {a, b}, out, [a, b, out, n]() mutable {
        const auto& go = out.grad();
        if (a.requires_grad()) {
            auto& g = a.grad();
            for (size_t i = 0; i < n; ++i) g[i] += go[i] * b.vec()[i];
        }
        if (b.requires_grad()) {
            auto& g = b.grad();
            for (size_t i = 0; i < n; ++i) g[i] += go[i] * a.vec()[i];
        }
    });
}

Tensor scale(Tensor a, double c) {
    Tensor out = Tensor::zeros(a.shape(), should_record({a}));
    const size_t n = a.numel();
    for (size_t i = 0; i < n; ++i) out.vec()[i] = a.vec()[i] * c;
    return finish("scale", {a}, out, [a, out, c, n]() mutable {
        if (!a.requires_grad()) return;
        const auto& go = out.grad();
        auto& g = a.grad();
        for (size_t i = 0; i < n; ++i) g[i] += go[i] * c;
    });
}

Tensor softmax(Tensor a) {
    require_rank2("softmax", a);
    const int m = a.rows(), n = a.cols();
    Tensor out = Tensor::zeros({m, n}, should_record({a}));
    for (int i = 0; i < m; ++i) {
        double mx = a.at(i, 0);
        for (int j = 1; j < n; ++j) mx = std::max(mx, a.at(i, j));
        double z = 0.0;
        for (int j = 0; j < n; ++j) {
            const double e = std::exp(a.at(i, j) - mx);
            out.at(i, j) = e;
            z += e;
        }
        for (int j = 0; j < n; ++j) out.at(i, j) /= z;
    }
    return finish("softmax", {a}, out, [a, out, m, n]() mutable {
        if (!a.requires_grad()) return;
        const auto& go = out.grad();
        auto& g = a.grad();
        for (int i = 0; i < m; ++i) {
            double dot = 0.0;
            for (int j = 0; j < n; ++j) dot += go[static_cast<size_t>(i) * n + j] * out.at(i, j);
            for (int j = 0; j < n; ++j)
                g[static_cast<size_t>(i) * n + j] += out.at(i, j) * (go[static_cast<size_t>(i) * n + j] - dot);
        }
    });
}

Tensor layer_norm(Tensor x, Tensor gain, Tensor bias, double eps) {
    require_rank2("layer_norm", x);
    if (gain.rank() != 1 || gain.shape()[0] != x.cols()) shape_error("layer_norm", x, gain);
    if (bias.rank() != 1 || bias.shape()[0] != x.cols()) shape_error("layer_norm", x, bias);
    const int m = x.rows(), n = x.cols();
    Tensor out = Tensor::zeros({m, n}, should_record({x, gain, bias}));
    std::vector<double> xhat(static_cast<size_t>(m) * n);
    std::vector<double> inv_sd(static_cast<size_t>(m));
    for (int i = 0; i < m; ++i) {
        double mu = 0.0;
        for (int j = 0; j < n; ++j) mu += x.at(i, j);
        mu /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) {
            const double d = x.at(i, j) - mu;
            var += d * d;
        }
        var /= n;
        const double is = 1.0 / std::sqrt(var + eps);
        inv_sd[static_cast<size_t>(i)] = is;
        for (int j = 0; j < n; ++j) {
            const double h = (x.at(i, j) - mu) * is;
            xhat[static_cast<size_t>(i) * n + j] = h;
            out.at(i, j) = h * gain.vec()[static_cast<size_t>(j)] + bias.vec()[static_cast<size_t>(j)];
        }
    }
    return finish("layer_norm", {x, gain, bias}, out,
                  [x, gain, bias, out, m, n, xhat = std::move(xhat), inv_sd = std::move(inv_sd)]() mutable {
        const auto& go = out.grad();
        if (gain.requires_grad()) {
            auto& g = gain.grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j)
                    g[static_cast<size_t>(j)] += go[static_cast<size_t>(i) * n + j] * xhat[static_cast<size_t>(i) * n + j];
        }
        if (bias.requires_grad()) {
            auto& g = bias.grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) g[static_cast<size_t>(j)] += go[static_cast<size_t>(i) * n + j];
        }
        if (x.requires_grad()) {
            auto& g = x.grad();
            for (int i = 0; i < m; ++i) {
                double mean_dh = 0.0, mean_dh_h = 0.0;
                for (int j = 0; j < n; ++j) {
                    const double dh = go[static_cast<size_t>(i) * n + j] * gain.vec()[static_cast<size_t>(j)];
                    mean_dh += dh;
                    mean_dh_h += dh * xhat[static_cast<size_t>(i) * n + j];
                }
                mean_dh /= n;
                mean_dh_h /= n;
                for (int j = 0; j < n; ++j) {
                    const double dh = go[static_cast<size_t>(i) * n + j] * gain.vec()[static_cast<size_t>(j)];
                    g[static_cast<size_t>(i) * n + j] +=
                        inv_sd[static_cast<size_t>(i)] *
                        (dh - mean_dh - xhat[static_cast<size_t>(i) * n + j] * mean_dh_h);
                }
            }
        }
    });
}

Tensor embedding(Tensor table, const std::vector<int>& ids) {
    require_rank2("embedding", table);
    const int v = table.rows(), e = table.cols();
    for (int id : ids)
        if (id < 0 || id >= v)
            throw std::invalid_argument("embedding: id " + std::to_string(id) + " outside table " +
                                        table.shape_str());
    const int L = static_cast<int>(ids.size());
    Tensor out = Tensor::zeros({L, e}, should_record({table}));
    for (int i = 0; i < L; ++i)
        for (int j = 0; j < e; ++j) out.at(i, j) = table.at(ids[static_cast<size_t>(i)], j);
    return finish("embedding", {table}, out, [table, out, ids, L, e]() mutable {
        if (!table.requires_grad()) return;
        const auto& go = out.grad();
        auto& g = table.grad();
        for (int i = 0; i < L; ++i)
            for (int j = 0; j < e; ++j)
                g[static_cast<size_t>(ids[static_cast<size_t>(i)]) * e + j] += go[static_cast<size_t>(i) * e + j];
    });
}

Tensor concat(std::vector<Tensor> parts, int axis) {
    if (parts.empty()) throw std::invalid_argument("concat: no inputs");
    if (axis != 0 && axis != 1) throw std::invalid_argument("concat: axis must be 0 or 1");
    for (const auto& p : parts) require_rank2("concat", p);
    const int other = axis == 0 ? parts[0].cols() : parts[0].rows();
    int total = 0;
    for (const auto& p : parts) {
        const int o = axis == 0 ? p.cols() : p.rows();
        if (o != other) shape_error("concat", parts[0], p);
        total += axis == 0 ? p.rows() : p.cols();
    }
    const int m = axis == 0 ? total : other;
    const int n = axis == 0 ? other : total;
    Tensor out = Tensor::zeros({m, n}, should_record(parts));
    int off = 0;
    for (const auto& p : parts) {
        if (axis == 0) {
            for (int i = 0; i < p.rows(); ++i)
                for (int j = 0; j < n; ++j) out.at(off + i, j) = p.at(i, j);
            off += p.rows();
        } else {
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < p.cols(); ++j) out.at(i, off + j) = p.at(i, j);
            off += p.cols();
        }
    }
    return finish("concat", parts, out, [parts, out, axis, m, n]() mutable {
        const auto& go = out.grad();
        int off = 0;
        for (auto& p : parts) {
            const int pr = p.rows(), pc = p.cols();
            if (p.requires_grad()) {
                auto& g = p.grad();
                if (axis == 0) {
                    for (int i = 0; i < pr; ++i)
                        for (int j = 0; j < pc; ++j)
                            g[static_cast<size_t>(i) * pc + j] += go[static_cast<size_t>(off + i) * n + j];
                } else {
                    for (int i = 0; i < pr; ++i)
                        for (int j = 0; j < pc; ++j)
                            g[static_cast<size_t>(i) * pc + j] += go[static_cast<size_t>(i) * n + off + j];
                }
            }
            off += axis == 0 ? pr : pc;
        }
    });
}

Tensor slice(Tensor a, int axis, int start, int len) {
    require_rank2("slice", a);
    if (axis != 0 && axis != 1) throw std::invalid_argument("slice: axis must be 0 or 1");
    const int extent = axis == 0 ? a.rows() : a.cols();
    if (start < 0 || len <= 0 || start + len > extent)
        throw std::invalid_argument("slice: range [" + std::to_string(start) + "," +
                                    std::to_string(start + len) + ") outside " + a.shape_str() +
                                    " axis " + std::to_string(axis));
    const int m = axis == 0 ? len : a.rows();
    const int n = axis == 0 ? a.cols() : len;
    Tensor out = Tensor::zeros({m, n}, should_record({a}));
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            out.at(i, j) = axis == 0 ? a.at(start + i, j) : a.at(i, start + j);
    return finish("slice", {a}, out, [a, out, axis, start, m, n]() mutable {
        if (!a.requires_grad()) return;
        const auto& go = out.grad();
        auto& g = a.grad();
        const int ac = a.cols();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) {
                const size_t src = static_cast<size_t>(i) * n + j;
                if (axis == 0)
                    g[static_cast<size_t>(start + i) * ac + j] += go[src];
                else
                    g[static_cast<size_t>(i) * ac + start + j] += go[src];
            }
    });
}

Tensor gelu(Tensor a) {
    Tensor out = Tensor::zeros(a.shape(), should_record({a}));
    const size_t n = a.numel();
    for (size_t i = 0; i < n; ++i) {
        const double x = a.vec()[i];
        const double u = kGeluC * (x + 0.044715 * x * x * x);
        out.vec()[i] = 0.5 * x * (1.0 + std::tanh(u));
    }
    return finish("gelu", {a}, out, [a, out, n]() mutable {
        if (!a.requires_grad()) return;
        const auto& go = out.grad();
        auto& g = a.grad();
        for (size_t i = 0; i < n; ++i) {
            const double x = a.vec()[i];
            const double u = kGeluC * (x + 0.044715 * x * x * x);
            const double t = std::tanh(u);
            const double du = kGeluC * (1.0 + 3.0 * 0.044715 * x * x);
            g[i] += go[i] * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du);
        }
    });
}

Tensor transpose(Tensor a) {
    require_rank2("transpose", a);
    const int m = a.rows(), n = a.cols();
    Tensor out = Tensor::zeros({n, m}, should_record({a}));
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out.at(j, i) = a.at(i, j);
    return finish("transpose", {a}, out, [a, out, m, n]() mutable {
        if (!a.requires_grad()) return;
        const auto& go = out.grad();
        auto& g = a.grad();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) g[static_cast<size_t>(i) * n + j] += go[static_cast<size_t>(j) * m + i];
    });
}

Tensor sum(Tensor a) {
    double s = 0.0;
    for (double v : a.vec()) s += v;
    Tensor out = Tensor::from({}, {s}, should_record({a}));
    return finish("sum", {a}, out, [a, out]() mutable {
        if (!a.requires_grad()) return;
        const double go = out.grad()[0];
        auto& g = a.grad();
        for (auto& v : g) v += go;
    });
}

Tensor mean(Tensor a) {
    if (a.numel() == 0) throw std::invalid_argument("mean: empty tensor");
    double s = 0.0;
    for (double v : a.vec()) s += v;
    const double inv = 1.0 / static_cast<double>(a.numel());
    Tensor out = Tensor::from({}, {s * inv}, should_record({a}));
    return finish("mean", {a}, out, [a, out, inv]() mutable {
        if (!a.requires_grad()) return;
        const double go = out.grad()[0] * inv;
        auto& g = a.grad();
        for (auto& v : g) v += go;
    });
}

Tensor mean_rows(Tensor a) {
    require_rank2("mean_rows", a);
    const int m = a.rows(), n = a.cols();
    Tensor out = Tensor::zeros({1, n}, should_record({a}));
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out.at(0, j) += a.at(i, j);
    for (int j = 0; j < n; ++j) out.at(0, j) /= m;
    return finish("mean_rows", {a}, out, [a, out, m, n]() mutable {
        if (!a.requires_grad()) return;
        const auto& go = out.grad();
        auto& g = a.grad();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) g[static_cast<size_t>(i) * n + j] += go[static_cast<size_t>(j)] / m;
    });
}

Tensor cross_entropy_rows(Tensor logits, const std::vector<int>& targets,
                          const std::vector<double>& weights) {
    require_rank2("cross_entropy", logits);
    const int m = logits.rows(), v = logits.cols();
    if (static_cast<int>(targets.size()) != m || targets.size() != weights.size())
        throw std::invalid_argument("cross_entropy: " + std::to_string(m) + " logit rows vs " +
                                    std::to_string(targets.size()) + " targets / " +
                                    std::to_string(weights.size()) + " weights");
    for (int t : targets)
        if (t < 0 || t >= v)
            throw std::invalid_argument("cross_entropy: target " + std::to_string(t) +
                                        " outside vocab " + std::to_string(v));
    double loss = 0.0;
    std::vector<double> probs(static_cast<size_t>(m) * v);
    for (int i = 0; i < m; ++i) {
        double mx = logits.at(i, 0);
        for (int j = 1; j < v; ++j) mx = std::max(mx, logits.at(i, j));
        double z = 0.0;
        for (int j = 0; j < v; ++j) {
            const double e = std::exp(logits.at(i, j) - mx);
            probs[static_cast<size_t>(i) * v + j] = e;
            z += e;
        }
        for (int j = 0; j < v; ++j) probs[static_cast<size_t>(i) * v + j] /= z;
        const double lse = mx + std::log(z);
        loss += weights[static_cast<size_t>(i)] * (lse - logits.at(i, targets[static_cast<size_t>(i)]));
    }
    Tensor out = Tensor::from({}, {loss / m}, should_record({logits}));
    return finish("cross_entropy", {logits}, out,
                  [logits, out, targets, weights, m, v, probs = std::move(probs)]() mutable {
        if (!logits.requires_grad()) return;
        const double go = out.grad()[0];
        auto& g = logits.grad();
        for (int i = 0; i < m; ++i) {
            const double w = weights[static_cast<size_t>(i)] * go / m;
            for (int j = 0; j < v; ++j) {
                double p = probs[static_cast<size_t>(i) * v + j];
                if (j == targets[static_cast<size_t>(i)]) p -= 1.0;
                g[static_cast<size_t>(i) * v + j] += w * p;
            }
        }
    });
}

Tensor cross_entropy_rows(Tensor logits, const std::vector<int>& targets) {
    return cross_entropy_rows(logits, targets, std::vector<double>(targets.size(), 1.0));
}

const char* op_kind_name(OpKind k) {
    switch (k) {
        case OpKind::matmul: return "matmul";
        case OpKind::add: return "add";
        case OpKind::mul: return "mul";
        case OpKind::softmax: return "softmax";
        case OpKind::layer_norm: return "layer_norm";
        case OpKind::embedding: return "embedding";
        case OpKind::concat: return "concat";
        case OpKind::slice: return "slice";
        case OpKind::gelu: return "gelu";
        case OpKind::transpose: return "transpose";
    }
    return "?";
}

Tensor forward_primitive(OpKind kind, const std::vector<Tensor>& inputs, const PrimitiveArgs& args) {
    auto need = [&](size_t n) {
        if (inputs.size() != n)
            throw std::invalid_argument(std::string(op_kind_name(kind)) + ": expected " +
                                        std::to_string(n) + " inputs, got " + std::to_string(inputs.size()));
    };
    switch (kind) {
        case OpKind::matmul: need(2); return matmul(inputs[0], inputs[1]);
        case OpKind::add: need(2); return add(inputs[0], inputs[1]);
        case OpKind::mul: need(2); return mul(inputs[0], inputs[1]);
        case OpKind::softmax: need(1); return softmax(inputs[0]);
        case OpKind::layer_norm: need(3); return layer_norm(inputs[0], inputs[1], inputs[2]);
        case OpKind::embedding: need(1); return embedding(inputs[0], args.ids);
        case OpKind::concat: return concat(inputs, args.axis);
        case OpKind::slice: need(1); return slice(inputs[0], args.axis, args.start, args.len);
        case OpKind::gelu: need(1); return gelu(inputs[0]);
        case OpKind::transpose: need(1); return transpose(inputs[0]);
    }
    throw std::invalid_argument("forward_primitive: unknown op kind");
}

}  // namespace rg4::core
