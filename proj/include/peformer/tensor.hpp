#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace peformer {

using Shape = std::vector<std::int64_t>;

inline std::int64_t shape_numel(const Shape& s) {
    std::int64_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

/// Dense real tensor participating in a reverse-mode differentiation graph.
/// All arithmetic is 64-bit; gradients are allocated lazily on first use.
struct Tensor {
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;  // empty means "all zero"

    Tensor() = default;
    Tensor(Shape s, std::vector<double> d, bool rg = false)
        : shape(std::move(s)), data(std::move(d)), requires_grad(rg) {
        if (shape_numel(shape) != static_cast<std::int64_t>(data.size()))
            throw std::invalid_argument("tensor: shape " + shape_str(shape) +
                                        " does not match data length " + std::to_string(data.size()));
    }

    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
    std::int64_t rows() const { return shape.size() == 2 ? shape[0] : shape.at(0); }
    std::int64_t cols() const { return shape.size() == 2 ? shape[1] : 1; }

    double& at(std::int64_t r, std::int64_t c) { return data[static_cast<std::size_t>(r * cols() + c)]; }
    double at(std::int64_t r, std::int64_t c) const { return data[static_cast<std::size_t>(r * cols() + c)]; }

    void ensure_grad() {
        if (grad.empty()) grad.assign(data.size(), 0.0);
    }
    void zero_grad() { grad.assign(data.size(), 0.0); }
};

using TensorPtr = std::shared_ptr<Tensor>;

inline TensorPtr make_tensor(Shape s, std::vector<double> d, bool requires_grad = false) {
    return std::make_shared<Tensor>(std::move(s), std::move(d), requires_grad);
}

inline TensorPtr zeros(Shape s, bool requires_grad = false) {
    auto n = shape_numel(s);
    return make_tensor(std::move(s), std::vector<double>(static_cast<std::size_t>(n), 0.0), requires_grad);
}

inline TensorPtr full(Shape s, double v, bool requires_grad = false) {
    auto n = shape_numel(s);
    return make_tensor(std::move(s), std::vector<double>(static_cast<std::size_t>(n), v), requires_grad);
}

inline TensorPtr scalar(double v, bool requires_grad = false) {
    return make_tensor({1, 1}, {v}, requires_grad);
}

inline TensorPtr identity(std::int64_t n) {
    auto t = zeros({n, n});
    for (std::int64_t i = 0; i < n; ++i) t->at(i, i) = 1.0;
    return t;
}

enum class Op {
    Matmul,
    Add,
    Sub,
    ElementwiseMul,
    Tanh,
    Sum,
    Scale,
    Reshape,
    Concat,
    Slice,
    Sqrt,
    Reciprocal,
    Log,
    Square,
};

inline const char* op_name(Op op) {
    switch (op) {
        case Op::Matmul: return "matmul";
        case Op::Add: return "add";
        case Op::Sub: return "sub";
        case Op::ElementwiseMul: return "elementwise_mul";
        case Op::Tanh: return "tanh";
        case Op::Sum: return "sum";
        case Op::Scale: return "scale";
        case Op::Reshape: return "reshape";
        case Op::Concat: return "concat";
        case Op::Slice: return "slice";
        case Op::Sqrt: return "sqrt";
        case Op::Reciprocal: return "reciprocal";
        case Op::Log: return "log";
        case Op::Square: return "square";
    }
    return "?";
}

/// Append-only tape of operation records. Nodes are recorded in construction
/// order; backward() replays them strictly in reverse. A Graph owns nothing
/// but the records: leaf tensors (parameters, inputs) outlive it.
class Graph {
public:
    struct Node {
        Op op;
        std::vector<TensorPtr> inputs;
        TensorPtr out;
        std::function<void()> backprop;
    };

    std::size_t size() const { return nodes_.size(); }

    // ---- primitives ------------------------------------------------------

    TensorPtr matmul(const TensorPtr& a, const TensorPtr& b) {
        require_2d(a, "matmul lhs");
        require_2d(b, "matmul rhs");
        if (a->shape[1] != b->shape[0])
            throw std::invalid_argument(std::string("matmul: inner dimensions disagree, lhs ") +
                                        shape_str(a->shape) + " rhs " + shape_str(b->shape));
        const std::int64_t m = a->shape[0], k = a->shape[1], n = b->shape[1];
        auto out = zeros({m, n}, a->requires_grad || b->requires_grad);
        for (std::int64_t i = 0; i < m; ++i)
            for (std::int64_t l = 0; l < k; ++l) {
                const double av = a->data[static_cast<std::size_t>(i * k + l)];
                if (av == 0.0) continue;
                for (std::int64_t j = 0; j < n; ++j)
                    out->data[static_cast<std::size_t>(i * n + j)] +=
                        av * b->data[static_cast<std::size_t>(l * n + j)];
            }
        record(Op::Matmul, {a, b}, out, [a, b, out, m, k, n] {
            if (a->requires_grad) {
                a->ensure_grad();
                // dA = dC * B^T
                for (std::int64_t i = 0; i < m; ++i)
                    for (std::int64_t l = 0; l < k; ++l) {
                        double acc = 0.0;
                        for (std::int64_t j = 0; j < n; ++j)
                            acc += out->grad[static_cast<std::size_t>(i * n + j)] *
                                   b->data[static_cast<std::size_t>(l * n + j)];
                        a->grad[static_cast<std::size_t>(i * k + l)] += acc;
                    }
            }
            if (b->requires_grad) {
                b->ensure_grad();
                // dB = A^T * dC
                for (std::int64_t l = 0; l < k; ++l)
                    for (std::int64_t i = 0; i < m; ++i) {
                        const double av = a->data[static_cast<std::size_t>(i * k + l)];
                        if (av == 0.0) continue;
                        for (std::int64_t j = 0; j < n; ++j)
                            b->grad[static_cast<std::size_t>(l * n + j)] +=
                                av * out->grad[static_cast<std::size_t>(i * n + j)];
                    }
            }
        });
        return out;
    }

    TensorPtr add(const TensorPtr& a, const TensorPtr& b) { return binary_elementwise(Op::Add, a, b); }
    TensorPtr sub(const TensorPtr& a, const TensorPtr& b) { return binary_elementwise(Op::Sub, a, b); }
    TensorPtr elementwise_mul(const TensorPtr& a, const TensorPtr& b) {
        return binary_elementwise(Op::ElementwiseMul, a, b);
    }

    TensorPtr tanh(const TensorPtr& x) {
        auto out = clone_shape(x);
        for (std::size_t i = 0; i < x->data.size(); ++i) out->data[i] = std::tanh(x->data[i]);
        record(Op::Tanh, {x}, out, [x, out] {
            if (!x->requires_grad) return;
            x->ensure_grad();
            for (std::size_t i = 0; i < x->data.size(); ++i) {
                const double y = out->data[i];
                x->grad[i] += out->grad[i] * (1.0 - y * y);
            }
        });
        return out;
    }

    TensorPtr sum(const TensorPtr& x) {
        auto out = scalar(0.0, x->requires_grad);
        double acc = 0.0;
        for (double v : x->data) acc += v;
        out->data[0] = acc;
        record(Op::Sum, {x}, out, [x, out] {
            if (!x->requires_grad) return;
            x->ensure_grad();
            const double g = out->grad[0];
            for (std::size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += g;
        });
        return out;
    }

    TensorPtr scale(const TensorPtr& x, double c) {
        auto out = clone_shape(x);
        for (std::size_t i = 0; i < x->data.size(); ++i) out->data[i] = c * x->data[i];
        record(Op::Scale, {x}, out, [x, out, c] {
            if (!x->requires_grad) return;
            x->ensure_grad();
            for (std::size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += c * out->grad[i];
        });
        return out;
    }

    TensorPtr reshape(const TensorPtr& x, Shape s) {
        if (shape_numel(s) != x->numel())
            throw std::invalid_argument("reshape: cannot view " + shape_str(x->shape) + " as " + shape_str(s));
        auto out = make_tensor(std::move(s), x->data, x->requires_grad);  // copy, not view
        record(Op::Reshape, {x}, out, [x, out] {
            if (!x->requires_grad) return;
            x->ensure_grad();
            for (std::size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += out->grad[i];
        });
        return out;
    }

    TensorPtr concat(const std::vector<TensorPtr>& parts, int axis) {
        if (parts.empty()) throw std::invalid_argument("concat: no inputs");
        if (axis != 0 && axis != 1) throw std::invalid_argument("concat: axis must be 0 or 1");
        for (const auto& p : parts) require_2d(p, "concat input");
        const std::int64_t fixed = axis == 0 ? parts[0]->shape[1] : parts[0]->shape[0];
        std::int64_t total = 0;
        bool rg = false;
        for (const auto& p : parts) {
            const std::int64_t f = axis == 0 ? p->shape[1] : p->shape[0];
            if (f != fixed)
                throw std::invalid_argument("concat: shape " + shape_str(p->shape) +
                                            " incompatible with " + shape_str(parts[0]->shape));
            total += axis == 0 ? p->shape[0] : p->shape[1];
            rg = rg || p->requires_grad;
        }
        const std::int64_t R = axis == 0 ? total : fixed;
        const std::int64_t C = axis == 0 ? fixed : total;
        auto out = zeros({R, C}, rg);
        std::int64_t off = 0;
        for (const auto& p : parts) {
            for (std::int64_t r = 0; r < p->shape[0]; ++r)
                for (std::int64_t c = 0; c < p->shape[1]; ++c) {
                    if (axis == 0)
                        out->at(off + r, c) = p->at(r, c);
                    else
                        out->at(r, off + c) = p->at(r, c);
                }
            off += axis == 0 ? p->shape[0] : p->shape[1];
        }
        record(Op::Concat, parts, out, [parts, out, axis] {
            std::int64_t o = 0;
            for (const auto& p : parts) {
                if (p->requires_grad) {
                    p->ensure_grad();
                    for (std::int64_t r = 0; r < p->shape[0]; ++r)
                        for (std::int64_t c = 0; c < p->shape[1]; ++c) {
                            const double g = axis == 0 ? out->grad[static_cast<std::size_t>((o + r) * out->shape[1] + c)]
                                                       : out->grad[static_cast<std::size_t>(r * out->shape[1] + o + c)];
                            p->grad[static_cast<std::size_t>(r * p->shape[1] + c)] += g;
                        }
                }
                o += axis == 0 ? p->shape[0] : p->shape[1];
            }
        });
        return out;
    }

    TensorPtr slice(const TensorPtr& x, std::int64_t r0, std::int64_t c0, std::int64_t nr, std::int64_t nc) {
        require_2d(x, "slice input");
        if (r0 < 0 || c0 < 0 || nr < 1 || nc < 1 || r0 + nr > x->shape[0] || c0 + nc > x->shape[1])
            throw std::invalid_argument("slice: window (" + std::to_string(r0) + "," + std::to_string(c0) +
                                        ")+" + shape_str({nr, nc}) + " outside " + shape_str(x->shape));
        auto out = zeros({nr, nc}, x->requires_grad);
        for (std::int64_t r = 0; r < nr; ++r)
            for (std::int64_t c = 0; c < nc; ++c) out->at(r, c) = x->at(r0 + r, c0 + c);
        record(Op::Slice, {x}, out, [x, out, r0, c0, nr, nc] {
            if (!x->requires_grad) return;
            x->ensure_grad();
            for (std::int64_t r = 0; r < nr; ++r)
                for (std::int64_t c = 0; c < nc; ++c)
                    x->grad[static_cast<std::size_t>((r0 + r) * x->shape[1] + c0 + c)] +=
                        out->grad[static_cast<std::size_t>(r * nc + c)];
        });
        return out;
    }

    TensorPtr sqrt(const TensorPtr& x) {
        for (double v : x->data)
            if (v < 0.0) throw std::invalid_argument("sqrt: negative input " + std::to_string(v));
        auto out = clone_shape(x);
        for (std::size_t i = 0; i < x->data.size(); ++i) out->data[i] = std::sqrt(x->data[i]);
        record(Op::Sqrt, {x}, out, [x, out] {
            if (!x->requires_grad) return;
            x->ensure_grad();
            for (std::size_t i = 0; i < x->data.size(); ++i)
                x->grad[i] += out->grad[i] * 0.5 / out->data[i];
        });
        return out;
    }

    TensorPtr reciprocal(const TensorPtr& x) {
        auto out = clone_shape(x);
        for (std::size_t i = 0; i < x->data.size(); ++i) out->data[i] = 1.0 / x->data[i];
        record(Op::Reciprocal, {x}, out, [x, out] {
            if (!x->requires_grad) return;
            x->ensure_grad();
            for (std::size_t i = 0; i < x->data.size(); ++i) {
                const double y = out->data[i];
                x->grad[i] -= out->grad[i] * y * y;
            }
        });
        return out;
    }

    TensorPtr log(const TensorPtr& x) {
        for (double v : x->data)
            if (v < 0.0) throw std::invalid_argument("log: negative input " + std::to_string(v));
        auto out = clone_shape(x);
        for (std::size_t i = 0; i < x->data.size(); ++i) out->data[i] = std::log(x->data[i]);
        record(Op::Log, {x}, out, [x, out] {
            if (!x->requires_grad) return;
            x->ensure_grad();
            for (std::size_t i = 0; i < x->data.size(); ++i) x->grad[i] += out->grad[i] / x->data[i];
        });
        return out;
    }

    TensorPtr square(const TensorPtr& x) {
        auto out = clone_shape(x);
        for (std::size_t i = 0; i < x->data.size(); ++i) out->data[i] = x->data[i] * x->data[i];
        record(Op::Square, {x}, out, [x, out] {
            if (!x->requires_grad) return;
            x->ensure_grad();
            for (std::size_t i = 0; i < x->data.size(); ++i)
                x->grad[i] += out->grad[i] * 2.0 * x->data[i];
        });
        return out;
    }

    // ---- composites (no new op kinds, built from the primitives above) ----

    /// Transpose built from slice/reshape/concat; cost is linear in the
    /// shorter matrix dimension, which is always the token count here.
    TensorPtr transpose(const TensorPtr& x) {
        require_2d(x, "transpose input");
        const std::int64_t R = x->shape[0], C = x->shape[1];
        if (R <= C) {
            std::vector<TensorPtr> cols;
            cols.reserve(static_cast<std::size_t>(R));
            for (std::int64_t r = 0; r < R; ++r)
                cols.push_back(reshape(slice(x, r, 0, 1, C), {C, 1}));
            return cols.size() == 1 ? cols[0] : concat(cols, 1);
        }
        std::vector<TensorPtr> rows;
        rows.reserve(static_cast<std::size_t>(C));
        for (std::int64_t c = 0; c < C; ++c)
            rows.push_back(reshape(slice(x, 0, c, R, 1), {1, R}));
        return rows.size() == 1 ? rows[0] : concat(rows, 0);
    }

    /// Multiply every entry of x by a scalar tensor (shape [1,1]).
    TensorPtr scale_by(const TensorPtr& x, const TensorPtr& s) {
        require_2d(x, "scale_by input");
        if (s->numel() != 1) throw std::invalid_argument("scale_by: scale must be a scalar tensor");
        auto col = matmul(full({x->shape[0], 1}, 1.0), s);          // [R,1]
        auto sheet = matmul(col, full({1, x->shape[1]}, 1.0));      // [R,C]
        return elementwise_mul(sheet, x);
    }

    /// softplus(x) = log(1 + e^x), expressed through tanh/log/reciprocal.
    TensorPtr softplus(const TensorPtr& x) {
        auto t = tanh(scale(x, 0.5));
        auto one = full(x->shape, 1.0);
        return log(scale(reciprocal(sub(one, t)), 2.0));
    }

    // ---- backward --------------------------------------------------------

    /// Populate gradients of every requires_grad tensor reachable from loss.
    void backward(const TensorPtr& loss) {
        if (loss->numel() != 1)
            throw std::invalid_argument("backward: loss must be scalar, got " + shape_str(loss->shape));
        loss->ensure_grad();
        loss->grad[0] = 1.0;
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            if (!it->out->requires_grad) continue;
            if (it->out->grad.empty()) continue;  // no gradient flowed here
            it->backprop();
        }
    }

    const std::vector<Node>& nodes() const { return nodes_; }

private:
    std::vector<Node> nodes_;

    static void require_2d(const TensorPtr& t, const char* what) {
        if (t->shape.size() != 2)
            throw std::invalid_argument(std::string(what) + ": expected a matrix, got " + shape_str(t->shape));
    }

    static TensorPtr clone_shape(const TensorPtr& x) {
        return zeros(x->shape, x->requires_grad);
    }

    TensorPtr binary_elementwise(Op op, const TensorPtr& a, const TensorPtr& b) {
        if (a->shape != b->shape)
            throw std::invalid_argument(std::string(op_name(op)) + ": shape mismatch " +
                                        shape_str(a->shape) + " vs " + shape_str(b->shape));
        auto out = zeros(a->shape, a->requires_grad || b->requires_grad);
        for (std::size_t i = 0; i < a->data.size(); ++i) {
            switch (op) {
                case Op::Add: out->data[i] = a->data[i] + b->data[i]; break;
                case Op::Sub: out->data[i] = a->data[i] - b->data[i]; break;
                default: out->data[i] = a->data[i] * b->data[i]; break;
            }
        }
        record(op, {a, b}, out, [op, a, b, out] {
            if (a->requires_grad) {
                a->ensure_grad();
                for (std::size_t i = 0; i < a->grad.size(); ++i) {
                    const double g = out->grad[i];
                    a->grad[i] += op == Op::ElementwiseMul ? g * b->data[i] : g;
                }
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (std::size_t i = 0; i < b->grad.size(); ++i) {
                    const double g = out->grad[i];
                    if (op == Op::Add)
                        b->grad[i] += g;
                    else if (op == Op::Sub)
                        b->grad[i] -= g;
                    else
                        b->grad[i] += g * a->data[i];
                }
            }
        });
        return out;
    }

    void record(Op op, std::vector<TensorPtr> inputs, TensorPtr out, std::function<void()> backprop) {
        nodes_.push_back(Node{op, std::move(inputs), std::move(out), std::move(backprop)});
    }
};

/// Max relative deviation between the autodiff gradient of f at x and a
/// central finite difference, over all coordinates of x.
inline double finite_difference_check(const std::function<TensorPtr(Graph&, const TensorPtr&)>& f,
                                      const TensorPtr& x, double step) {
    if (step <= 0.0) throw std::invalid_argument("finite_difference_check: step must be positive");
    auto probe = make_tensor(x->shape, x->data, true);
    Graph g;
    auto loss = f(g, probe);
    g.backward(loss);
    probe->ensure_grad();

    const auto eval = [&](const std::vector<double>& values) {
        auto t = make_tensor(x->shape, values, false);
        Graph h;
        return f(h, t)->data[0];
    };

    double worst = 0.0;
    std::vector<double> v = x->data;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double keep = v[i];
        v[i] = keep + step;
        const double up = eval(v);
        v[i] = keep - step;
        const double down = eval(v);
        v[i] = keep;
        const double fd = (up - down) / (2.0 * step);
        const double err = std::abs(probe->grad[i] - fd) / (std::abs(fd) + 1e-12);
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace peformer
