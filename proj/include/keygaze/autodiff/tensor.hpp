#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "keygaze/core/error.hpp"

namespace keygaze::ad {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
    Mat value;
    Mat grad; // allocated lazily, same shape as value
    bool requires_grad = false;
    std::vector<NodePtr> parents;
    std::function<void(Node&)> backward; // reads this->grad, accumulates into parents

    void ensure_grad() {
        if (grad.rows() != value.rows() || grad.cols() != value.cols()) grad = Mat::Zero(value.rows(), value.cols());
    }
};

inline std::string shape_str(const Mat& m) {
    return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
}

/// Handle to a node of the computation graph. Copies share the node.
/// Values are 2-D row-major; a scalar is 1x1.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Mat value, bool requires_grad = false) : node_(std::make_shared<Node>()) {
        node_->value = std::move(value);
        node_->requires_grad = requires_grad;
    }

    static Tensor parameter(Mat value) { return Tensor(std::move(value), true); }
    static Tensor constant(Mat value) { return Tensor(std::move(value), false); }
    static Tensor scalar(double v) { return Tensor(Mat::Constant(1, 1, v)); }
    static Tensor zeros(Eigen::Index r, Eigen::Index c) { return Tensor(Mat::Zero(r, c)); }

    bool defined() const { return static_cast<bool>(node_); }
    const Mat& value() const { return node_->value; }
    Mat& mutable_value() { return node_->value; }
    const Mat& grad() const {
        node_->ensure_grad();
        return node_->grad;
    }
    Mat& mutable_grad() {
        node_->ensure_grad();
        return node_->grad;
    }
    void zero_grad() {
        if (node_) node_->grad = Mat::Zero(node_->value.rows(), node_->value.cols());
    }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    Eigen::Index rows() const { return node_->value.rows(); }
    Eigen::Index cols() const { return node_->value.cols(); }
    Eigen::Index size() const { return node_->value.size(); }
    double item() const {
        if (size() != 1) throw UsageError("item() on tensor of shape " + shape_str(value()));
        return node_->value(0, 0);
    }
    const NodePtr& node() const { return node_; }

    /// Reverse sweep from this scalar. Interior gradients are recomputed on
    /// every call; leaf gradients accumulate across calls.
    void backward() const;

private:
    NodePtr node_;
};

/// Builds a result node. `fn` receives the result node and propagates its
/// gradient into the parents; skipped entirely when no parent needs grads.
inline Tensor make_result(Mat value, std::vector<Tensor> parents, std::function<void(Node&)> fn) {
    bool any = false;
    for (const auto& p : parents) any = any || p.requires_grad();
    Tensor out(std::move(value), any);
    if (any) {
        for (const auto& p : parents) out.node()->parents.push_back(p.node());
        out.node()->backward = std::move(fn);
    }
    return out;
}

inline void Tensor::backward() const {
    if (size() != 1) throw UsageError("backward() needs a scalar, got " + shape_str(value()));
    if (!requires_grad()) return;
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
    seen.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, i] = stack.back();
        if (i < n->parents.size()) {
            Node* p = n->parents[i++].get();
            if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }
    for (Node* n : order)
        if (n->backward) n->grad = Mat::Zero(n->value.rows(), n->value.cols());
    node_->ensure_grad();
    node_->grad(0, 0) += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (!n->backward) continue;
        for (auto& p : n->parents)
            if (p->requires_grad) p->ensure_grad();
        n->backward(*n);
    }
}

namespace detail {

inline void same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw UsageError(std::string(op) + ": shape mismatch " + shape_str(a.value()) + " vs " + shape_str(b.value()));
}

} // namespace detail

// ---------------------------------------------------------------- structure

/// Expands a 1x1, 1xC or Rx1 tensor to RxC; the backward pass sums back.
inline Tensor broadcast_to(const Tensor& a, Eigen::Index r, Eigen::Index c) {
    if (a.rows() == r && a.cols() == c) return a;
    const bool ok_r = a.rows() == r || a.rows() == 1;
    const bool ok_c = a.cols() == c || a.cols() == 1;
    if (!ok_r || !ok_c)
        throw UsageError("broadcast: cannot expand " + shape_str(a.value()) + " to (" + std::to_string(r) + "x" +
                         std::to_string(c) + ")");
    Mat v = a.value().replicate(a.rows() == r ? 1 : r, a.cols() == c ? 1 : c);
    const bool br = a.rows() != r, bc = a.cols() != c;
    return make_result(std::move(v), {a}, [br, bc](Node& n) {
        Mat g = n.grad;
        if (br) g = g.colwise().sum().eval();
        if (bc) g = g.rowwise().sum().eval();
        n.parents[0]->grad += g;
    });
}

namespace detail {

inline std::pair<Tensor, Tensor> broadcast_pair(const Tensor& a, const Tensor& b, const char* op) {
    const auto r = std::max(a.rows(), b.rows());
    const auto c = std::max(a.cols(), b.cols());
    for (const Tensor* t : {&a, &b})
        if ((t->rows() != r && t->rows() != 1) || (t->cols() != c && t->cols() != 1))
            throw UsageError(std::string(op) + ": shape mismatch " + shape_str(a.value()) + " vs " +
                             shape_str(b.value()));
    return {broadcast_to(a, r, c), broadcast_to(b, r, c)};
}

} // namespace detail

inline Tensor transpose(const Tensor& a) {
    return make_result(a.value().transpose(), {a}, [](Node& n) { n.parents[0]->grad += n.grad.transpose(); });
}

inline Tensor reshape(const Tensor& a, Eigen::Index r, Eigen::Index c) {
    if (r * c != a.size()) throw UsageError("reshape: " + shape_str(a.value()) + " has " + std::to_string(a.size()) + " values");
    Mat v = Eigen::Map<const Mat>(a.value().data(), r, c);
    const auto ar = a.rows(), ac = a.cols();
    return make_result(std::move(v), {a}, [ar, ac](Node& n) {
        n.parents[0]->grad += Eigen::Map<const Mat>(n.grad.data(), ar, ac);
    });
}

inline Tensor slice_rows(const Tensor& a, Eigen::Index start, Eigen::Index count) {
    if (start < 0 || count < 0 || start + count > a.rows())
        throw UsageError("slice_rows: [" + std::to_string(start) + ", +" + std::to_string(count) + ") outside " +
                         shape_str(a.value()));
    return make_result(a.value().middleRows(start, count), {a}, [start, count](Node& n) {
        n.parents[0]->grad.middleRows(start, count) += n.grad;
    });
}

inline Tensor slice_cols(const Tensor& a, Eigen::Index start, Eigen::Index count) {
    if (start < 0 || count < 0 || start + count > a.cols())
        throw UsageError("slice_cols: [" + std::to_string(start) + ", +" + std::to_string(count) + ") outside " +
                         shape_str(a.value()));
    return make_result(a.value().middleCols(start, count), {a}, [start, count](Node& n) {
        n.parents[0]->grad.middleCols(start, count) += n.grad;
    });
}

inline Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw UsageError("concat_rows: nothing to concatenate");
    Eigen::Index r = 0;
    for (const auto& p : parts) {
        if (p.cols() != parts[0].cols())
            throw UsageError("concat_rows: shape mismatch " + shape_str(parts[0].value()) + " vs " + shape_str(p.value()));
        r += p.rows();
    }
    Mat v(r, parts[0].cols());
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        v.middleRows(at, p.rows()) = p.value();
        at += p.rows();
    }
    return make_result(std::move(v), parts, [](Node& n) {
        Eigen::Index at = 0;
        for (auto& p : n.parents) {
            if (p->requires_grad) p->grad += n.grad.middleRows(at, p->value.rows());
            at += p->value.rows();
        }
    });
}

inline Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw UsageError("concat_cols: nothing to concatenate");
    Eigen::Index c = 0;
    for (const auto& p : parts) {
        if (p.rows() != parts[0].rows())
            throw UsageError("concat_cols: shape mismatch " + shape_str(parts[0].value()) + " vs " + shape_str(p.value()));
        c += p.cols();
    }
    Mat v(parts[0].rows(), c);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        v.middleCols(at, p.cols()) = p.value();
        at += p.cols();
    }
    return make_result(std::move(v), parts, [](Node& n) {
        Eigen::Index at = 0;
        for (auto& p : n.parents) {
            if (p->requires_grad) p->grad += n.grad.middleCols(at, p->value.cols());
            at += p->value.cols();
        }
    });
}

// ---------------------------------------------------------------- linear algebra

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows())
        throw UsageError("matmul: shape mismatch " + shape_str(a.value()) + " vs " + shape_str(b.value()));
    return make_result(a.value() * b.value(), {a, b}, [](Node& n) {
        auto& A = *n.parents[0];
        auto& B = *n.parents[1];
        if (A.requires_grad) A.grad.noalias() += n.grad * B.value.transpose();
        if (B.requires_grad) B.grad.noalias() += A.value.transpose() * n.grad;
    });
}

// ---------------------------------------------------------------- elementwise binary

inline Tensor add(const Tensor& a0, const Tensor& b0) {
    auto [a, b] = detail::broadcast_pair(a0, b0, "add");
    return make_result(a.value() + b.value(), {a, b}, [](Node& n) {
        for (auto& p : n.parents)
            if (p->requires_grad) p->grad += n.grad;
    });
}

inline Tensor sub(const Tensor& a0, const Tensor& b0) {
    auto [a, b] = detail::broadcast_pair(a0, b0, "sub");
    return make_result(a.value() - b.value(), {a, b}, [](Node& n) {
        if (n.parents[0]->requires_grad) n.parents[0]->grad += n.grad;
        if (n.parents[1]->requires_grad) n.parents[1]->grad -= n.grad;
    });
}

inline Tensor mul(const Tensor& a0, const Tensor& b0) {
    auto [a, b] = detail::broadcast_pair(a0, b0, "mul");
    return make_result(a.value().cwiseProduct(b.value()), {a, b}, [](Node& n) {
        auto& A = *n.parents[0];
        auto& B = *n.parents[1];
        if (A.requires_grad) A.grad += n.grad.cwiseProduct(B.value);
        if (B.requires_grad) B.grad += n.grad.cwiseProduct(A.value);
    });
}

inline Tensor div(const Tensor& a0, const Tensor& b0) {
    auto [a, b] = detail::broadcast_pair(a0, b0, "div");
    return make_result(a.value().cwiseQuotient(b.value()), {a, b}, [](Node& n) {
        auto& A = *n.parents[0];
        auto& B = *n.parents[1];
        if (A.requires_grad) A.grad += n.grad.cwiseQuotient(B.value);
        if (B.requires_grad)
            B.grad.array() -= n.grad.array() * A.value.array() / B.value.array().square();
    });
}

/// Elementwise min/max; ties send the gradient to the first argument.
inline Tensor minimum(const Tensor& a0, const Tensor& b0) {
    auto [a, b] = detail::broadcast_pair(a0, b0, "minimum");
    using Arr = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Arr pick_a = a.value().array() <= b.value().array();
    Mat v = pick_a.select(a.value(), b.value());
    return make_result(std::move(v), {a, b}, [pick_a](Node& n) {
        if (n.parents[0]->requires_grad) n.parents[0]->grad.array() += pick_a.select(n.grad.array(), 0.0);
        if (n.parents[1]->requires_grad) n.parents[1]->grad.array() += pick_a.select(0.0, n.grad.array());
    });
}

inline Tensor maximum(const Tensor& a0, const Tensor& b0) {
    auto [a, b] = detail::broadcast_pair(a0, b0, "maximum");
    using Arr = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Arr pick_a = a.value().array() >= b.value().array();
    Mat v = pick_a.select(a.value(), b.value());
    return make_result(std::move(v), {a, b}, [pick_a](Node& n) {
        if (n.parents[0]->requires_grad) n.parents[0]->grad.array() += pick_a.select(n.grad.array(), 0.0);
        if (n.parents[1]->requires_grad) n.parents[1]->grad.array() += pick_a.select(0.0, n.grad.array());
    });
}

// ---------------------------------------------------------------- scalar variants

inline Tensor scale(const Tensor& a, double s) {
    return make_result(a.value() * s, {a}, [s](Node& n) { n.parents[0]->grad += n.grad * s; });
}

inline Tensor add_scalar(const Tensor& a, double s) {
    return make_result((a.value().array() + s).matrix(), {a}, [](Node& n) { n.parents[0]->grad += n.grad; });
}

inline Tensor neg(const Tensor& a) { return scale(a, -1.0); }

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }
inline Tensor operator+(const Tensor& a, double s) { return add_scalar(a, s); }
inline Tensor operator-(const Tensor& a, double s) { return add_scalar(a, -s); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

// ---------------------------------------------------------------- elementwise unary

namespace detail {

/// Unary op from value function f and derivative df(x, y) where y = f(x).
template <class F, class DF>
Tensor unary(const Tensor& a, F f, DF df) {
    Mat v = a.value().unaryExpr(f);
    return make_result(v, {a}, [df, v](Node& n) {
        auto& A = *n.parents[0];
        Mat d(v.rows(), v.cols());
        for (Eigen::Index i = 0; i < v.size(); ++i) d.data()[i] = df(A.value.data()[i], v.data()[i]);
        A.grad += n.grad.cwiseProduct(d);
    });
}

inline double stable_sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double stable_softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

} // namespace detail

inline Tensor relu(const Tensor& a) {
    return detail::unary(a, [](double x) { return x > 0 ? x : 0.0; }, [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

/// tanh approximation of GELU.
inline Tensor gelu(const Tensor& a) {
    constexpr double k = 0.7978845608028654; // sqrt(2/pi)
    constexpr double c = 0.044715;
    return detail::unary(
        a, [](double x) { return 0.5 * x * (1.0 + std::tanh(k * (x + c * x * x * x))); },
        [](double x, double) {
            const double u = k * (x + c * x * x * x);
            const double t = std::tanh(u);
            return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * k * (1.0 + 3.0 * c * x * x);
        });
}

inline Tensor sigmoid(const Tensor& a) {
    return detail::unary(a, detail::stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

inline Tensor tanh(const Tensor& a) {
    return detail::unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

inline Tensor exp(const Tensor& a) {
    return detail::unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

inline Tensor log(const Tensor& a) {
    return detail::unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

inline Tensor square(const Tensor& a) {
    return detail::unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

inline Tensor sqrt(const Tensor& a) {
    return detail::unary(a, [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}

inline Tensor abs(const Tensor& a) {
    return detail::unary(a, [](double x) { return std::abs(x); },
                         [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

inline Tensor softplus(const Tensor& a) {
    return detail::unary(a, detail::stable_softplus, [](double x, double) { return detail::stable_sigmoid(x); });
}

// ---------------------------------------------------------------- reductions

inline Tensor sum(const Tensor& a) {
    return make_result(Mat::Constant(1, 1, a.value().sum()), {a},
                       [](Node& n) { n.parents[0]->grad.array() += n.grad(0, 0); });
}

inline Tensor mean(const Tensor& a) {
    if (a.size() == 0) throw UsageError("mean of an empty tensor");
    const double inv = 1.0 / static_cast<double>(a.size());
    return make_result(Mat::Constant(1, 1, a.value().sum() * inv), {a},
                       [inv](Node& n) { n.parents[0]->grad.array() += n.grad(0, 0) * inv; });
}

/// Column sums, shape 1xC.
inline Tensor sum_rows(const Tensor& a) {
    return make_result(a.value().colwise().sum(), {a},
                       [](Node& n) { n.parents[0]->grad.rowwise() += n.grad.row(0); });
}

/// Row sums, shape Rx1.
inline Tensor sum_cols(const Tensor& a) {
    return make_result(a.value().rowwise().sum(), {a},
                       [](Node& n) { n.parents[0]->grad.colwise() += n.grad.col(0); });
}

// ---------------------------------------------------------------- composites with fused backward

/// Softmax along `axis` (1: within each row, 0: within each column). Entries
/// where `mask` is 0 get probability 0; a fully masked line is all zeros.
inline Tensor softmax(const Tensor& a, int axis = 1, const Mat* mask = nullptr) {
    if (axis != 0 && axis != 1) throw UsageError("softmax: axis must be 0 or 1");
    if (mask && (mask->rows() != a.rows() || mask->cols() != a.cols()))
        throw UsageError("softmax: mask shape " + shape_str(*mask) + " vs " + shape_str(a.value()));
    const Mat x = axis == 1 ? a.value() : Mat(a.value().transpose());
    Mat m;
    if (mask) m = axis == 1 ? *mask : Mat(mask->transpose());
    Mat y = Mat::Zero(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < x.cols(); ++j)
            if (!mask || m(i, j) != 0.0) mx = std::max(mx, x(i, j));
        if (!std::isfinite(mx)) continue;
        double s = 0.0;
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            if (mask && m(i, j) == 0.0) continue;
            y(i, j) = std::exp(x(i, j) - mx);
            s += y(i, j);
        }
        y.row(i) /= s;
    }
    Mat out = axis == 1 ? y : Mat(y.transpose());
    return make_result(out, {a}, [axis, y](Node& n) {
        const Mat g = axis == 1 ? n.grad : Mat(n.grad.transpose());
        const Eigen::VectorXd dot = (g.cwiseProduct(y)).rowwise().sum();
        Mat dx = y.cwiseProduct(g.colwise() - dot);
        if (axis == 1) n.parents[0]->grad += dx;
        else n.parents[0]->grad += dx.transpose();
    });
}

/// Row-wise normalization to zero mean / unit variance followed by the
/// affine map gamma (1xC), beta (1xC).
inline Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5) {
    const auto C = x.cols();
    if (gamma.rows() != 1 || gamma.cols() != C || beta.rows() != 1 || beta.cols() != C)
        throw UsageError("layer_norm: shape mismatch " + shape_str(x.value()) + " vs gamma " +
                         shape_str(gamma.value()) + ", beta " + shape_str(beta.value()));
    const Eigen::VectorXd mu = x.value().rowwise().mean();
    Mat xc = x.value().colwise() - mu;
    const Eigen::VectorXd inv = ((xc.array().square().rowwise().sum() / static_cast<double>(C)) + eps).rsqrt();
    Mat xhat = xc.array().colwise() * inv.array();
    Mat y = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() + beta.value().row(0).array();
    return make_result(std::move(y), {x, gamma, beta}, [xhat, inv](Node& n) {
        auto& X = *n.parents[0];
        auto& G = *n.parents[1];
        auto& B = *n.parents[2];
        if (G.requires_grad) G.grad.row(0) += (n.grad.cwiseProduct(xhat)).colwise().sum();
        if (B.requires_grad) B.grad.row(0) += n.grad.colwise().sum();
        if (X.requires_grad) {
            Mat gh = n.grad.array().rowwise() * G.value.row(0).array();
            const Eigen::VectorXd m1 = gh.rowwise().mean();
            const Eigen::VectorXd m2 = (gh.cwiseProduct(xhat)).rowwise().mean();
            Mat dx = (gh.colwise() - m1) - (xhat.array().colwise() * m2.array()).matrix();
            X.grad += (dx.array().colwise() * inv.array()).matrix();
        }
    });
}

/// Elementwise binary cross-entropy with logits z against constant targets y.
inline Tensor bce_with_logits(const Tensor& z, const Mat& y) {
    if (y.rows() != z.rows() || y.cols() != z.cols())
        throw UsageError("bce_with_logits: shape mismatch " + shape_str(z.value()) + " vs " + shape_str(y));
    Mat v(z.rows(), z.cols());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double x = z.value().data()[i];
        v.data()[i] = detail::stable_softplus(x) - x * y.data()[i];
    }
    return make_result(std::move(v), {z}, [y](Node& n) {
        auto& Z = *n.parents[0];
        for (Eigen::Index i = 0; i < Z.value.size(); ++i)
            Z.grad.data()[i] += n.grad.data()[i] * (detail::stable_sigmoid(Z.value.data()[i]) - y.data()[i]);
    });
}

/// Lower-triangular cumulative sum down the rows (row i = sum of rows 0..i).
inline Tensor cumsum_rows(const Tensor& a) {
    Mat v = a.value();
    for (Eigen::Index i = 1; i < v.rows(); ++i) v.row(i) += v.row(i - 1);
    return make_result(std::move(v), {a}, [](Node& n) {
        Mat g = n.grad;
        for (Eigen::Index i = g.rows() - 2; i >= 0; --i) g.row(i) += g.row(i + 1);
        n.parents[0]->grad += g;
    });
}

} // namespace keygaze::ad
