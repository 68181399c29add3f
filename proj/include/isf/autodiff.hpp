#pragma once

// Define-by-run reverse-mode differentiation over dense Eigen matrices.
//
// A Tape records every operation in creation order, which is already a
// topological order, so the reverse pass is a single backward sweep.
// Values are matrices; a batch of vectors is stored one vector per column.

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace isf {

struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

template <typename Scalar>
class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
template <typename Scalar>
class Var {
public:
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    Var() = default;
    Var(Tape<Scalar>* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape<Scalar>& tape() const { return *tape_; }
    std::size_t id() const { return id_; }

    const Matrix& value() const { return tape_->value(*this); }
    const Matrix& grad() const { return tape_->grad(*this); }
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
    bool requires_grad() const { return tape_->requires_grad(*this); }

private:
    Tape<Scalar>* tape_ = nullptr;
    std::size_t id_ = 0;
};

template <typename Scalar>
class Tape {
public:
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    // Receives the node's own upstream gradient and adds contributions into
    // the parents' accumulators through Tape::accumulate.
    using BackwardFn = std::function<void(Tape&, const Matrix& upstream)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Leaf whose gradient is tracked (a parameter).
    Var<Scalar> variable(Matrix value) { return push(std::move(value), true, nullptr); }

    /// Leaf without gradient tracking (data, masks, encodings).
    Var<Scalar> constant(Matrix value) { return push(std::move(value), false, nullptr); }

    /// Records a node. `requires_grad` should be true iff any parent needs a
    /// gradient; `backward` may be empty for nodes that do not propagate.
    Var<Scalar> push(Matrix value, bool requires_grad, BackwardFn backward) {
        check_finite(value);
        nodes_.push_back(Node{std::move(value), Matrix(), std::move(backward), requires_grad});
        return Var<Scalar>(this, nodes_.size() - 1);
    }

    const Matrix& value(Var<Scalar> v) const { return nodes_.at(v.id()).value; }
    const Matrix& grad(Var<Scalar> v) const { return nodes_.at(v.id()).grad; }
    bool requires_grad(Var<Scalar> v) const { return nodes_.at(v.id()).requires_grad; }
    std::size_t size() const { return nodes_.size(); }

    template <typename Derived>
    void accumulate(Var<Scalar> v, const Eigen::MatrixBase<Derived>& g) {
        Node& n = nodes_[v.id()];
        if (n.requires_grad) n.grad += g;
    }

    /// Zeroes every accumulator, seeds d(root)/d(root) = 1 and sweeps the
    /// tape once in reverse creation order.
    void backward(Var<Scalar> root) {
        if (root.rows() != 1 || root.cols() != 1) {
            std::ostringstream msg;
            msg << "backward: root must be scalar, got " << root.rows() << "x" << root.cols();
            throw ShapeError(msg.str());
        }
        for (auto& n : nodes_) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
        nodes_[root.id()].grad(0, 0) = Scalar(1);
        for (std::size_t i = root.id() + 1; i-- > 0;) {
            Node& n = nodes_[i];
            if (!n.requires_grad || !n.backward) continue;
            n.backward(*this, n.grad);
        }
    }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        BackwardFn backward;
        bool requires_grad;
    };

    static void check_finite(const Matrix& m) {
        if (!m.allFinite()) throw DomainError("tape: non-finite value produced");
    }

    std::vector<Node> nodes_;
};

namespace detail {

template <typename Scalar>
void require_same_tape(Var<Scalar> a, Var<Scalar> b) {
    if (&a.tape() != &b.tape()) throw std::invalid_argument("operands live on different tapes");
}

template <typename Scalar>
void require_same_shape(const char* op, Var<Scalar> a, Var<Scalar> b) {
    require_same_tape(a, b);
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        std::ostringstream msg;
        msg << op << ": shape mismatch " << a.rows() << "x" << a.cols() << " vs " << b.rows() << "x"
            << b.cols();
        throw ShapeError(msg.str());
    }
}

}  // namespace detail

/// W·x + b, with b broadcast over the columns of x.
template <typename Scalar>
Var<Scalar> affine(Var<Scalar> W, Var<Scalar> b, Var<Scalar> x) {
    detail::require_same_tape(W, x);
    detail::require_same_tape(W, b);
    if (W.cols() != x.rows() || b.rows() != W.rows() || b.cols() != 1) {
        std::ostringstream msg;
        msg << "affine: W is " << W.rows() << "x" << W.cols() << ", b is " << b.rows() << "x"
            << b.cols() << ", x is " << x.rows() << "x" << x.cols();
        throw ShapeError(msg.str());
    }
    using Matrix = typename Tape<Scalar>::Matrix;
    Matrix out = W.value() * x.value();
    out.colwise() += b.value().col(0);
    bool rg = W.requires_grad() || b.requires_grad() || x.requires_grad();
    return W.tape().push(std::move(out), rg, [W, b, x](Tape<Scalar>& t, const Matrix& g) {
        if (W.requires_grad()) t.accumulate(W, g * x.value().transpose());
        if (b.requires_grad()) t.accumulate(b, g.rowwise().sum());
        if (x.requires_grad()) t.accumulate(x, W.value().transpose() * g);
    });
}

template <typename Scalar>
Var<Scalar> matmul(Var<Scalar> a, Var<Scalar> b) {
    detail::require_same_tape(a, b);
    if (a.cols() != b.rows()) {
        std::ostringstream msg;
        msg << "matmul: inner dimensions " << a.cols() << " and " << b.rows() << " differ";
        throw ShapeError(msg.str());
    }
    using Matrix = typename Tape<Scalar>::Matrix;
    bool rg = a.requires_grad() || b.requires_grad();
    return a.tape().push(a.value() * b.value(), rg, [a, b](Tape<Scalar>& t, const Matrix& g) {
        if (a.requires_grad()) t.accumulate(a, g * b.value().transpose());
        if (b.requires_grad()) t.accumulate(b, a.value().transpose() * g);
    });
}

template <typename Scalar>
Var<Scalar> add(Var<Scalar> a, Var<Scalar> b) {
    detail::require_same_shape("add", a, b);
    using Matrix = typename Tape<Scalar>::Matrix;
    bool rg = a.requires_grad() || b.requires_grad();
    return a.tape().push(a.value() + b.value(), rg, [a, b](Tape<Scalar>& t, const Matrix& g) {
        t.accumulate(a, g);
        t.accumulate(b, g);
    });
}

/// Elementwise product.
template <typename Scalar>
Var<Scalar> mul(Var<Scalar> a, Var<Scalar> b) {
    detail::require_same_shape("mul", a, b);
    using Matrix = typename Tape<Scalar>::Matrix;
    bool rg = a.requires_grad() || b.requires_grad();
    Matrix out = a.value().cwiseProduct(b.value());
    return a.tape().push(std::move(out), rg, [a, b](Tape<Scalar>& t, const Matrix& g) {
        if (a.requires_grad()) t.accumulate(a, g.cwiseProduct(b.value()));
        if (b.requires_grad()) t.accumulate(b, g.cwiseProduct(a.value()));
    });
}

template <typename Scalar>
Var<Scalar> neg(Var<Scalar> a) {
    using Matrix = typename Tape<Scalar>::Matrix;
    return a.tape().push(-a.value(), a.requires_grad(),
                         [a](Tape<Scalar>& t, const Matrix& g) { t.accumulate(a, -g); });
}

/// alpha·a + beta, elementwise.
template <typename Scalar>
Var<Scalar> scale_shift(Var<Scalar> a, Scalar alpha, Scalar beta) {
    using Matrix = typename Tape<Scalar>::Matrix;
    Matrix out = (alpha * a.value().array() + beta).matrix();
    return a.tape().push(std::move(out), a.requires_grad(), [a, alpha](Tape<Scalar>& t, const Matrix& g) {
        t.accumulate(a, alpha * g);
    });
}

template <typename Scalar>
Var<Scalar> relu(Var<Scalar> a) {
    using Matrix = typename Tape<Scalar>::Matrix;
    Matrix out = a.value().cwiseMax(Scalar(0));
    return a.tape().push(std::move(out), a.requires_grad(), [a](Tape<Scalar>& t, const Matrix& g) {
        t.accumulate(a, (a.value().array() > Scalar(0)).select(g, Scalar(0)));
    });
}

template <typename Scalar>
Var<Scalar> sigmoid(Var<Scalar> a) {
    using Matrix = typename Tape<Scalar>::Matrix;
    Matrix out = a.value().unaryExpr([](Scalar v) {
        // Split by sign so exp never overflows.
        if (v >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-v));
        Scalar e = std::exp(v);
        return e / (Scalar(1) + e);
    });
    // The closure reads its own output, which will sit at the next slot.
    Var<Scalar> self(&a.tape(), a.tape().size());
    return a.tape().push(std::move(out), a.requires_grad(), [a, self](Tape<Scalar>& t, const Matrix& g) {
        const auto& s = self.value().array();
        t.accumulate(a, (g.array() * s * (Scalar(1) - s)).matrix());
    });
}

/// Natural log; every entry must be strictly positive.
template <typename Scalar>
Var<Scalar> log(Var<Scalar> a) {
    using Matrix = typename Tape<Scalar>::Matrix;
    const Matrix& v = a.value();
    for (Eigen::Index j = 0; j < v.cols(); ++j)
        for (Eigen::Index i = 0; i < v.rows(); ++i)
            if (!(v(i, j) > Scalar(0))) {
                std::ostringstream msg;
                msg << "log: non-positive argument " << v(i, j) << " at (" << i << ", " << j << ")";
                throw DomainError(msg.str());
            }
    Matrix out = v.array().log().matrix();
    return a.tape().push(std::move(out), a.requires_grad(), [a](Tape<Scalar>& t, const Matrix& g) {
        t.accumulate(a, (g.array() / a.value().array()).matrix());
    });
}

template <typename Scalar>
Var<Scalar> exp(Var<Scalar> a) {
    using Matrix = typename Tape<Scalar>::Matrix;
    Matrix out = a.value().array().exp().matrix();
    Var<Scalar> self(&a.tape(), a.tape().size());
    return a.tape().push(std::move(out), a.requires_grad(), [a, self](Tape<Scalar>& t, const Matrix& g) {
        t.accumulate(a, g.cwiseProduct(self.value()));
    });
}

/// Hard clip into [lo, hi]; zero gradient wherever the clip is active.
template <typename Scalar>
Var<Scalar> clamp(Var<Scalar> a, Scalar lo, Scalar hi) {
    using Matrix = typename Tape<Scalar>::Matrix;
    Matrix out = a.value().cwiseMax(lo).cwiseMin(hi);
    return a.tape().push(std::move(out), a.requires_grad(), [a, lo, hi](Tape<Scalar>& t, const Matrix& g) {
        auto inside = (a.value().array() >= lo) && (a.value().array() <= hi);
        t.accumulate(a, inside.select(g, Scalar(0)));
    });
}

/// Sum of all entries, as a 1x1 node.
template <typename Scalar>
Var<Scalar> sum(Var<Scalar> a) {
    using Matrix = typename Tape<Scalar>::Matrix;
    Matrix out(1, 1);
    out(0, 0) = a.value().sum();
    const Eigen::Index r = a.rows(), c = a.cols();
    return a.tape().push(std::move(out), a.requires_grad(), [a, r, c](Tape<Scalar>& t, const Matrix& g) {
        t.accumulate(a, Matrix::Constant(r, c, g(0, 0)));
    });
}

template <typename Scalar>
Var<Scalar> mean(Var<Scalar> a) {
    const auto n = static_cast<Scalar>(a.value().size());
    return scale_shift(sum(a), Scalar(1) / n, Scalar(0));
}

/// Per-column sums, as a 1 x cols node.
template <typename Scalar>
Var<Scalar> col_sum(Var<Scalar> a) {
    using Matrix = typename Tape<Scalar>::Matrix;
    Matrix out = a.value().colwise().sum();
    const Eigen::Index r = a.rows();
    return a.tape().push(std::move(out), a.requires_grad(), [a, r](Tape<Scalar>& t, const Matrix& g) {
        t.accumulate(a, g.replicate(r, 1));
    });
}

/// Reinterprets the column-major storage with a new shape.
template <typename Scalar>
Var<Scalar> reshape(Var<Scalar> a, Eigen::Index rows, Eigen::Index cols) {
    if (rows * cols != a.value().size()) {
        std::ostringstream msg;
        msg << "reshape: cannot view " << a.rows() << "x" << a.cols() << " as " << rows << "x" << cols;
        throw ShapeError(msg.str());
    }
    using Matrix = typename Tape<Scalar>::Matrix;
    Matrix out = Eigen::Map<const Matrix>(a.value().data(), rows, cols);
    const Eigen::Index r0 = a.rows(), c0 = a.cols();
    return a.tape().push(std::move(out), a.requires_grad(), [a, r0, c0](Tape<Scalar>& t, const Matrix& g) {
        t.accumulate(a, Eigen::Map<const Matrix>(g.data(), r0, c0));
    });
}

/// For z (d x B) and p (d x M) returns the d x (B·M) matrix whose column
/// b·M + m is z[:, b] + p[:, m].
template <typename Scalar>
Var<Scalar> outer_add_columns(Var<Scalar> z, Var<Scalar> p) {
    detail::require_same_tape(z, p);
    if (z.rows() != p.rows()) {
        std::ostringstream msg;
        msg << "outer_add_columns: row counts " << z.rows() << " and " << p.rows() << " differ";
        throw ShapeError(msg.str());
    }
    using Matrix = typename Tape<Scalar>::Matrix;
    const Eigen::Index B = z.cols(), M = p.cols();
    Matrix out(z.rows(), B * M);
    for (Eigen::Index b = 0; b < B; ++b)
        out.middleCols(b * M, M) = p.value().colwise() + z.value().col(b);
    bool rg = z.requires_grad() || p.requires_grad();
    return z.tape().push(std::move(out), rg, [z, p, B, M](Tape<Scalar>& t, const Matrix& g) {
        if (z.requires_grad()) {
            Matrix gz(z.rows(), B);
            for (Eigen::Index b = 0; b < B; ++b) gz.col(b) = g.middleCols(b * M, M).rowwise().sum();
            t.accumulate(z, gz);
        }
        if (p.requires_grad()) {
            Matrix gp = Matrix::Zero(p.rows(), M);
            for (Eigen::Index b = 0; b < B; ++b) gp += g.middleCols(b * M, M);
            t.accumulate(p, gp);
        }
    });
}

}  // namespace isf
