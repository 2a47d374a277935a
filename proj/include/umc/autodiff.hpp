#pragma once

#include "umc/tensor.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

/// Eager reverse-mode differentiation over dense double matrices.
///
/// Every primitive evaluates immediately and appends a node to a Tape. Nodes only
/// reference earlier nodes, so creation order is a topological order and backward
/// is a single reverse sweep.
namespace umc::ad {

/// Lower bound applied to the argument of log().
inline constexpr double kLogFloor = 1e-12;

enum class Op : std::uint8_t {
    constant,
    parameter,
    matmul,
    add,
    add_row,
    subtract,
    multiply,
    scale,
    add_scalar,
    relu,
    softmax_rows,
    transpose,
    log,
    reciprocal,
    frobenius_sq,
    sum_all,
    mean_all,
    sum_rows,
    sq_dist_rows,
    dist_rows,
    stop_gradient,
};

std::string_view op_name(Op op);

/// A trainable matrix plus its gradient and optimizer moment buffers. The shape is
/// fixed at construction; all buffers expose shape-locked views.
class Parameter {
public:
    explicit Parameter(Matrix init);

    const Matrix& value() const { return value_; }
    const Matrix& grad() const { return grad_; }
    const Matrix& first_moment() const { return first_moment_; }
    const Matrix& second_moment() const { return second_moment_; }

    Eigen::Map<Matrix> value_mut() { return {value_.data(), value_.rows(), value_.cols()}; }
    Eigen::Map<Matrix> grad_mut() { return {grad_.data(), grad_.rows(), grad_.cols()}; }
    Eigen::Map<Matrix> first_moment_mut() {
        return {first_moment_.data(), first_moment_.rows(), first_moment_.cols()};
    }
    Eigen::Map<Matrix> second_moment_mut() {
        return {second_moment_.data(), second_moment_.rows(), second_moment_.cols()};
    }

    Index rows() const { return value_.rows(); }
    Index cols() const { return value_.cols(); }
    Index size() const { return value_.size(); }

    void zero_grad() { grad_.setZero(); }

private:
    Matrix value_;
    Matrix grad_;
    Matrix first_moment_;
    Matrix second_moment_;
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
public:
    Var() = default;

    const Matrix& value() const;
    Index rows() const { return value().rows(); }
    Index cols() const { return value().cols(); }
    /// Value of a 1x1 node.
    double scalar() const;

    Tape& tape() const { return *tape_; }
    std::size_t id() const { return id_; }
    bool valid() const { return tape_ != nullptr; }

private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Leaf that never receives a gradient.
    Var constant(Matrix value);
    /// Leaf bound to a trainable parameter; backward accumulates into p.grad().
    Var parameter(Parameter& p);

    /// Reverse sweep from a 1x1 loss. Parameter gradients are accumulated, not reset.
    void backward(Var loss);

    const Matrix& value(Var v) const { return nodes_.at(v.id()).value; }
    /// Gradient of the last backward() with respect to v; nullptr when none reached it.
    const Matrix* grad(Var v) const;
    Op op(Var v) const { return nodes_.at(v.id()).op; }
    bool requires_grad(Var v) const { return nodes_.at(v.id()).requires_grad; }
    std::size_t size() const { return nodes_.size(); }

    struct Record {
        Op op;
        Matrix value;
        std::array<Var, 2> parents{};
        std::uint8_t arity = 0;
        double scalar = 0.0;
        Matrix aux;
    };
    /// Appends an evaluated node. Used by the primitives below.
    Var record(Record r);

private:
    struct Node {
        Matrix value;
        Matrix grad;
        Op op = Op::constant;
        std::array<std::size_t, 2> parents{};
        std::uint8_t arity = 0;
        bool requires_grad = false;
        double scalar = 0.0;
        Matrix aux;
        Parameter* param = nullptr;
    };

    void accumulate(std::size_t id, const Matrix& g);
    void propagate(std::size_t id);

    std::vector<Node> nodes_;
};

// Primitives. All evaluate eagerly and throw ShapeError on nonconforming operands
// and NumericError on non-finite results.

Var matmul(Var a, Var b);
Var add(Var a, Var b);
/// a (n x m) plus the 1 x m row b broadcast over rows.
Var add_row(Var a, Var row);
Var subtract(Var a, Var b);
/// Elementwise product.
Var multiply(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var relu(Var a);
/// Row-wise softmax with row-max subtraction.
Var softmax_rows(Var a);
Var transpose(Var a);
/// Natural log of max(a, kLogFloor).
Var log(Var a);
Var reciprocal(Var a);
/// Sum of squared entries, 1x1.
Var frobenius_sq(Var a);
Var sum_all(Var a);
Var mean_all(Var a);
/// Column sums: n x m -> 1 x m.
Var sum_rows(Var a);
/// Per-row squared distance to constant rows: n x m -> n x 1. `c` has n rows or one.
Var sq_dist_rows(Var a, const Matrix& c);
/// Per-row Euclidean distance to constant rows. Zero distance has zero subgradient.
Var dist_rows(Var a, const Matrix& c);
/// Identity on values; blocks gradient flow.
Var stop_gradient(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return subtract(a, b); }
inline Var operator*(double s, Var a) { return scale(a, s); }

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t param_index = 0;
    Index row = 0;
    Index col = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    std::size_t entries_checked = 0;
    bool passed = false;
};

using LossBuilder = std::function<Var(Tape&)>;

/// Compares backward() against central finite differences for every entry of every
/// parameter. Relative error is |a - n| / max(|a|, |n|), or |a - n| when
/// |a| < 1e-8. `step` must lie in [1e-7, 1e-3].
GradCheckReport grad_check(const LossBuilder& build, std::span<Parameter* const> params,
                           double step = 1e-5, double tolerance = 1e-4);

}  // namespace umc::ad
