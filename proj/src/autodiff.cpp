#include "umc/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace umc::ad {

std::string_view op_name(Op op) {
    switch (op) {
    case Op::constant: return "constant";
    case Op::parameter: return "parameter";
    case Op::matmul: return "matmul";
    case Op::add: return "add";
    case Op::add_row: return "add_row";
    case Op::subtract: return "subtract";
    case Op::multiply: return "multiply";
    case Op::scale: return "scale";
    case Op::add_scalar: return "add_scalar";
    case Op::relu: return "relu";
    case Op::softmax_rows: return "softmax_rows";
    case Op::transpose: return "transpose";
    case Op::log: return "log";
    case Op::reciprocal: return "reciprocal";
    case Op::frobenius_sq: return "frobenius_sq";
    case Op::sum_all: return "sum_all";
    case Op::mean_all: return "mean_all";
    case Op::sum_rows: return "sum_rows";
    case Op::sq_dist_rows: return "sq_dist_rows";
    case Op::dist_rows: return "dist_rows";
    case Op::stop_gradient: return "stop_gradient";
    }
    return "unknown";
}

Parameter::Parameter(Matrix init)
    : value_(std::move(init)),
      grad_(Matrix::Zero(value_.rows(), value_.cols())),
      first_moment_(Matrix::Zero(value_.rows(), value_.cols())),
      second_moment_(Matrix::Zero(value_.rows(), value_.cols())) {
    require_finite(value_, "Parameter initialization");
}

const Matrix& Var::value() const { return tape_->value(*this); }

double Var::scalar() const {
    const Matrix& v = value();
    if (v.rows() != 1 || v.cols() != 1) {
        throw ShapeError("scalar() on a " + shape_string(v) + " node");
    }
    return v(0, 0);
}

Var Tape::constant(Matrix value) {
    return record({.op = Op::constant, .value = std::move(value)});
}

Var Tape::parameter(Parameter& p) {
    Node n;
    n.value = p.value();
    n.op = Op::parameter;
    n.requires_grad = true;
    n.param = &p;
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
}

Var Tape::record(Record r) {
    require_finite(r.value, op_name(r.op));
    Node n;
    n.value = std::move(r.value);
    n.op = r.op;
    n.arity = r.arity;
    n.scalar = r.scalar;
    n.aux = std::move(r.aux);
    for (std::uint8_t i = 0; i < r.arity; ++i) {
        const Var& p = r.parents[i];
        if (&p.tape() != this) {
            throw std::invalid_argument("operands recorded on different tapes");
        }
        n.parents[i] = p.id();
        if (r.op != Op::stop_gradient) {
            n.requires_grad = n.requires_grad || nodes_[p.id()].requires_grad;
        }
    }
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
}

const Matrix* Tape::grad(Var v) const {
    const Node& n = nodes_.at(v.id());
    return n.grad.size() == 0 ? nullptr : &n.grad;
}

void Tape::accumulate(std::size_t id, const Matrix& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
        n.grad = g;
    } else {
        n.grad += g;
    }
}

void Tape::backward(Var loss) {
    if (&loss.tape() != this) throw std::invalid_argument("loss belongs to another tape");
    const Matrix& lv = nodes_.at(loss.id()).value;
    if (lv.rows() != 1 || lv.cols() != 1) {
        throw ShapeError("backward() needs a 1x1 loss, got " + shape_string(lv));
    }
    for (Node& n : nodes_) n.grad.resize(0, 0);
    if (!nodes_[loss.id()].requires_grad) return;
    nodes_[loss.id()].grad = Matrix::Ones(1, 1);
    for (std::size_t id = loss.id() + 1; id-- > 0;) {
        if (nodes_[id].grad.size() == 0) continue;
        propagate(id);
    }
}

void Tape::propagate(std::size_t id) {
    // Copies keep references valid while accumulate() writes into other nodes.
    const Node& n = nodes_[id];
    const Matrix& g = n.grad;
    const std::size_t a = n.parents[0];
    const std::size_t b = n.parents[1];
    auto val = [this](std::size_t i) -> const Matrix& { return nodes_[i].value; };

    switch (n.op) {
    case Op::constant:
    case Op::stop_gradient:
        break;
    case Op::parameter:
        n.param->grad_mut() += g;
        break;
    case Op::matmul: {
        Matrix ga = g * val(b).transpose();
        Matrix gb = val(a).transpose() * g;
        accumulate(a, ga);
        accumulate(b, gb);
        break;
    }
    case Op::add: {
        Matrix gc = g;
        accumulate(a, gc);
        accumulate(b, gc);
        break;
    }
    case Op::add_row: {
        Matrix gc = g;
        Matrix gr = g.colwise().sum();
        accumulate(a, gc);
        accumulate(b, gr);
        break;
    }
    case Op::subtract: {
        Matrix gc = g;
        Matrix gn = -g;
        accumulate(a, gc);
        accumulate(b, gn);
        break;
    }
    case Op::multiply: {
        Matrix ga = g.cwiseProduct(val(b));
        Matrix gb = g.cwiseProduct(val(a));
        accumulate(a, ga);
        accumulate(b, gb);
        break;
    }
    case Op::scale: {
        Matrix ga = n.scalar * g;
        accumulate(a, ga);
        break;
    }
    case Op::add_scalar: {
        Matrix ga = g;
        accumulate(a, ga);
        break;
    }
    case Op::relu: {
        Matrix ga = (val(a).array() > 0.0).select(g, 0.0);
        accumulate(a, ga);
        break;
    }
    case Op::softmax_rows: {
        const Matrix& s = n.value;
        Vector dots = g.cwiseProduct(s).rowwise().sum();
        Matrix ga = s.cwiseProduct(g - dots.replicate(1, g.cols()));
        accumulate(a, ga);
        break;
    }
    case Op::transpose: {
        Matrix ga = g.transpose();
        accumulate(a, ga);
        break;
    }
    case Op::log: {
        const Matrix& x = val(a);
        Matrix ga = (x.array() > kLogFloor).select(g.array() / x.array(), 0.0);
        accumulate(a, ga);
        break;
    }
    case Op::reciprocal: {
        const Matrix& x = val(a);
        Matrix ga = -g.array() / x.array().square();
        accumulate(a, ga);
        break;
    }
    case Op::frobenius_sq: {
        Matrix ga = (2.0 * g(0, 0)) * val(a);
        accumulate(a, ga);
        break;
    }
    case Op::sum_all: {
        Matrix ga = Matrix::Constant(val(a).rows(), val(a).cols(), g(0, 0));
        accumulate(a, ga);
        break;
    }
    case Op::mean_all: {
        const Matrix& x = val(a);
        Matrix ga = Matrix::Constant(x.rows(), x.cols(), g(0, 0) / static_cast<double>(x.size()));
        accumulate(a, ga);
        break;
    }
    case Op::sum_rows: {
        Matrix ga = g.replicate(val(a).rows(), 1);
        accumulate(a, ga);
        break;
    }
    case Op::sq_dist_rows:
    case Op::dist_rows: {
        const Matrix& x = val(a);
        Matrix diff = n.aux.rows() == x.rows() ? Matrix(x - n.aux)
                                               : Matrix(x.rowwise() - n.aux.row(0));
        Vector coeff(x.rows());
        for (Index i = 0; i < x.rows(); ++i) {
            if (n.op == Op::sq_dist_rows) {
                coeff(i) = 2.0 * g(i, 0);
            } else {
                const double d = n.value(i, 0);
                coeff(i) = d > 0.0 ? g(i, 0) / d : 0.0;
            }
        }
        Matrix ga = diff.array().colwise() * coeff.array();
        accumulate(a, ga);
        break;
    }
    }
}

namespace {

void require_same_shape(Var a, Var b, std::string_view op) {
    if (!same_shape(a.value(), b.value())) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.value()) +
                         " vs " + shape_string(b.value()));
    }
}

Var unary(Op op, Var a, Matrix value, double scalar = 0.0) {
    return a.tape().record(
        {.op = op, .value = std::move(value), .parents = {a, Var{}}, .arity = 1, .scalar = scalar});
}

Var binary(Op op, Var a, Var b, Matrix value) {
    return a.tape().record({.op = op, .value = std::move(value), .parents = {a, b}, .arity = 2});
}

Matrix row_differences(const Matrix& x, const Matrix& c, std::string_view op) {
    if (c.cols() != x.cols() || (c.rows() != x.rows() && c.rows() != 1)) {
        throw ShapeError(std::string(op) + ": constant rows " + shape_string(c) +
                         " do not conform to " + shape_string(x));
    }
    return c.rows() == x.rows() ? Matrix(x - c) : Matrix(x.rowwise() - c.row(0));
}

}  // namespace

Var matmul(Var a, Var b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: " + shape_string(a.value()) + " * " + shape_string(b.value()));
    }
    return binary(Op::matmul, a, b, a.value() * b.value());
}

Var add(Var a, Var b) {
    require_same_shape(a, b, "add");
    return binary(Op::add, a, b, a.value() + b.value());
}

Var add_row(Var a, Var row) {
    if (row.rows() != 1 || row.cols() != a.cols()) {
        throw ShapeError("add_row: row " + shape_string(row.value()) + " vs " +
                         shape_string(a.value()));
    }
    Matrix v = a.value().rowwise() + row.value().row(0);
    return binary(Op::add_row, a, row, std::move(v));
}

Var subtract(Var a, Var b) {
    require_same_shape(a, b, "subtract");
    return binary(Op::subtract, a, b, a.value() - b.value());
}

Var multiply(Var a, Var b) {
    require_same_shape(a, b, "multiply");
    return binary(Op::multiply, a, b, a.value().cwiseProduct(b.value()));
}

Var scale(Var a, double s) { return unary(Op::scale, a, s * a.value(), s); }

Var add_scalar(Var a, double s) {
    return unary(Op::add_scalar, a, (a.value().array() + s).matrix(), s);
}

Var relu(Var a) { return unary(Op::relu, a, a.value().cwiseMax(0.0)); }

Var softmax_rows(Var a) {
    const Matrix& x = a.value();
    if (x.cols() == 0) throw ShapeError("softmax_rows: zero columns");
    Matrix s = (x.colwise() - x.rowwise().maxCoeff()).array().exp().matrix();
    Vector sums = s.rowwise().sum();
    s.array().colwise() /= sums.array();
    return unary(Op::softmax_rows, a, std::move(s));
}

Var transpose(Var a) { return unary(Op::transpose, a, a.value().transpose()); }

Var log(Var a) {
    return unary(Op::log, a, a.value().array().max(kLogFloor).log().matrix());
}

Var reciprocal(Var a) { return unary(Op::reciprocal, a, a.value().array().inverse().matrix()); }

Var frobenius_sq(Var a) {
    return unary(Op::frobenius_sq, a, Matrix::Constant(1, 1, a.value().squaredNorm()));
}

Var sum_all(Var a) { return unary(Op::sum_all, a, Matrix::Constant(1, 1, a.value().sum())); }

Var mean_all(Var a) {
    if (a.value().size() == 0) throw ShapeError("mean_all: empty operand");
    return unary(Op::mean_all, a, Matrix::Constant(1, 1, a.value().mean()));
}

Var sum_rows(Var a) { return unary(Op::sum_rows, a, a.value().colwise().sum()); }

Var sq_dist_rows(Var a, const Matrix& c) {
    Matrix diff = row_differences(a.value(), c, "sq_dist_rows");
    Matrix v = diff.rowwise().squaredNorm();
    return a.tape().record({.op = Op::sq_dist_rows,
                            .value = std::move(v),
                            .parents = {a, Var{}},
                            .arity = 1,
                            .aux = c});
}

Var dist_rows(Var a, const Matrix& c) {
    Matrix diff = row_differences(a.value(), c, "dist_rows");
    Matrix v = diff.rowwise().norm();
    return a.tape().record({.op = Op::dist_rows,
                            .value = std::move(v),
                            .parents = {a, Var{}},
                            .arity = 1,
                            .aux = c});
}

Var stop_gradient(Var a) { return unary(Op::stop_gradient, a, a.value()); }

GradCheckReport grad_check(const LossBuilder& build, std::span<Parameter* const> params,
                           double step, double tolerance) {
    if (!(step >= 1e-7 && step <= 1e-3)) {
        throw std::invalid_argument("grad_check: step must lie in [1e-7, 1e-3]");
    }
    for (Parameter* p : params) p->zero_grad();
    {
        Tape tape;
        Var loss = build(tape);
        tape.backward(loss);
    }

    auto evaluate = [&build]() {
        Tape tape;
        const double v = build(tape).scalar();
        if (!std::isfinite(v)) throw NumericError("grad_check: non-finite loss evaluation");
        return v;
    };

    GradCheckReport report;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Parameter& p = *params[pi];
        const Matrix analytic = p.grad();
        auto values = p.value_mut();
        for (Index r = 0; r < p.rows(); ++r) {
            for (Index c = 0; c < p.cols(); ++c) {
                const double saved = values(r, c);
                values(r, c) = saved + step;
                const double up = evaluate();
                values(r, c) = saved - step;
                const double down = evaluate();
                values(r, c) = saved;

                const double numeric = (up - down) / (2.0 * step);
                const double an = analytic(r, c);
                const double abs_err = std::abs(an - numeric);
                const double err = std::abs(an) < 1e-8
                                       ? abs_err
                                       : abs_err / std::max(std::abs(an), std::abs(numeric));
                ++report.entries_checked;
                if (err > report.max_rel_error || report.entries_checked == 1) {
                    report.max_rel_error = err;
                    report.param_index = pi;
                    report.row = r;
                    report.col = c;
                    report.analytic = an;
                    report.numeric = numeric;
                }
            }
        }
    }
    report.passed = report.max_rel_error <= tolerance;
    return report;
}

}  // namespace umc::ad
