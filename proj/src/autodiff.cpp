#include "wirepinn/autodiff.hpp"

#include <cmath>
#include <numbers>

#include "wirepinn/error.hpp"

namespace wirepinn {

FermiClosure::FermiClosure(const SemiconductorParams& p, const TensorMesh& mesh) : params(p) {
    silicon.reserve(mesh.size());
    for (std::size_t k = 0; k < mesh.size(); ++k) silicon.push_back(mesh.region(k) == Region::Silicon ? 1 : 0);
}

namespace {

void require_same(Eigen::Index a, Eigen::Index b, const char* what) {
    if (a != b) throw ShapeError(std::string("shape mismatch in ") + what);
}

// Kernel index for (ci, co, ky, kx).
inline Eigen::Index kidx(const ConvShape& s, Eigen::Index ci, Eigen::Index co, int ky, int kx) {
    return ((ci * s.out_channels + co) * 3 + ky) * 3 + kx;
}

}  // namespace

Eigen::VectorXd conv_transpose_forward(const Eigen::VectorXd& x, const Eigen::VectorXd& kernel,
                                       const Eigen::VectorXd& bias, const ConvShape& s) {
    const Eigen::Index plane = s.height * s.width;
    require_same(x.size(), s.in_channels * plane, "conv_transpose input");
    require_same(kernel.size(), s.in_channels * s.out_channels * 9, "conv_transpose kernel");
    require_same(bias.size(), s.out_channels, "conv_transpose bias");
    Eigen::VectorXd y(s.out_channels * plane);
    for (Eigen::Index co = 0; co < s.out_channels; ++co) y.segment(co * plane, plane).setConstant(bias[co]);
    // Input pixel (h, w) scatters into output (h + ky - 1, w + kx - 1).
    for (Eigen::Index ci = 0; ci < s.in_channels; ++ci) {
        const double* in = x.data() + ci * plane;
        for (Eigen::Index co = 0; co < s.out_channels; ++co) {
            double* out = y.data() + co * plane;
            for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                    const double k = kernel[kidx(s, ci, co, ky, kx)];
                    const Eigen::Index w0 = std::max<Eigen::Index>(0, 1 - kx);
                    const Eigen::Index w1 = std::min<Eigen::Index>(s.width, s.width + 1 - kx);
                    for (Eigen::Index h = std::max<Eigen::Index>(0, 1 - ky);
                         h < std::min<Eigen::Index>(s.height, s.height + 1 - ky); ++h) {
                        const double* src = in + h * s.width;
                        double* dst = out + (h + ky - 1) * s.width + (kx - 1);
                        for (Eigen::Index w = w0; w < w1; ++w) dst[w] += k * src[w];
                    }
                }
            }
        }
    }
    return y;
}

NodeId Tape::push(Node node) {
    nodes_.push_back(std::move(node));
    return nodes_.size() - 1;
}

const Tape::Node& Tape::at(NodeId id) const {
    if (id >= nodes_.size()) throw ContractError("node id is not on this tape");
    return nodes_[id];
}

const Eigen::VectorXd& Tape::value(NodeId id) const { return at(id).value; }
const Eigen::VectorXd& Tape::grad(NodeId id) const { return at(id).grad; }
Tape::Op Tape::op(NodeId id) const { return at(id).op; }

NodeId Tape::constant(Eigen::VectorXd value) {
    Node n;
    n.value = std::move(value);
    return push(std::move(n));
}

NodeId Tape::dense(NodeId x, Parameter& weight, Parameter& bias) {
    const auto& xv = at(x).value;
    require_same(weight.cols, xv.size(), "dense input");
    require_same(weight.rows, bias.value.size(), "dense bias");
    Node n;
    n.op = Op::Dense;
    n.a = x;
    n.p0 = &weight;
    n.p1 = &bias;
    n.needs_grad = true;
    n.value = bias.value;
    n.value.noalias() += weight.matrix() * xv;
    return push(std::move(n));
}

NodeId Tape::elu(NodeId x) {
    const auto& xv = at(x).value;
    Node n;
    n.op = Op::Elu;
    n.a = x;
    n.needs_grad = at(x).needs_grad;
    n.value = xv.unaryExpr([](double v) { return v > 0.0 ? v : std::expm1(v); });
    return push(std::move(n));
}

NodeId Tape::affine(NodeId x, const AffineOperator& op) {
    const auto& xv = at(x).value;
    require_same(op.cols(), xv.size(), "affine input");
    Node n;
    n.op = Op::Affine;
    n.a = x;
    n.affine = &op;
    n.needs_grad = at(x).needs_grad;
    n.value = op.apply(xv);
    return push(std::move(n));
}

NodeId Tape::fermi(NodeId phi, const FermiClosure& closure) {
    const auto& pv = at(phi).value;
    require_same(static_cast<Eigen::Index>(closure.silicon.size()), pv.size(), "fermi closure");
    Node n;
    n.op = Op::Fermi;
    n.a = phi;
    n.fermi = &closure;
    n.needs_grad = at(phi).needs_grad;
    n.value.resize(pv.size());
    n.aux.resize(pv.size());
    for (Eigen::Index i = 0; i < pv.size(); ++i) {
        const Region r = closure.silicon[static_cast<std::size_t>(i)] ? Region::Silicon : Region::Oxide;
        n.value[i] = electron_density(pv[i], closure.params, r);
        n.aux[i] = electron_density_deriv(pv[i], closure.params, r);
    }
    return push(std::move(n));
}

NodeId Tape::add_constant(NodeId x, double c) {
    Node n;
    n.op = Op::AddConstant;
    n.a = x;
    n.needs_grad = at(x).needs_grad;
    n.value = at(x).value.array() + c;
    return push(std::move(n));
}

NodeId Tape::scale(NodeId x, double s) {
    Node n;
    n.op = Op::Scale;
    n.a = x;
    n.c0 = s;
    n.needs_grad = at(x).needs_grad;
    n.value = at(x).value * s;
    return push(std::move(n));
}

NodeId Tape::divide(NodeId x, double d) {
    Node n;
    n.op = Op::Divide;
    n.a = x;
    n.c0 = d;
    n.needs_grad = at(x).needs_grad;
    n.value = at(x).value / d;
    return push(std::move(n));
}

NodeId Tape::log10(NodeId x) {
    Node n;
    n.op = Op::Log10;
    n.a = x;
    n.needs_grad = at(x).needs_grad;
    n.value = at(x).value.array().log10();
    return push(std::move(n));
}

NodeId Tape::gather(NodeId x, std::span<const std::size_t> indices) {
    const auto& xv = at(x).value;
    Node n;
    n.op = Op::Gather;
    n.a = x;
    n.indices = indices;
    n.needs_grad = at(x).needs_grad;
    n.value.resize(static_cast<Eigen::Index>(indices.size()));
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= static_cast<std::size_t>(xv.size())) throw ShapeError("gather index out of range");
        n.value[static_cast<Eigen::Index>(i)] = xv[static_cast<Eigen::Index>(indices[i])];
    }
    return push(std::move(n));
}

NodeId Tape::mse(NodeId a, NodeId b) {
    const auto& av = at(a).value;
    const auto& bv = at(b).value;
    require_same(av.size(), bv.size(), "mse");
    if (av.size() == 0) throw ShapeError("mse of an empty vector");
    Node n;
    n.op = Op::Mse;
    n.a = a;
    n.b = b;
    n.needs_grad = at(a).needs_grad || at(b).needs_grad;
    n.value = Eigen::VectorXd::Constant(1, (av - bv).squaredNorm() / static_cast<double>(av.size()));
    return push(std::move(n));
}

NodeId Tape::mse_const(NodeId a, double c) {
    const auto& av = at(a).value;
    if (av.size() == 0) throw ShapeError("mse of an empty vector");
    Node n;
    n.op = Op::MseConst;
    n.a = a;
    n.c0 = c;
    n.needs_grad = at(a).needs_grad;
    n.value = Eigen::VectorXd::Constant(1, (av.array() - c).square().sum() / static_cast<double>(av.size()));
    return push(std::move(n));
}

NodeId Tape::weighted_sum(NodeId a, double wa, NodeId b, double wb) {
    const auto& av = at(a).value;
    const auto& bv = at(b).value;
    require_same(av.size(), bv.size(), "weighted_sum");
    Node n;
    n.op = Op::WeightedSum;
    n.a = a;
    n.b = b;
    n.c0 = wa;
    n.c1 = wb;
    n.needs_grad = at(a).needs_grad || at(b).needs_grad;
    n.value = wa * av + wb * bv;
    return push(std::move(n));
}

NodeId Tape::conv_transpose(NodeId x, Parameter& kernel, Parameter& bias, const ConvShape& shape) {
    Node n;
    n.op = Op::ConvTranspose;
    n.a = x;
    n.p0 = &kernel;
    n.p1 = &bias;
    n.conv = shape;
    n.needs_grad = true;
    n.value = conv_transpose_forward(at(x).value, kernel.value, bias.value, shape);
    return push(std::move(n));
}

void Tape::accumulate(NodeId id, const Eigen::VectorXd& g) {
    Node& n = nodes_[id];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0)
        n.grad = g;
    else
        n.grad += g;
}

void Tape::backward(NodeId loss) {
    if (at(loss).value.size() != 1) throw ContractError("backward needs a scalar loss");
    for (auto& n : nodes_) n.grad.resize(0);
    nodes_[loss].grad = Eigen::VectorXd::Ones(1);

    for (NodeId id = loss + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (!n.needs_grad || n.grad.size() == 0) continue;
        const Eigen::VectorXd& g = n.grad;
        switch (n.op) {
        case Op::Constant:
            break;
        case Op::Dense: {
            const auto& xv = nodes_[n.a].value;
            n.p0->grad_matrix().noalias() += g * xv.transpose();
            n.p1->grad += g;
            if (nodes_[n.a].needs_grad) accumulate(n.a, n.p0->matrix().transpose() * g);
            break;
        }
        case Op::Elu: {
            const auto& xv = nodes_[n.a].value;
            Eigen::VectorXd d(g.size());
            for (Eigen::Index i = 0; i < g.size(); ++i) d[i] = xv[i] > 0.0 ? g[i] : g[i] * (n.value[i] + 1.0);
            accumulate(n.a, d);
            break;
        }
        case Op::Affine:
            accumulate(n.a, n.affine->apply_adjoint(g));
            break;
        case Op::Fermi:
            accumulate(n.a, g.cwiseProduct(n.aux));
            break;
        case Op::AddConstant:
            accumulate(n.a, g);
            break;
        case Op::Scale:
            accumulate(n.a, g * n.c0);
            break;
        case Op::Divide:
            accumulate(n.a, g / n.c0);
            break;
        case Op::Log10: {
            const auto& xv = nodes_[n.a].value;
            accumulate(n.a, (g.array() / (xv.array() * std::numbers::ln10)).matrix());
            break;
        }
        case Op::Gather: {
            Eigen::VectorXd d = Eigen::VectorXd::Zero(nodes_[n.a].value.size());
            for (std::size_t i = 0; i < n.indices.size(); ++i)
                d[static_cast<Eigen::Index>(n.indices[i])] += g[static_cast<Eigen::Index>(i)];
            accumulate(n.a, d);
            break;
        }
        case Op::Mse: {
            const auto& av = nodes_[n.a].value;
            const auto& bv = nodes_[n.b].value;
            const Eigen::VectorXd d = (2.0 * g[0] / static_cast<double>(av.size())) * (av - bv);
            accumulate(n.a, d);
            accumulate(n.b, -d);
            break;
        }
        case Op::MseConst: {
            const auto& av = nodes_[n.a].value;
            accumulate(n.a, ((2.0 * g[0] / static_cast<double>(av.size())) * (av.array() - n.c0)).matrix());
            break;
        }
        case Op::WeightedSum:
            accumulate(n.a, g * n.c0);
            accumulate(n.b, g * n.c1);
            break;
        case Op::ConvTranspose: {
            const ConvShape& s = n.conv;
            const Eigen::Index plane = s.height * s.width;
            const auto& xv = nodes_[n.a].value;
            const bool want_input = nodes_[n.a].needs_grad;
            Eigen::VectorXd dx = want_input ? Eigen::VectorXd::Zero(xv.size()) : Eigen::VectorXd();
            for (Eigen::Index co = 0; co < s.out_channels; ++co) n.p1->grad[co] += g.segment(co * plane, plane).sum();
            for (Eigen::Index ci = 0; ci < s.in_channels; ++ci) {
                const double* in = xv.data() + ci * plane;
                double* din = want_input ? dx.data() + ci * plane : nullptr;
                for (Eigen::Index co = 0; co < s.out_channels; ++co) {
                    const double* gout = g.data() + co * plane;
                    for (int ky = 0; ky < 3; ++ky) {
                        for (int kx = 0; kx < 3; ++kx) {
                            const Eigen::Index ki = kidx(s, ci, co, ky, kx);
                            const double k = n.p0->value[ki];
                            const Eigen::Index w0 = std::max<Eigen::Index>(0, 1 - kx);
                            const Eigen::Index w1 = std::min<Eigen::Index>(s.width, s.width + 1 - kx);
                            double dk = 0.0;
                            for (Eigen::Index h = std::max<Eigen::Index>(0, 1 - ky);
                                 h < std::min<Eigen::Index>(s.height, s.height + 1 - ky); ++h) {
                                const double* src = in + h * s.width;
                                const double* go = gout + (h + ky - 1) * s.width + (kx - 1);
                                for (Eigen::Index w = w0; w < w1; ++w) dk += go[w] * src[w];
                                if (din) {
                                    double* di = din + h * s.width;
                                    for (Eigen::Index w = w0; w < w1; ++w) di[w] += k * go[w];
                                }
                            }
                            n.p0->grad[ki] += dk;
                        }
                    }
                }
            }
            if (want_input) accumulate(n.a, dx);
            break;
        }
        }
    }
}

}  // namespace wirepinn
