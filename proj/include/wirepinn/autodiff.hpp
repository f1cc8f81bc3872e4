#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wirepinn/fermi.hpp"
#include "wirepinn/linear_map.hpp"
#include "wirepinn/mesh.hpp"

namespace wirepinn {

/// Trainable tensor stored flat; matrices are column-major (rows x cols).
struct Parameter {
    std::string name;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    Eigen::VectorXd value;
    Eigen::VectorXd grad;

    Parameter() = default;
    Parameter(std::string name_, Eigen::Index rows_, Eigen::Index cols_)
        : name(std::move(name_)), rows(rows_), cols(cols_),
          value(Eigen::VectorXd::Zero(rows_ * cols_)), grad(Eigen::VectorXd::Zero(rows_ * cols_)) {}

    Eigen::Map<const Eigen::MatrixXd> matrix() const { return {value.data(), rows, cols}; }
    Eigen::Map<Eigen::MatrixXd> grad_matrix() { return {grad.data(), rows, cols}; }
    void zero_grad() { grad.setZero(); }
};

/// Elementwise phi -> n [cm^-3] with n = 0 on non-silicon nodes.
struct FermiClosure {
    SemiconductorParams params;
    std::vector<std::uint8_t> silicon;  ///< 1 where the node is semiconductor

    FermiClosure(const SemiconductorParams& p, const TensorMesh& mesh);
    FermiClosure(const SemiconductorParams& p, std::vector<std::uint8_t> mask)
        : params(p), silicon(std::move(mask)) {}
};

/// Shape of a transposed convolution: 3x3 kernel, stride 1, zero padding 1.
struct ConvShape {
    Eigen::Index in_channels = 1;
    Eigen::Index out_channels = 1;
    Eigen::Index height = 1;  ///< slow axis
    Eigen::Index width = 1;   ///< fast axis
};

using NodeId = std::size_t;

/// Reverse-mode tape over column vectors. A tape is rebuilt for every
/// forward pass; parameters referenced by it must outlive it.
class Tape {
public:
    enum class Op : std::uint8_t {
        Constant,
        Dense,
        Elu,
        Affine,
        Fermi,
        AddConstant,
        Scale,
        Divide,
        Log10,
        Gather,
        Mse,
        MseConst,
        WeightedSum,
        ConvTranspose,
    };

    NodeId constant(Eigen::VectorXd value);
    /// W x + b with W of shape (out, in).
    NodeId dense(NodeId x, Parameter& weight, Parameter& bias);
    NodeId elu(NodeId x);
    NodeId affine(NodeId x, const AffineOperator& op);
    NodeId fermi(NodeId phi, const FermiClosure& closure);
    NodeId add_constant(NodeId x, double c);
    NodeId scale(NodeId x, double s);
    /// x / d, correctly rounded (bit-identical to plain division).
    NodeId divide(NodeId x, double d);
    NodeId log10(NodeId x);
    NodeId gather(NodeId x, std::span<const std::size_t> indices);
    /// mean((a - b)^2), scalar.
    NodeId mse(NodeId a, NodeId b);
    /// mean((a - c)^2), scalar.
    NodeId mse_const(NodeId a, double c);
    /// wa * a + wb * b.
    NodeId weighted_sum(NodeId a, double wa, NodeId b, double wb);
    /// Kernel shape (in, out, 3, 3) flattened in that order; bias per output channel.
    NodeId conv_transpose(NodeId x, Parameter& kernel, Parameter& bias, const ConvShape& shape);

    const Eigen::VectorXd& value(NodeId id) const;
    /// Gradient of the last backward() target wrt this node (empty if unreachable).
    const Eigen::VectorXd& grad(NodeId id) const;
    Op op(NodeId id) const;
    std::size_t size() const noexcept { return nodes_.size(); }

    /// Accumulates d(loss)/d(parameter) into every referenced Parameter::grad.
    /// Throws ContractError unless `loss` is a scalar node.
    void backward(NodeId loss);
    void clear() { nodes_.clear(); }

private:
    struct Node {
        Op op = Op::Constant;
        NodeId a = 0, b = 0;
        bool needs_grad = false;
        double c0 = 0.0, c1 = 0.0;
        Parameter* p0 = nullptr;
        Parameter* p1 = nullptr;
        const AffineOperator* affine = nullptr;
        const FermiClosure* fermi = nullptr;
        std::span<const std::size_t> indices;
        ConvShape conv;
        Eigen::VectorXd value, grad, aux;
    };

    NodeId push(Node node);
    const Node& at(NodeId id) const;
    void accumulate(NodeId id, const Eigen::VectorXd& g);

    std::vector<Node> nodes_;
};

/// Forward transposed convolution on raw buffers (exposed for testing).
Eigen::VectorXd conv_transpose_forward(const Eigen::VectorXd& x, const Eigen::VectorXd& kernel,
                                       const Eigen::VectorXd& bias, const ConvShape& shape);

}  // namespace wirepinn
