#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "debiaslab/ad/tensor.hpp"

namespace debiaslab::ad {

class Tape;

/// Handle to a node recorded on a Tape.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    double item() const { return value().item(); }
};

/// Arguments handed to a backward rule.
///
/// `input_grads[i]` is empty when input i does not need a gradient; rules must
/// accumulate (+=) into the non-empty ones.
struct BackwardArgs {
    const Tensor& output;
    std::span<const double> output_grad;
    std::vector<const Tensor*> inputs;
    std::vector<std::span<double>> input_grads;
};

using BackwardFn = std::function<void(const BackwardArgs&)>;

/// Linear record of operations for reverse-mode differentiation.
///
/// Nodes are appended in execution order, so inputs always precede outputs.
/// A tape is confined to one thread.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Leaf that never receives a gradient.
    Var constant(Tensor value);

    /// Leaf bound to an external tensor. backward() adds dLoss/dparam into
    /// `param.grad()`; the tensor must outlive the tape.
    Var parameter(Tensor& param);

    /// Leaf that receives a gradient readable through grad(), without an
    /// external binding.
    Var variable(Tensor value);

    /// Appends an operation. `rule` may be empty for ops with no differentiable
    /// inputs.
    Var record(Tensor value, std::vector<Var> inputs, BackwardFn rule);

    const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
    bool needs_grad(Var v) const { return nodes_.at(v.id).needs_grad; }

    /// Reverse sweep from a scalar loss. Intermediate gradients are reset on
    /// every call; bound parameter gradients accumulate across calls.
    void backward(Var loss);

    /// Gradient of the last backward() loss w.r.t. `v` (empty if not needed).
    std::span<const double> grad(Var v) const;

    std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        std::vector<std::size_t> inputs;
        BackwardFn rule;
        std::vector<double> grad;
        Tensor* bound = nullptr;
        bool needs_grad = false;
    };

    Var push(Node node);

    std::vector<Node> nodes_;
};

}  // namespace debiaslab::ad
