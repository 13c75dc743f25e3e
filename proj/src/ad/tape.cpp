#include "debiaslab/ad/tape.hpp"

#include <algorithm>

#include "debiaslab/errors.hpp"

namespace debiaslab::ad {

const Tensor& Var::value() const { return tape->value(id); }

Var Tape::push(Node node) {
    nodes_.push_back(std::move(node));
    return Var{this, nodes_.size() - 1};
}

Var Tape::constant(Tensor value) {
    Node node;
    node.value = std::move(value);
    return push(std::move(node));
}

Var Tape::parameter(Tensor& param) {
    Node node;
    node.value = Tensor(param.shape(), param.data());
    node.bound = &param;
    node.needs_grad = true;
    return push(std::move(node));
}

Var Tape::variable(Tensor value) {
    Node node;
    node.value = std::move(value);
    node.needs_grad = true;
    return push(std::move(node));
}

Var Tape::record(Tensor value, std::vector<Var> inputs, BackwardFn rule) {
    Node node;
    node.value = std::move(value);
    node.inputs.reserve(inputs.size());
    for (const Var& in : inputs) {
        if (in.tape != this) throw ContractError("operands recorded on different tapes");
        node.inputs.push_back(in.id);
        node.needs_grad = node.needs_grad || nodes_[in.id].needs_grad;
    }
    node.rule = std::move(rule);
    if (!node.rule) node.needs_grad = false;
    return push(std::move(node));
}

void Tape::backward(Var loss) {
    if (loss.tape != this) throw ContractError("backward: loss belongs to another tape");
    Node& root = nodes_.at(loss.id);
    if (!root.value.is_scalar()) {
        throw ContractError("backward: loss must be scalar, got shape " + shape_to_string(root.value.shape()));
    }

    for (Node& n : nodes_) n.grad.clear();
    for (std::size_t i = 0; i <= loss.id; ++i) {
        if (nodes_[i].needs_grad) nodes_[i].grad.assign(nodes_[i].value.numel(), 0.0);
    }
    if (!root.needs_grad) return;
    root.grad[0] = 1.0;

    for (std::size_t id = loss.id + 1; id-- > 0;) {
        Node& node = nodes_[id];
        if (!node.needs_grad || !node.rule) continue;
        BackwardArgs args{node.value, node.grad, {}, {}};
        args.inputs.reserve(node.inputs.size());
        args.input_grads.reserve(node.inputs.size());
        for (std::size_t in : node.inputs) {
            args.inputs.push_back(&nodes_[in].value);
            args.input_grads.push_back(nodes_[in].needs_grad ? std::span<double>(nodes_[in].grad)
                                                             : std::span<double>());
        }
        node.rule(args);
    }

    for (std::size_t i = 0; i <= loss.id; ++i) {
        Node& n = nodes_[i];
        if (n.bound == nullptr) continue;
        auto dst = n.bound->grad();
        if (dst.size() != n.grad.size()) {
            throw DimensionError("bound parameter changed shape since it was recorded");
        }
        std::transform(dst.begin(), dst.end(), n.grad.begin(), dst.begin(), std::plus<>());
    }
}

std::span<const double> Tape::grad(Var v) const { return nodes_.at(v.id).grad; }

}  // namespace debiaslab::ad
