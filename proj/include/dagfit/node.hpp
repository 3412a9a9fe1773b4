#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dagfit/datatype.hpp"
#include "dagfit/taint.hpp"

namespace dagfit {

class Node;
class Graph;

/// Output slot of a node. Owns the data buffer; may feed any number of inputs.
class OutputPort {
public:
    Node& node() { return *node_; }
    const Node& node() const { return *node_; }
    std::size_t index() const { return index_; }

    const DataType& dtype() const { return buffer_.dtype; }
    DataBuffer& data() { return buffer_; }
    const DataBuffer& data() const { return buffer_; }

    const std::vector<class InputPort*>& sinks() const { return sinks_; }

private:
    friend class Node;
    friend class Graph;
    Node* node_ = nullptr;
    std::size_t index_ = 0;
    DataBuffer buffer_;
    std::vector<class InputPort*> sinks_;
};

/// Input slot of a node; bound to exactly one upstream output.
class InputPort {
public:
    Node& node() { return *node_; }
    const Node& node() const { return *node_; }
    std::size_t index() const { return index_; }

    bool bound() const { return source_ != nullptr; }
    OutputPort& source() { return *source_; }
    const OutputPort& source() const { return *source_; }

private:
    friend class Node;
    friend class Graph;
    Node* node_ = nullptr;
    std::size_t index_ = 0;
    OutputPort* source_ = nullptr;
};

/// Shape-inference rule: maps bound input types to output types.
using TypeFun = std::function<std::vector<DataType>(const Node&)>;

/// Pure evaluation: reads bound input buffers, writes own output buffers.
/// Must not touch any other shared mutable state (parallel-evaluation contract);
/// variable/constant source nodes that read their captured cell are the one
/// sanctioned exception, with taint flags as the synchronization point.
using EvalFun = std::function<void(Node&)>;

class Node {
public:
    const std::string& name() const { return name_; }
    const std::string& kind() const { return kind_; }

    std::size_t num_inputs() const { return inputs_.size(); }
    std::size_t num_outputs() const { return outputs_.size(); }

    InputPort& in(std::size_t i) { return inputs_[i]; }
    const InputPort& in(std::size_t i) const { return inputs_[i]; }
    OutputPort& out(std::size_t i = 0) { return outputs_[i]; }
    const OutputPort& out(std::size_t i = 0) const { return outputs_[i]; }

    /// Buffer of the output bound to input i. Input must be bound.
    const DataBuffer& input_data(std::size_t i) const { return inputs_[i].source().data(); }
    const DataType& input_dtype(std::size_t i) const { return inputs_[i].source().dtype(); }
    DataBuffer& output_data(std::size_t i = 0) { return outputs_[i].buffer_; }

    TaintFlag& taint_flag() { return taint_; }
    const TaintFlag& taint_flag() const { return taint_; }
    bool tainted() const { return taint_.tainted(); }

    std::uint64_t eval_count() const { return eval_count_; }

    /// Insertion index within the graph; breaks topological-order ties.
    std::size_t order_index() const { return order_index_; }

    bool typed() const { return typed_; }

private:
    friend class Graph;
    Node(std::string name, std::string kind, std::size_t n_in, std::size_t n_out,
         TypeFun typefun, EvalFun evalfun, std::size_t order_index);

    std::string name_;
    std::string kind_;
    std::vector<InputPort> inputs_;
    std::vector<OutputPort> outputs_;
    TypeFun typefun_;
    EvalFun evalfun_;
    TaintFlag taint_;
    std::uint64_t eval_count_ = 0;
    std::size_t order_index_ = 0;
    bool typed_ = false;
};

/// Input DataTypes of a node, in port order (all inputs must be bound).
std::vector<DataType> input_dtypes(const Node& n);

} // namespace dagfit
