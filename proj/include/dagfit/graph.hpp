#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dagfit/node.hpp"

namespace dagfit {

/// Directed acyclic graph of array transformations with shape propagation and
/// lazy, taint-driven evaluation.
///
/// Construction and parameter mutation are single-writer and must not overlap
/// with evaluation. Evaluation itself only requires that evalfuns are pure,
/// so independent ready nodes could be evaluated concurrently; this reference
/// implementation evaluates them sequentially in topological order.
class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    /// Create a node. Port counts are fixed for the node's lifetime.
    Node& add_node(std::string name, std::string kind, std::size_t n_inputs,
                   std::size_t n_outputs, TypeFun typefun, EvalFun evalfun);

    /// Connect an output to an unbound input. Rejects bindings that would
    /// create a cycle; subscribes the sink node to the source's taint flag
    /// and taints the sink's downstream cone.
    void bind(OutputPort& out, InputPort& in);

    /// Run every node's typefun in topological order and allocate output
    /// buffers. Idempotent: a re-run that infers identical types changes
    /// nothing. Errors name the offending node.
    void propagate_types();

    /// Type just the ancestor cone of one node (used during incremental
    /// model construction, before the final whole-graph propagation).
    void ensure_typed(Node& n);

    /// Lazy evaluation: if n is tainted, evaluate its tainted ancestors in
    /// topological order, then n, clearing flags; otherwise do nothing.
    void touch(Node& n);

    void freeze(Node& n);
    void unfreeze(Node& n);

    /// Deterministic topological order (ties broken by insertion index).
    std::vector<Node*> topological_order() const;

    std::size_t node_count() const { return nodes_.size(); }
    std::size_t edge_count() const { return edge_count_; }
    bool types_ready() const { return types_ready_; }

    /// Total number of evalfun executions since construction.
    std::uint64_t total_evaluations() const { return total_evaluations_; }

    std::vector<Node*> nodes();
    std::vector<const Node*> nodes() const;

    /// One line per node: name, kind, input bindings, output shapes, taint state.
    std::string dump() const;
    /// GraphViz export.
    std::string to_dot() const;

private:
    void evaluate_cone(Node& n);
    void run_evalfun(Node& n);
    void run_typefun(Node& n);
    bool reachable(const Node& from, const Node& target) const;

    std::vector<std::unique_ptr<Node>> nodes_;
    std::size_t edge_count_ = 0;
    std::uint64_t total_evaluations_ = 0;
    bool types_ready_ = false;
};

} // namespace dagfit
