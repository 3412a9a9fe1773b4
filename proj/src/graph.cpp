#include "dagfit/graph.hpp"

#include <algorithm>
#include <queue>
#include <sstream>
#include <unordered_set>

namespace dagfit {

Node::Node(std::string name, std::string kind, std::size_t n_in, std::size_t n_out,
           TypeFun typefun, EvalFun evalfun, std::size_t order_index)
    : name_(std::move(name)),
      kind_(std::move(kind)),
      inputs_(n_in),
      outputs_(n_out),
      typefun_(std::move(typefun)),
      evalfun_(std::move(evalfun)),
      order_index_(order_index) {
    for (std::size_t i = 0; i < n_in; ++i) {
        inputs_[i].node_ = this;
        inputs_[i].index_ = i;
    }
    for (std::size_t i = 0; i < n_out; ++i) {
        outputs_[i].node_ = this;
        outputs_[i].index_ = i;
    }
}

std::vector<DataType> input_dtypes(const Node& n) {
    std::vector<DataType> dts;
    dts.reserve(n.num_inputs());
    for (std::size_t i = 0; i < n.num_inputs(); ++i)
        dts.push_back(n.input_dtype(i));
    return dts;
}

Node& Graph::add_node(std::string name, std::string kind, std::size_t n_inputs,
                      std::size_t n_outputs, TypeFun typefun, EvalFun evalfun) {
    nodes_.push_back(std::unique_ptr<Node>(new Node(std::move(name), std::move(kind), n_inputs,
                                                    n_outputs, std::move(typefun),
                                                    std::move(evalfun), nodes_.size())));
    return *nodes_.back();
}

bool Graph::reachable(const Node& from, const Node& target) const {
    if (&from == &target) return true;
    std::vector<const Node*> stack{&from};
    std::unordered_set<const Node*> seen{&from};
    while (!stack.empty()) {
        const Node* cur = stack.back();
        stack.pop_back();
        for (std::size_t o = 0; o < cur->num_outputs(); ++o) {
            for (const InputPort* sink : cur->out(o).sinks()) {
                const Node* next = &sink->node();
                if (next == &target) return true;
                if (seen.insert(next).second) stack.push_back(next);
            }
        }
    }
    return false;
}

void Graph::bind(OutputPort& out, InputPort& in) {
    if (in.bound())
        throw AlreadyBound("input " + std::to_string(in.index()) + " of node '" +
                           in.node().name() + "' already has a source");
    if (reachable(in.node(), out.node()))
        throw CycleError("binding " + out.node().name() + " -> " + in.node().name() +
                         " would create a cycle");
    in.source_ = &out;
    out.sinks_.push_back(&in);
    ++edge_count_;
    out.node().taint_flag().subscribe(&in.node().taint_flag());
    in.node().taint_flag().taint();
}

void Graph::run_typefun(Node& n) {
    for (std::size_t i = 0; i < n.num_inputs(); ++i)
        if (!n.in(i).bound())
            throw UnboundInput("node '" + n.name() + "' input " + std::to_string(i) +
                               " is unbound");
    std::vector<DataType> out_types;
    try {
        out_types = n.typefun_(n);
    } catch (TypeMismatch& e) {
        throw TypeMismatch("node '" + n.name() + "': " + e.what());
    }
    if (out_types.size() != n.num_outputs())
        throw TypeMismatch("node '" + n.name() + "': typefun produced " +
                           std::to_string(out_types.size()) + " types for " +
                           std::to_string(n.num_outputs()) + " outputs");
    for (std::size_t o = 0; o < n.num_outputs(); ++o) {
        out_types[o].validate();
        DataBuffer& buf = n.outputs_[o].buffer_;
        if (!(buf.dtype == out_types[o]) || buf.values.size() != out_types[o].size()) {
            buf.allocate(out_types[o]);
            n.taint_.taint();
        }
    }
    n.typed_ = true;
}

void Graph::propagate_types() {
    for (Node* n : topological_order())
        run_typefun(*n);
    types_ready_ = true;
}

void Graph::ensure_typed(Node& n) {
    if (n.typed()) return;
    for (std::size_t i = 0; i < n.num_inputs(); ++i) {
        if (!n.in(i).bound())
            throw UnboundInput("node '" + n.name() + "' input " + std::to_string(i) +
                               " is unbound");
        ensure_typed(n.in(i).source().node());
    }
    run_typefun(n);
}

void Graph::run_evalfun(Node& n) {
    try {
        n.evalfun_(n);
    } catch (std::exception& e) {
        throw EvalError("node '" + n.name() + "': " + e.what());
    }
    for (std::size_t o = 0; o < n.num_outputs(); ++o) {
        const DataBuffer& buf = n.outputs_[o].buffer_;
        if (buf.values.size() != buf.dtype.size())
            throw EvalError("node '" + n.name() + "': evalfun resized output " +
                            std::to_string(o) + " outside its declared shape");
    }
    n.taint_.clear();
    ++n.eval_count_;
    ++total_evaluations_;
}

void Graph::evaluate_cone(Node& root) {
    // Iterative post-order over tainted ancestors; the taint flag itself
    // memoizes completed work.
    std::vector<std::pair<Node*, bool>> stack;
    stack.emplace_back(&root, false);
    while (!stack.empty()) {
        auto& [cur, expanded] = stack.back();
        if (expanded) {
            stack.pop_back();
            if (cur->tainted()) run_evalfun(*cur);
            continue;
        }
        expanded = true;
        Node* node = cur;
        for (std::size_t i = 0; i < node->num_inputs(); ++i) {
            Node& src = node->in(i).source().node();
            if (src.tainted()) stack.emplace_back(&src, false);
        }
    }
}

void Graph::touch(Node& n) {
    if (!types_ready_)
        throw UnboundInput("touch before type propagation (call propagate_types first)");
    if (!n.tainted()) return;
    evaluate_cone(n);
}

void Graph::freeze(Node& n) {
    n.taint_flag().freeze();
}

void Graph::unfreeze(Node& n) {
    n.taint_flag().unfreeze();
}

std::vector<Node*> Graph::topological_order() const {
    std::vector<std::size_t> indegree(nodes_.size(), 0);
    for (const auto& n : nodes_)
        for (std::size_t i = 0; i < n->num_inputs(); ++i)
            if (n->in(i).bound()) ++indegree[n->order_index()];

    std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
    for (const auto& n : nodes_)
        if (indegree[n->order_index()] == 0) ready.push(n->order_index());

    std::vector<Node*> order;
    order.reserve(nodes_.size());
    while (!ready.empty()) {
        std::size_t idx = ready.top();
        ready.pop();
        Node* n = nodes_[idx].get();
        order.push_back(n);
        for (std::size_t o = 0; o < n->num_outputs(); ++o)
            for (InputPort* sink : n->out(o).sinks())
                if (--indegree[sink->node().order_index()] == 0)
                    ready.push(sink->node().order_index());
    }
    if (order.size() != nodes_.size())
        throw CycleError("graph contains a cycle");
    return order;
}

std::vector<Node*> Graph::nodes() {
    std::vector<Node*> out;
    out.reserve(nodes_.size());
    for (auto& n : nodes_) out.push_back(n.get());
    return out;
}

std::vector<const Node*> Graph::nodes() const {
    std::vector<const Node*> out;
    out.reserve(nodes_.size());
    for (const auto& n : nodes_) out.push_back(n.get());
    return out;
}

std::string Graph::dump() const {
    std::ostringstream os;
    for (const auto& n : nodes_) {
        os << n->name() << " | " << n->kind() << " | in:";
        for (std::size_t i = 0; i < n->num_inputs(); ++i) {
            os << ' ';
            if (n->in(i).bound())
                os << n->in(i).source().node().name() << '.' << n->in(i).source().index();
            else
                os << "<unbound>";
        }
        os << " | out:";
        for (std::size_t o = 0; o < n->num_outputs(); ++o)
            os << ' ' << (n->typed() ? n->out(o).dtype().to_string() : std::string("<untyped>"));
        os << " | " << (n->taint_flag().frozen() ? "frozen" : n->tainted() ? "tainted" : "clean")
           << '\n';
    }
    return os.str();
}

std::string Graph::to_dot() const {
    std::ostringstream os;
    os << "digraph dagfit {\n  rankdir=LR;\n  node [shape=box, fontsize=10];\n";
    for (const auto& n : nodes_) {
        os << "  n" << n->order_index() << " [label=\"" << n->name() << "\\n" << n->kind();
        if (n->typed() && n->num_outputs() > 0) os << "\\n" << n->out(0).dtype().to_string();
        os << "\"];\n";
    }
    for (const auto& n : nodes_)
        for (std::size_t i = 0; i < n->num_inputs(); ++i)
            if (n->in(i).bound())
                os << "  n" << n->in(i).source().node().order_index() << " -> n"
                   << n->order_index() << ";\n";
    os << "}\n";
    return os.str();
}

} // namespace dagfit
