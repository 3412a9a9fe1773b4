#pragma once

#include <map>
#include <string>
#include <vector>

#include "dagfit/expr.hpp"
#include "dagfit/graph.hpp"
#include "dagfit/parameters.hpp"

namespace dagfit {

/// Name -> graph surface map shared by bundles and the expression builder.
/// An entry is an output (optionally callable, with an ordered list of open
/// inputs bound by call syntax), a parameter, or a bare open input.
class NameRegistry {
public:
    struct Entry {
        OutputPort* output = nullptr;
        Parameter* param = nullptr;
        InputPort* input = nullptr;
        std::vector<InputPort*> call_args;
    };

    void add_output(const std::string& name, OutputPort& out);
    void add_callable(const std::string& name, OutputPort& out,
                      std::vector<InputPort*> call_args);
    void add_param(const std::string& name, Parameter& p);
    void add_input(const std::string& name, InputPort& in);

    bool contains(const std::string& name) const { return entries_.count(name) > 0; }
    const Entry& at(const std::string& name) const; // UnknownName

    std::vector<std::string> keys() const;

private:
    void insert(const std::string& name, Entry e);
    std::map<std::string, Entry> entries_;
};

/// Compiles index-free expression ASTs into graph nodes against a registry.
/// Identical canonical subtrees are built once and reused (CSE), so repeated
/// references share one upstream subgraph. Names resolve against the name
/// registry first, then fall back to the parameter registry, so a bundle may
/// provide an output and define a parameter under the same key.
class ExpressionBuilder {
public:
    ExpressionBuilder(Graph& g, NameRegistry& names, ParameterRegistry* params = nullptr)
        : graph_(&g), names_(&names), params_(params) {}

    OutputPort& build(const expr::ExprPtr& e);

private:
    OutputPort& build_impl(const expr::ExprPtr& e);
    OutputPort& build_weight(const std::vector<expr::ExprPtr>& scalar_factors);
    bool is_scalar(OutputPort& port);
    std::string fresh(const std::string& stem);

    Graph* graph_;
    NameRegistry* names_;
    ParameterRegistry* params_;
    std::map<std::string, OutputPort*> cache_;
    std::size_t counter_ = 0;
};

} // namespace dagfit
