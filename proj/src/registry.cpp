#include "dagfit/registry.hpp"

#include <algorithm>

#include "dagfit/transforms.hpp"

namespace dagfit {

void NameRegistry::insert(const std::string& name, Entry e) {
    if (entries_.count(name)) throw DuplicateName("registry name '" + name + "' already taken");
    entries_.emplace(name, std::move(e));
}

void NameRegistry::add_output(const std::string& name, OutputPort& out) {
    Entry e;
    e.output = &out;
    insert(name, std::move(e));
}

void NameRegistry::add_callable(const std::string& name, OutputPort& out,
                                std::vector<InputPort*> call_args) {
    Entry e;
    e.output = &out;
    e.call_args = std::move(call_args);
    insert(name, std::move(e));
}

void NameRegistry::add_param(const std::string& name, Parameter& p) {
    Entry e;
    e.param = &p;
    insert(name, std::move(e));
}

void NameRegistry::add_input(const std::string& name, InputPort& in) {
    Entry e;
    e.input = &in;
    insert(name, std::move(e));
}

const NameRegistry::Entry& NameRegistry::at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw UnknownName("unknown name '" + name + "'");
    return it->second;
}

std::vector<std::string> NameRegistry::keys() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [k, v] : entries_) out.push_back(k);
    return out;
}

// ---------------------------------------------------------------------------

namespace {

using expr::Expr;
using expr::ExprPtr;

} // namespace

std::string ExpressionBuilder::fresh(const std::string& stem) {
    return stem + "#" + std::to_string(counter_++);
}

bool ExpressionBuilder::is_scalar(OutputPort& port) {
    graph_->ensure_typed(port.node());
    return port.dtype().is_scalar();
}

OutputPort& ExpressionBuilder::build(const ExprPtr& e) { return build_impl(e); }

OutputPort& ExpressionBuilder::build_weight(const std::vector<ExprPtr>& scalar_factors) {
    if (scalar_factors.size() == 1) return build_impl(scalar_factors[0]);
    return build_impl(Expr::make_mul(scalar_factors));
}

OutputPort& ExpressionBuilder::build_impl(const ExprPtr& e) {
    const std::string key = expr::pretty_print(e);
    if (auto it = cache_.find(key); it != cache_.end()) return *it->second;

    OutputPort* result = nullptr;
    switch (e->kind) {
    case Expr::Kind::Name: {
        if (!e->indices.empty())
            throw UnboundIndex("name '" + e->name + "' still carries indices; expand first");
        if (names_->contains(e->name)) {
            const NameRegistry::Entry& entry = names_->at(e->name);
            if (entry.param)
                result = &entry.param->output();
            else if (entry.output)
                result = entry.output;
            else
                throw UnknownName("'" + e->name + "' is an open input, not a value");
        } else if (params_ && params_->contains(e->name)) {
            result = &params_->at(e->name).output();
        } else {
            throw UnknownName("unknown name '" + e->name + "'");
        }
        break;
    }
    case Expr::Kind::Number: {
        Node& node = transforms::make_constant(*graph_, key, std::vector<double>{e->number});
        result = &node.out(0);
        break;
    }
    case Expr::Kind::Call: {
        if (e->callee->kind != Expr::Kind::Name)
            throw ParseError("call target must be a name");
        const NameRegistry::Entry& entry = names_->at(e->callee->name);
        if (!entry.output)
            throw UnknownName("'" + e->callee->name + "' is not callable");
        if (e->operands.size() != entry.call_args.size())
            throw TypeMismatch("'" + e->callee->name + "' expects " +
                               std::to_string(entry.call_args.size()) + " argument(s), got " +
                               std::to_string(e->operands.size()));
        for (std::size_t i = 0; i < e->operands.size(); ++i) {
            OutputPort& arg = build_impl(e->operands[i]);
            graph_->bind(arg, *entry.call_args[i]);
        }
        result = entry.output;
        break;
    }
    case Expr::Kind::Add: {
        // weighted-sum fusion: every term is scalar factors times one array
        struct Term {
            std::vector<ExprPtr> scalars;
            OutputPort* array = nullptr;
        };
        std::vector<Term> terms;
        bool fuse = true;
        for (const auto& term_ast : e->operands) {
            Term term;
            const auto& factors = term_ast->kind == Expr::Kind::Mul
                                      ? term_ast->operands
                                      : std::vector<ExprPtr>{term_ast};
            for (const auto& f : factors) {
                OutputPort& port = build_impl(f);
                if (is_scalar(port))
                    term.scalars.push_back(f);
                else if (term.array == nullptr)
                    term.array = &port;
                else
                    fuse = false;
            }
            if (term.array == nullptr || term.scalars.empty()) fuse = false;
            terms.push_back(std::move(term));
            if (!fuse) break;
        }

        if (fuse) {
            Node& ws = transforms::make_weighted_sum(*graph_, fresh("wsum"), terms.size());
            for (std::size_t k = 0; k < terms.size(); ++k) {
                graph_->bind(*terms[k].array, ws.in(k));
                graph_->bind(build_weight(terms[k].scalars), ws.in(terms.size() + k));
            }
            result = &ws.out(0);
        } else {
            Node& sum = transforms::make_sum(*graph_, fresh("sum"), e->operands.size());
            for (std::size_t k = 0; k < e->operands.size(); ++k)
                graph_->bind(build_impl(e->operands[k]), sum.in(k));
            result = &sum.out(0);
        }
        break;
    }
    case Expr::Kind::Mul: {
        std::vector<ExprPtr> scalars;
        std::vector<OutputPort*> arrays;
        for (const auto& f : e->operands) {
            OutputPort& port = build_impl(f);
            if (is_scalar(port))
                scalars.push_back(f);
            else
                arrays.push_back(&port);
        }

        if (arrays.empty()) {
            if (scalars.size() == 1) {
                result = &build_impl(scalars[0]);
            } else {
                Node& prod = transforms::make_product(*graph_, fresh("prod"), scalars.size());
                for (std::size_t k = 0; k < scalars.size(); ++k)
                    graph_->bind(build_impl(scalars[k]), prod.in(k));
                result = &prod.out(0);
            }
            break;
        }

        // fold the array factors left to right
        OutputPort* cur = arrays[0];
        for (std::size_t k = 1; k < arrays.size(); ++k) {
            OutputPort* next = arrays[k];
            graph_->ensure_typed(cur->node());
            if (cur->dtype().rank() == 2) {
                Node& mp = transforms::make_matrix_product(*graph_, fresh("matmul"));
                graph_->bind(*cur, mp.in(0));
                graph_->bind(*next, mp.in(1));
                cur = &mp.out(0);
            } else if (next->dtype().rank() == 2) {
                throw TypeMismatch("cannot multiply a vector by a matrix from the left");
            } else {
                Node& prod = transforms::make_product(*graph_, fresh("prod"), 2);
                graph_->bind(*cur, prod.in(0));
                graph_->bind(*next, prod.in(1));
                cur = &prod.out(0);
            }
        }

        if (!scalars.empty()) {
            Node& ws = transforms::make_weighted_sum(*graph_, fresh("scale"), 1);
            graph_->bind(*cur, ws.in(0));
            graph_->bind(build_weight(scalars), ws.in(1));
            cur = &ws.out(0);
        }
        result = cur;
        break;
    }
    case Expr::Kind::SumReduce:
        throw UnboundIndex("sum over '" + e->name + "' must be expanded before building");
    }

    cache_[key] = result;
    return *result;
}

} // namespace dagfit
