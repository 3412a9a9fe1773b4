#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <vector>

#include "dagfit/graph.hpp"
#include "dagfit/parameters.hpp"
#include "dagfit/rng.hpp"
#include "dagfit/transforms.hpp"

namespace testutil {

using namespace dagfit;

/// Deterministic randomized model: a layered DAG of sum/product/weighted
/// nodes over rank-1 buffers, driven by a few parameters. Structure and
/// constants depend only on the seed, so an instance can be rebuilt from
/// scratch for oracle-equivalence checks.
struct RandomModel {
    Graph graph;
    ParameterRegistry params{graph};
    std::vector<Node*> nodes; // interior nodes in creation order
    Node* sink = nullptr;

    static constexpr std::size_t kLen = 4;

    explicit RandomModel(std::uint64_t seed, std::size_t n_params = 3,
                         std::size_t n_nodes = 12) {
        Rng rng(seed);
        std::vector<OutputPort*> pool;

        for (std::size_t i = 0; i < n_params; ++i) {
            Parameter& p = params.define("p" + std::to_string(i), rng.uniform(0.5, 2.0), 1.0);
            // parameters influence the arrays through single-term weighted sums
            std::vector<double> base(kLen);
            for (double& v : base) v = rng.uniform(-1.0, 1.0);
            Node& c = transforms::make_constant(graph, "c" + std::to_string(i), base);
            Node& w = transforms::make_weighted_sum(graph, "pw" + std::to_string(i), 1);
            graph.bind(c.out(0), w.in(0));
            graph.bind(p.output(), w.in(1));
            pool.push_back(&w.out(0));
            nodes.push_back(&w);
        }
        for (std::size_t i = 0; i < 2; ++i) {
            std::vector<double> base(kLen);
            for (double& v : base) v = rng.uniform(-1.0, 1.0);
            Node& c = transforms::make_constant(graph, "k" + std::to_string(i), base);
            pool.push_back(&c.out(0));
        }

        for (std::size_t i = 0; i < n_nodes; ++i) {
            const std::size_t arity = 1 + rng.next_u64() % 3;
            const bool product = rng.uniform() < 0.3;
            Node& n = product ? transforms::make_product(graph, "n" + std::to_string(i), arity)
                              : transforms::make_sum(graph, "n" + std::to_string(i), arity);
            for (std::size_t a = 0; a < arity; ++a)
                graph.bind(*pool[rng.next_u64() % pool.size()], n.in(a));
            pool.push_back(&n.out(0));
            nodes.push_back(&n);
        }

        Node& s = transforms::make_sum(graph, "sink", pool.size());
        for (std::size_t a = 0; a < pool.size(); ++a) graph.bind(*pool[a], s.in(a));
        sink = &s;
        nodes.push_back(&s);
        graph.propagate_types();
    }
};

/// Edge list reconstructed from the ports (independent of Graph internals).
inline std::vector<std::pair<const Node*, const Node*>> edges_of(Graph& g) {
    std::vector<std::pair<const Node*, const Node*>> edges;
    for (Node* n : g.nodes())
        for (std::size_t i = 0; i < n->num_inputs(); ++i)
            if (n->in(i).bound()) edges.emplace_back(&n->in(i).source().node(), n);
    return edges;
}

/// Transitive closure helpers used as oracles for taint-minimality checks.
inline std::set<const Node*> descendants_of(Graph& g, const Node* start) {
    auto edges = edges_of(g);
    std::set<const Node*> out{start};
    bool grew = true;
    while (grew) {
        grew = false;
        for (auto [from, to] : edges)
            if (out.count(from) && !out.count(to)) {
                out.insert(to);
                grew = true;
            }
    }
    return out;
}

inline std::set<const Node*> ancestors_of(Graph& g, const Node* start) {
    auto edges = edges_of(g);
    std::set<const Node*> out{start};
    bool grew = true;
    while (grew) {
        grew = false;
        for (auto [from, to] : edges)
            if (out.count(to) && !out.count(from)) {
                out.insert(from);
                grew = true;
            }
    }
    return out;
}

/// Independent cycle detector (color DFS over the reconstructed edge list).
inline bool has_cycle(Graph& g) {
    auto nodes = g.nodes();
    std::map<const Node*, int> color; // 0 white, 1 grey, 2 black
    std::function<bool(const Node*)> visit = [&](const Node* n) {
        color[n] = 1;
        for (std::size_t o = 0; o < n->num_outputs(); ++o)
            for (const InputPort* sink : n->out(o).sinks()) {
                const Node* next = &sink->node();
                if (color[next] == 1) return true;
                if (color[next] == 0 && visit(next)) return true;
            }
        color[n] = 2;
        return false;
    };
    for (const Node* n : nodes)
        if (color[n] == 0 && visit(n)) return true;
    return false;
}

} // namespace testutil
