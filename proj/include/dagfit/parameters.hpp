#pragma once

#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dagfit/graph.hpp"
#include "dagfit/linalg.hpp"

namespace dagfit {

class ParameterRegistry;

/// Named scalar with a central value, uncertainty and optional bounds.
/// Enters the graph as a single-element variable node; changing the value
/// taints that node, which is what drives incremental re-evaluation.
/// sigma == 0 marks the parameter fixed (excluded from fits and covariance).
class Parameter {
public:
    const std::string& name() const { return name_; }
    double value() const { return value_; }
    double central() const { return central_; }
    double sigma() const { return sigma_; }
    bool fixed() const { return sigma_ == 0.0; }
    bool constrained() const { return constrained_; }
    const std::optional<std::pair<double, double>>& bounds() const { return bounds_; }

    /// Bounds-checked set; taints dependents only on a real change.
    void set_value(double v);
    /// value = central + t * sigma. Throws FixedParameter when sigma == 0.
    void set_normalized(double t);
    /// Unchecked set for fitter/derivative probing; still taints on change.
    void set_value_raw(double v);

    // registry-time tuning (single-writer, not evaluation-safe)
    void set_central(double c);
    void set_sigma(double s);
    void set_constrained(bool c) { constrained_ = c; }
    void set_bounds(std::optional<std::pair<double, double>> b);

    Node& node() { return *node_; }
    OutputPort& output() { return node_->out(0); }

private:
    friend class ParameterRegistry;
    Parameter() = default;

    std::string name_;
    double value_ = 0.0;
    double central_ = 0.0;
    double sigma_ = 0.0;
    std::optional<std::pair<double, double>> bounds_;
    bool constrained_ = false;
    Node* node_ = nullptr;
};

/// Ordered parameter set with a correlation matrix (unit diagonal, entries in
/// [-1,1], positive semi-definite).
struct ParameterGroup {
    std::vector<std::string> members;
    Matrix correlation;

    /// Throws NotPSD on a malformed or indefinite correlation matrix.
    void validate() const;
};

using ParameterSnapshot = std::map<std::string, double>;

struct ParameterOptions {
    std::optional<std::pair<double, double>> bounds;
    bool constrained = false;
};

class ParameterRegistry {
public:
    explicit ParameterRegistry(Graph& graph) : graph_(&graph) {}
    ParameterRegistry(const ParameterRegistry&) = delete;
    ParameterRegistry& operator=(const ParameterRegistry&) = delete;

    /// Create a parameter (value = central) and its graph variable node.
    Parameter& define(const std::string& name, double central, double sigma,
                      ParameterOptions opts = {});

    bool contains(const std::string& name) const { return index_.count(name) > 0; }
    Parameter& at(const std::string& name);
    const Parameter& at(const std::string& name) const;

    /// Parameters in definition order.
    std::vector<Parameter*> all();
    std::vector<const Parameter*> all() const;
    std::size_t size() const { return params_.size(); }

    const ParameterGroup& define_group(std::vector<std::string> members, Matrix correlation);
    const std::deque<ParameterGroup>& groups() const { return groups_; }

    /// C[i][j] = corr[i][j] * sigma_i * sigma_j.
    Matrix group_covariance(const ParameterGroup& g) const;

    ParameterSnapshot snapshot() const;
    /// Applies set_value semantics per entry (taints only real changes).
    void restore(const ParameterSnapshot& s);

    /// Flat text table: name, value, central, sigma, flags.
    std::string dump_table() const;

private:
    Graph* graph_;
    std::vector<std::unique_ptr<Parameter>> params_;
    std::map<std::string, Parameter*> index_;
    std::deque<ParameterGroup> groups_;
};

} // namespace dagfit
