#include "dagfit/parameters.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace dagfit {

void Parameter::set_value(double v) {
    if (bounds_ && (v < bounds_->first || v > bounds_->second))
        throw OutOfBounds("parameter '" + name_ + "': value " + std::to_string(v) +
                          " outside [" + std::to_string(bounds_->first) + ", " +
                          std::to_string(bounds_->second) + "]");
    set_value_raw(v);
}

void Parameter::set_value_raw(double v) {
    if (v == value_) return; // exact-equality no-op detection
    value_ = v;
    node_->taint_flag().taint();
}

void Parameter::set_normalized(double t) {
    if (fixed())
        throw FixedParameter("parameter '" + name_ + "' has sigma == 0");
    set_value(central_ + t * sigma_);
}

void Parameter::set_central(double c) {
    if (bounds_ && (c < bounds_->first || c > bounds_->second))
        throw BadBounds("parameter '" + name_ + "': central outside bounds");
    central_ = c;
}

void Parameter::set_sigma(double s) {
    if (s < 0.0) throw NegativeSigma("parameter '" + name_ + "': sigma " + std::to_string(s));
    sigma_ = s;
}

void Parameter::set_bounds(std::optional<std::pair<double, double>> b) {
    if (b) {
        if (!(b->first < b->second))
            throw BadBounds("parameter '" + name_ + "': lo must be < hi");
        if (value_ < b->first || value_ > b->second)
            throw BadBounds("parameter '" + name_ + "': current value outside new bounds");
    }
    bounds_ = b;
}

void ParameterGroup::validate() const {
    const std::size_t n = members.size();
    if (correlation.rows() != n || correlation.cols() != n)
        throw NotPSD("correlation matrix size does not match member count");
    for (std::size_t i = 0; i < n; ++i) {
        if (correlation(i, i) != 1.0)
            throw NotPSD("correlation diagonal must be 1 (member " + members[i] + ")");
        for (std::size_t j = 0; j < n; ++j) {
            if (std::fabs(correlation(i, j)) > 1.0)
                throw NotPSD("correlation entry (" + std::to_string(i) + "," +
                             std::to_string(j) + ") outside [-1, 1]");
            if (correlation(i, j) != correlation(j, i))
                throw NotPSD("correlation matrix not symmetric");
        }
    }
    cholesky_psd(correlation); // throws NotPSD if indefinite
}

Parameter& ParameterRegistry::define(const std::string& name, double central, double sigma,
                                     ParameterOptions opts) {
    if (index_.count(name))
        throw DuplicateName("parameter '" + name + "' already defined");
    if (sigma < 0.0)
        throw NegativeSigma("parameter '" + name + "': sigma " + std::to_string(sigma));
    if (opts.bounds) {
        auto [lo, hi] = *opts.bounds;
        if (!(lo < hi))
            throw BadBounds("parameter '" + name + "': lo must be < hi");
        if (central < lo || central > hi)
            throw BadBounds("parameter '" + name + "': central outside bounds");
    }

    auto p = std::make_unique<Parameter>(Parameter{});
    p->name_ = name;
    p->value_ = central;
    p->central_ = central;
    p->sigma_ = sigma;
    p->bounds_ = opts.bounds;
    p->constrained_ = opts.constrained;

    Parameter* raw = p.get();
    Node& node = graph_->add_node(
        name, "variable", 0, 1,
        [](const Node&) { return std::vector<DataType>{DataType::scalar()}; },
        [raw](Node& n) { n.output_data(0).values[0] = raw->value_; });
    raw->node_ = &node;

    params_.push_back(std::move(p));
    index_[name] = raw;
    return *raw;
}

Parameter& ParameterRegistry::at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw UnknownName("unknown parameter '" + name + "'");
    return *it->second;
}

const Parameter& ParameterRegistry::at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw UnknownName("unknown parameter '" + name + "'");
    return *it->second;
}

std::vector<Parameter*> ParameterRegistry::all() {
    std::vector<Parameter*> out;
    out.reserve(params_.size());
    for (auto& p : params_) out.push_back(p.get());
    return out;
}

std::vector<const Parameter*> ParameterRegistry::all() const {
    std::vector<const Parameter*> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p.get());
    return out;
}

const ParameterGroup& ParameterRegistry::define_group(std::vector<std::string> members,
                                                      Matrix correlation) {
    for (const auto& m : members)
        if (!contains(m)) throw UnknownMember("group member '" + m + "' is not defined");
    ParameterGroup g{std::move(members), std::move(correlation)};
    g.validate();
    groups_.push_back(std::move(g));
    return groups_.back();
}

Matrix ParameterRegistry::group_covariance(const ParameterGroup& g) const {
    for (const auto& m : g.members)
        if (!contains(m)) throw UnknownMember("group member '" + m + "' is not defined");
    g.validate();
    const std::size_t n = g.members.size();
    std::vector<double> sigmas(n);
    for (std::size_t i = 0; i < n; ++i) sigmas[i] = at(g.members[i]).sigma();
    Matrix c(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j)
            c(i, j) = c(j, i) = g.correlation(i, j) * sigmas[i] * sigmas[j];
    return c;
}

ParameterSnapshot ParameterRegistry::snapshot() const {
    ParameterSnapshot s;
    for (const auto& p : params_) s[p->name()] = p->value();
    return s;
}

void ParameterRegistry::restore(const ParameterSnapshot& s) {
    for (const auto& [name, value] : s) at(name).set_value(value);
}

std::string ParameterRegistry::dump_table() const {
    std::ostringstream os;
    char line[256];
    std::snprintf(line, sizeof line, "%-32s %16s %16s %12s  %s\n", "name", "value", "central",
                  "sigma", "flags");
    os << line;
    for (const auto& p : params_) {
        std::string flags;
        if (p->fixed()) flags += "fixed ";
        if (p->constrained()) flags += "constrained ";
        if (p->bounds()) flags += "bounded ";
        std::snprintf(line, sizeof line, "%-32s %16.9g %16.9g %12.6g  %s\n", p->name().c_str(),
                      p->value(), p->central(), p->sigma(), flags.c_str());
        os << line;
    }
    return os.str();
}

} // namespace dagfit
