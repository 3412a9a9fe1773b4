#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dagfit/expr.hpp"
#include "dagfit/registry.hpp"

namespace dagfit {

/// Parameter a bundle defines, with a name template over the major axes.
/// A template without an axis placeholder yields one parameter shared by all
/// instances; "{axis}" placeholders make it per-instance.
struct ParamSpec {
    std::string name_template;
    double central = 0.0;
    double sigma = 0.0;
    bool constrained = false;
    std::optional<std::pair<double, double>> bounds;
};

/// Declarative description of one bundle instantiation.
struct BundleConfig {
    std::string kind;
    std::vector<ParamSpec> parameters;
    std::vector<std::string> major_axes;
    std::vector<std::string> provides; // output name templates, factory slot order
    std::vector<std::string> expects;  // open-input name templates, factory slot order
    nlohmann::json options;
};

/// Mutable histogram-data source registered by the histogram_data bundle;
/// lets drivers swap in pseudo-experiment counts without rebuilding.
struct DataHandle {
    Node* node = nullptr;
    std::shared_ptr<std::vector<double>> counts;

    void set(std::span<const double> values);
};

class BundleCatalog;

/// Per-instance context handed to a bundle factory.
class BundleContext {
public:
    Graph& graph() { return *graph_; }
    ParameterRegistry& params() { return *params_; }
    const BundleConfig& config() const { return *cfg_; }
    const nlohmann::json& options() const { return cfg_->options; }
    const std::map<std::string, std::string>& combo() const { return combo_; }

    /// Key for a provides/expects template: placeholders substituted, labels
    /// of unmentioned major axes appended dot-joined (matching "x[d]" keys).
    std::string value_key(const std::string& tmpl) const;
    /// Parameter name: placeholders substituted only (no appending), so a
    /// placeholder-free template names one shared parameter.
    std::string param_name(const std::string& tmpl) const;
    /// Instance-unique node name.
    std::string node_name(const std::string& stem) const;

    /// Define (or fetch, when shared across instances) parameter spec i.
    Parameter& define_param(std::size_t spec_index);

    void provide(std::size_t slot, OutputPort& out, std::vector<InputPort*> call_args = {});
    void expect(std::size_t slot, InputPort& in);
    void register_data_handle(std::size_t slot, DataHandle handle);

private:
    friend void instantiate_bundle(const BundleConfig&, const expr::IndexSpace&,
                                   const BundleCatalog&, Graph&, ParameterRegistry&,
                                   NameRegistry&, std::map<std::string, DataHandle>*);
    Graph* graph_ = nullptr;
    ParameterRegistry* params_ = nullptr;
    NameRegistry* names_ = nullptr;
    const BundleConfig* cfg_ = nullptr;
    std::map<std::string, std::string> combo_;
    std::map<std::string, Parameter*>* shared_params_ = nullptr;
    std::map<std::string, DataHandle>* data_handles_ = nullptr;
};

using BundleFactory = std::function<void(BundleContext&)>;

/// Kind -> factory map. Ships gaussian_peak, flat_curve, norm, smear_gauss,
/// histogram_data and quadrature; extensible.
class BundleCatalog {
public:
    static BundleCatalog with_builtins();

    void register_kind(const std::string& kind, BundleFactory factory); // DuplicateKind
    bool contains(const std::string& kind) const { return factories_.count(kind) > 0; }
    const BundleFactory& at(const std::string& kind) const; // UnknownBundleKind

private:
    std::map<std::string, BundleFactory> factories_;
};

/// Instantiate the bundle once per label combination of its major axes,
/// registering parameters, outputs and open inputs under templated names.
void instantiate_bundle(const BundleConfig& cfg, const expr::IndexSpace& space,
                        const BundleCatalog& catalog, Graph& g, ParameterRegistry& params,
                        NameRegistry& names,
                        std::map<std::string, DataHandle>* data_handles = nullptr);

/// Uniform or explicit bin edges from JSON: [e0, e1, ...] or {lo, hi, n}.
std::vector<double> parse_edges(const nlohmann::json& spec);

} // namespace dagfit
