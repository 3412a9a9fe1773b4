#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dagfit/bundles.hpp"
#include "dagfit/fitter.hpp"
#include "dagfit/statistics.hpp"

namespace dagfit {

struct GroupConfig {
    std::string name;
    std::vector<std::string> members;
    Matrix correlation;
};

struct ScanRequest {
    std::string param;
    double lo = 0.0;
    double hi = 0.0;
    int points = 1;
    std::string output;
};

struct StatisticConfig {
    Statistic::Kind kind = Statistic::Kind::PoissonLogL;
    std::string prediction; // expression name or registry key
    std::string data;       // registry key of the observed histogram
    std::vector<std::string> pulls;
    CovarianceModel::StatPart stat_part = CovarianceModel::StatPart::FromPrediction;
    std::vector<std::string> syst_groups; // group names
    double fd_rel_step = 0.01;
};

/// Declarative model description; the JSON schema mirrors these fields.
struct ModelConfig {
    expr::IndexSpace space;
    std::vector<BundleConfig> bundles;
    std::vector<std::pair<std::string, std::string>> expressions; // name -> source
    nlohmann::json parameter_overrides;                           // name -> {value,...}
    std::vector<GroupConfig> groups;
    std::optional<StatisticConfig> statistic;
    FitOptions fit_options;
    std::vector<std::string> fit_free; // empty -> every sigma>0 parameter
    bool reassemble_covariance = false; // rebuild V each minimizer iteration
    std::vector<ScanRequest> scans;

    static ModelConfig from_json(const nlohmann::json& j);
    static ModelConfig from_file(const std::string& path);
};

/// Fully assembled model: graph, parameters, named outputs and (optionally)
/// the statistic, ready for touch/fit/scan drivers.
class Model {
public:
    explicit Model(const ModelConfig& config,
                   const BundleCatalog& catalog = BundleCatalog::with_builtins());
    Model(const Model&) = delete;
    Model& operator=(const Model&) = delete;

    Graph& graph() { return graph_; }
    ParameterRegistry& params() { return params_; }
    NameRegistry& names() { return names_; }
    const expr::IndexSpace& space() const { return config_.space; }

    OutputPort& output(const std::string& name); // expression output or registry key

    bool has_statistic() const { return statistic_ != nullptr; }
    Statistic& statistic();
    OutputPort& prediction();
    DataHandle& data_handle(); // the statistic's data source

    std::vector<Parameter*>& free_params() { return free_; }
    const std::vector<const ParameterGroup*>& pull_group_ptrs() const { return pull_groups_; }

    /// Assemble V at the current parameter values and install it (chi2 only).
    void assemble_covariance();
    const CovarianceModel& covariance_model() const { return cov_model_; }
    Matrix last_covariance() const { return last_covariance_; }

    FitProblem fit_problem();

    /// Deterministic build report (node/edge/parameter counts).
    std::string report() const;

private:
    ModelConfig config_;
    Graph graph_;
    ParameterRegistry params_{graph_};
    NameRegistry names_;
    std::map<std::string, DataHandle> data_handles_;
    std::map<std::string, const ParameterGroup*> groups_;
    std::unique_ptr<Statistic> statistic_;
    OutputPort* prediction_ = nullptr;
    OutputPort* data_output_ = nullptr;
    std::string data_key_;
    std::vector<Parameter*> free_;
    std::vector<Parameter*> pulls_;
    std::vector<const ParameterGroup*> pull_groups_;
    CovarianceModel cov_model_;
    Matrix last_covariance_;
};

} // namespace dagfit
