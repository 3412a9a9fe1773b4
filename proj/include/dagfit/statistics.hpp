#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dagfit/graph.hpp"
#include "dagfit/linalg.hpp"
#include "dagfit/parameters.hpp"

namespace dagfit {

// ---------------------------------------------------------------------------
// scalar statistics
// ---------------------------------------------------------------------------

/// chi^2 = d^T V^{-1} d via Cholesky solve (never an explicit inverse).
double chi2_cov(std::span<const double> residual, const Matrix& v);

/// Same with a prefactored lower-triangular L (V = L L^T).
double chi2_prefactored(std::span<const double> residual, const Matrix& l);

/// -2 ln lambda = 2 sum_i [pred_i - data_i + data_i ln(data_i/pred_i)],
/// with the data_i == 0 term equal to 2 pred_i. Requires pred_i > 0.
double poisson_logl(std::span<const double> pred, std::span<const double> data);

/// Gaussian pull penalty: sum ((value-central)/sigma)^2 for ungrouped pulls
/// plus d^T C^{-1} d per correlated group (C from group_covariance).
/// Group members must each appear in the pull list.
double add_pulls(double stat, std::span<Parameter* const> pulls,
                 std::span<const ParameterGroup* const> groups, const ParameterRegistry& reg);

// ---------------------------------------------------------------------------
// covariance assembly
// ---------------------------------------------------------------------------

/// How the covariance of the prediction is assembled:
/// a statistical diagonal plus one J C J^T block per systematic group.
struct CovarianceModel {
    enum class StatPart { FromPrediction, FromData, Fixed };
    StatPart stat_part = StatPart::FromPrediction;
    Matrix fixed; // StatPart::Fixed only
    std::vector<const ParameterGroup*> syst_groups;
    double fd_rel_step = 0.01;
};

/// V = V_stat + sum_g J_g C_g J_g^T, evaluated at the snapshot (or at the
/// current parameter values when `at` is null); the result is symmetrized
/// and PSD-checked. Mutates parameters through finite_diff_jacobian while
/// running; original values are restored.
Matrix build_covariance(const CovarianceModel& model, Graph& g, OutputPort& prediction,
                        std::span<const double> data, ParameterRegistry& reg,
                        const ParameterSnapshot* at = nullptr);

// ---------------------------------------------------------------------------
// statistic node
// ---------------------------------------------------------------------------

/// Scalar test-statistic node: chi^2 with full covariance or Poisson -2 ln
/// lambda, plus Gaussian pulls. Inputs are the prediction, the data and one
/// scalar per pull parameter, so any relevant change re-taints the statistic.
class Statistic {
public:
    enum class Kind { Chi2Cov, PoissonLogL };

    Statistic(Graph& g, std::string name, Kind kind, OutputPort& prediction, OutputPort& data,
              std::vector<Parameter*> pulls = {},
              std::vector<const ParameterGroup*> pull_groups = {});

    Kind kind() const { return kind_; }
    Node& node() { return *node_; }
    const Node& node() const { return *node_; }

    /// Install/replace the chi^2 covariance (factored once); taints the node.
    void set_covariance(const Matrix& v);
    bool has_covariance() const;

    /// touch + read the scalar.
    double value(Graph& g);

private:
    struct State;
    Kind kind_;
    Node* node_ = nullptr;
    std::shared_ptr<State> state_;
};

} // namespace dagfit
