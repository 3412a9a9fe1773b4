#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dagfit/graph.hpp"
#include "dagfit/linalg.hpp"
#include "dagfit/parameters.hpp"
#include "dagfit/statistics.hpp"

namespace dagfit {

struct FitOptions {
    double ftol = 1e-9;            // simplex function-value spread
    double xtol = 1e-6;            // parameter spread, in units of sigma
    std::size_t max_evaluations = 100000;
    double hessian_step = 0.05;    // in units of sigma
    double simplex_step = 0.1;     // initial simplex displacement, units of sigma
};

struct FitProblem {
    Graph* graph = nullptr;
    Statistic* statistic = nullptr;
    std::vector<Parameter*> free;
    FitOptions options;
    /// Optional per-iteration hook (e.g. covariance re-assembly).
    std::function<void()> on_iteration;
};

struct FitResult {
    std::vector<std::string> names; // free parameters, in problem order
    std::vector<double> values;
    std::vector<double> errors;
    Matrix covariance;
    double fun = 0.0;
    std::size_t nfev = 0;
    bool converged = false;
    std::string message;
};

struct ScanPoint {
    double value = 0.0;
    double fun_min = 0.0;
    bool converged = false;
};

/// Standard Nelder-Mead (reflection 1, expansion 2, contraction 0.5, shrink
/// 0.5) from the current parameter values. Bounds are enforced by evaluating
/// at the clamped point plus a quadratic penalty on the excess. Parameters
/// are left at the best-fit values. Hitting max_evaluations yields
/// converged=false rather than an exception so drivers can still report.
FitResult minimize(FitProblem& p);

/// Covariance = 2 H^{-1} from a central-difference Hessian (steps
/// hessian_step*sigma), matching the chi^2 / -2 ln lambda convention.
/// Falls back to diagonal-only errors when H is not positive definite;
/// throws SingularHessian when even the diagonal curvature is unusable.
void estimate_errors(FitProblem& p, FitResult& result);

/// Fix `target` at each grid value and re-minimize the remaining free
/// parameters, warm-starting from the previous point. Failures at a grid
/// point are recorded and the scan continues.
std::vector<ScanPoint> profile_scan(FitProblem& p, Parameter& target,
                                    std::span<const double> grid);

/// Stable key order: values, errors, covariance, fun, nfev, converged, message.
std::string fit_result_to_json(const FitResult& r);

} // namespace dagfit
