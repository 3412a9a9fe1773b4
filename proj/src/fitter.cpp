#include "dagfit/fitter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

namespace dagfit {

namespace {

/// Bounds-aware objective: evaluates the statistic at the clamped point and
/// adds a quadratic penalty on the excess, in units of sigma.
class Objective {
public:
    Objective(FitProblem& p) : p_(p) {}

    double operator()(const std::vector<double>& x) {
        double penalty = 0.0;
        for (std::size_t k = 0; k < p_.free.size(); ++k) {
            Parameter* par = p_.free[k];
            double xc = x[k];
            if (par->bounds()) {
                xc = std::clamp(xc, par->bounds()->first, par->bounds()->second);
                const double excess = (x[k] - xc) / par->sigma();
                penalty += 1e6 * excess * excess;
            }
            par->set_value_raw(xc);
        }
        const double v = p_.statistic->value(*p_.graph);
        ++nfev_;
        return v + penalty;
    }

    std::size_t nfev() const { return nfev_; }

private:
    FitProblem& p_;
    std::size_t nfev_ = 0;
};

std::vector<double> clamped(const FitProblem& p, const std::vector<double>& x) {
    std::vector<double> out = x;
    for (std::size_t k = 0; k < p.free.size(); ++k)
        if (p.free[k]->bounds())
            out[k] = std::clamp(out[k], p.free[k]->bounds()->first,
                                p.free[k]->bounds()->second);
    return out;
}

void apply_point(FitProblem& p, const std::vector<double>& x) {
    for (std::size_t k = 0; k < p.free.size(); ++k) p.free[k]->set_value_raw(x[k]);
}

} // namespace

FitResult minimize(FitProblem& p) {
    if (p.free.empty()) throw Error("fit problem has no free parameters");
    for (Parameter* par : p.free)
        if (par->fixed())
            throw FixedParameter("free parameter '" + par->name() + "' has sigma == 0");

    const std::size_t n = p.free.size();
    const FitOptions& opt = p.options;
    Objective objective(p);
    const std::uint64_t eval_count_start = p.statistic->node().eval_count();

    // initial simplex: start point plus per-parameter sigma-scaled steps
    std::vector<std::vector<double>> vx(n + 1);
    std::vector<double> vf(n + 1);
    vx[0].reserve(n);
    for (Parameter* par : p.free) vx[0].push_back(par->value());
    for (std::size_t k = 0; k < n; ++k) {
        vx[k + 1] = vx[0];
        vx[k + 1][k] += opt.simplex_step * p.free[k]->sigma();
    }
    for (std::size_t j = 0; j <= n; ++j) vf[j] = objective(vx[j]);

    constexpr double alpha = 1.0; // reflection
    constexpr double gamma = 2.0; // expansion
    constexpr double rho = 0.5;   // contraction
    constexpr double shrink = 0.5;

    bool converged = false;
    std::string message;

    std::vector<std::size_t> idx(n + 1);
    while (true) {
        if (p.on_iteration) p.on_iteration();

        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return vf[a] < vf[b];
        });
        const std::size_t best = idx[0], worst = idx[n], second = idx[n - 1];

        // convergence: function spread and per-parameter position spread
        const double fspread = vf[worst] - vf[best];
        bool xconverged = true;
        for (std::size_t k = 0; k < n && xconverged; ++k) {
            const double tol = opt.xtol * p.free[k]->sigma();
            for (std::size_t j = 0; j <= n; ++j)
                if (std::fabs(vx[j][k] - vx[best][k]) > tol) {
                    xconverged = false;
                    break;
                }
        }
        if (fspread < opt.ftol && xconverged) {
            converged = true;
            message = "converged";
            break;
        }
        if (objective.nfev() >= opt.max_evaluations) {
            message = "max evaluations reached";
            break;
        }

        // centroid of all vertices but the worst
        std::vector<double> centroid(n, 0.0);
        for (std::size_t j = 0; j <= n; ++j) {
            if (j == worst) continue;
            for (std::size_t k = 0; k < n; ++k) centroid[k] += vx[j][k];
        }
        for (double& c : centroid) c /= static_cast<double>(n);

        std::vector<double> xr(n);
        for (std::size_t k = 0; k < n; ++k)
            xr[k] = centroid[k] + alpha * (centroid[k] - vx[worst][k]);
        const double fr = objective(xr);

        if (fr < vf[best]) {
            std::vector<double> xe(n);
            for (std::size_t k = 0; k < n; ++k)
                xe[k] = centroid[k] + gamma * (xr[k] - centroid[k]);
            const double fe = objective(xe);
            if (fe < fr) {
                vx[worst] = std::move(xe);
                vf[worst] = fe;
            } else {
                vx[worst] = std::move(xr);
                vf[worst] = fr;
            }
        } else if (fr < vf[second]) {
            vx[worst] = std::move(xr);
            vf[worst] = fr;
        } else {
            const bool outside = fr < vf[worst];
            std::vector<double> xc(n);
            if (outside) {
                for (std::size_t k = 0; k < n; ++k)
                    xc[k] = centroid[k] + rho * (xr[k] - centroid[k]);
            } else {
                for (std::size_t k = 0; k < n; ++k)
                    xc[k] = centroid[k] + rho * (vx[worst][k] - centroid[k]);
            }
            const double fc = objective(xc);
            if (fc < (outside ? fr : vf[worst])) {
                vx[worst] = std::move(xc);
                vf[worst] = fc;
            } else {
                for (std::size_t j = 0; j <= n; ++j) {
                    if (j == best) continue;
                    for (std::size_t k = 0; k < n; ++k)
                        vx[j][k] = vx[best][k] + shrink * (vx[j][k] - vx[best][k]);
                    vf[j] = objective(vx[j]);
                }
            }
        }
    }

    std::size_t best = 0;
    for (std::size_t j = 1; j <= n; ++j)
        if (vf[j] < vf[best]) best = j;

    FitResult result;
    result.names.reserve(n);
    for (Parameter* par : p.free) result.names.push_back(par->name());
    result.values = clamped(p, vx[best]);
    apply_point(p, result.values);
    result.fun = p.statistic->value(*p.graph); // statistic alone, no penalty
    // lazy-engine convention: nfev counts actual statistic evaluations
    result.nfev = p.statistic->node().eval_count() - eval_count_start;
    result.converged = converged;
    result.message = message;
    result.errors.assign(n, 0.0);
    result.covariance = Matrix(n, n);
    return result;
}

void estimate_errors(FitProblem& p, FitResult& result) {
    if (!result.converged) throw Error("error estimation requires a converged fit");
    const std::size_t n = p.free.size();
    Objective objective(p);
    const std::uint64_t eval_count_start = p.statistic->node().eval_count();

    const std::vector<double> x0 = result.values;
    const double f0 = objective(x0);

    std::vector<double> h(n);
    for (std::size_t k = 0; k < n; ++k) h[k] = p.options.hessian_step * p.free[k]->sigma();

    Matrix hess(n, n);
    std::vector<double> x = x0;
    for (std::size_t k = 0; k < n; ++k) {
        x[k] = x0[k] + h[k];
        const double fp = objective(x);
        x[k] = x0[k] - h[k];
        const double fm = objective(x);
        x[k] = x0[k];
        hess(k, k) = (fp + fm - 2.0 * f0) / (h[k] * h[k]);
    }
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t l = k + 1; l < n; ++l) {
            x[k] = x0[k] + h[k];
            x[l] = x0[l] + h[l];
            const double fpp = objective(x);
            x[l] = x0[l] - h[l];
            const double fpm = objective(x);
            x[k] = x0[k] - h[k];
            const double fmm = objective(x);
            x[l] = x0[l] + h[l];
            const double fmp = objective(x);
            x[k] = x0[k];
            x[l] = x0[l];
            hess(k, l) = hess(l, k) = (fpp - fpm - fmp + fmm) / (4.0 * h[k] * h[l]);
        }
    }

    result.nfev += p.statistic->node().eval_count() - eval_count_start;

    try {
        const Matrix l = cholesky_factor(hess);
        Matrix cov = cholesky_inverse(l);
        for (double& v : cov.data()) v *= 2.0; // chi^2 / -2 ln lambda convention
        result.covariance = cov;
        result.errors.resize(n);
        for (std::size_t k = 0; k < n; ++k) result.errors[k] = std::sqrt(cov(k, k));
    } catch (NotPositiveDefinite&) {
        // diagonal-only fallback from 1-d curvatures
        Matrix cov(n, n);
        for (std::size_t k = 0; k < n; ++k) {
            if (!(hess(k, k) > 0.0))
                throw SingularHessian("no curvature for parameter '" + p.free[k]->name() + "'");
            cov(k, k) = 2.0 / hess(k, k);
        }
        result.covariance = cov;
        result.errors.resize(n);
        for (std::size_t k = 0; k < n; ++k) result.errors[k] = std::sqrt(cov(k, k));
        result.message = "hessian not positive definite; diagonal errors only";
    }

    apply_point(p, x0);
    p.statistic->value(*p.graph); // resettle caches at the best fit
}

std::vector<ScanPoint> profile_scan(FitProblem& p, Parameter& target,
                                    std::span<const double> grid) {
    auto it = std::find(p.free.begin(), p.free.end(), &target);
    if (it == p.free.end())
        throw UnknownName("scan target '" + target.name() + "' is not a free parameter");

    FitProblem sub = p;
    sub.free.erase(std::find(sub.free.begin(), sub.free.end(), &target));

    std::vector<ScanPoint> points;
    points.reserve(grid.size());
    for (double v : grid) {
        ScanPoint pt;
        pt.value = v;
        try {
            target.set_value(v);
            if (sub.free.empty()) {
                pt.fun_min = p.statistic->value(*p.graph);
                pt.converged = true;
            } else {
                FitResult r = minimize(sub);
                pt.fun_min = r.fun;
                pt.converged = r.converged;
            }
        } catch (Error&) {
            pt.fun_min = std::numeric_limits<double>::quiet_NaN();
            pt.converged = false;
        }
        points.push_back(pt);
    }
    return points;
}

std::string fit_result_to_json(const FitResult& r) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json values, errors;
    for (std::size_t k = 0; k < r.names.size(); ++k) {
        values[r.names[k]] = r.values[k];
        errors[r.names[k]] = r.errors.empty() ? 0.0 : r.errors[k];
    }
    j["values"] = values;
    j["errors"] = errors;
    auto cov = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < r.covariance.rows(); ++i) {
        auto row = nlohmann::ordered_json::array();
        for (std::size_t k = 0; k < r.covariance.cols(); ++k) row.push_back(r.covariance(i, k));
        cov.push_back(row);
    }
    j["covariance"] = cov;
    j["fun"] = r.fun;
    j["nfev"] = r.nfev;
    j["converged"] = r.converged;
    j["message"] = r.message;
    return j.dump(2) + "\n";
}

} // namespace dagfit
