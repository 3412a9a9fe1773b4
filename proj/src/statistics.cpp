#include "dagfit/statistics.hpp"

#include <algorithm>
#include <cmath>

#include "dagfit/transforms.hpp"

namespace dagfit {

double chi2_cov(std::span<const double> residual, const Matrix& v) {
    return quadratic_form(cholesky_factor(v), residual);
}

double chi2_prefactored(std::span<const double> residual, const Matrix& l) {
    return quadratic_form(l, residual);
}

double poisson_logl(std::span<const double> pred, std::span<const double> data) {
    if (pred.size() != data.size())
        throw TypeMismatch("poisson_logl: prediction/data length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!(pred[i] > 0.0))
            throw NonPositivePrediction("prediction bin " + std::to_string(i) + " is " +
                                        std::to_string(pred[i]));
        if (data[i] == 0.0)
            s += pred[i];
        else
            s += pred[i] - data[i] + data[i] * std::log(data[i] / pred[i]);
    }
    return 2.0 * s;
}

double add_pulls(double stat, std::span<Parameter* const> pulls,
                 std::span<const ParameterGroup* const> groups, const ParameterRegistry& reg) {
    for (Parameter* p : pulls)
        if (p->fixed())
            throw FixedParameter("pull parameter '" + p->name() + "' has sigma == 0");

    std::vector<bool> grouped(pulls.size(), false);
    double total = stat;

    for (const ParameterGroup* g : groups) {
        std::vector<double> d;
        d.reserve(g->members.size());
        for (const auto& member : g->members) {
            auto it = std::find_if(pulls.begin(), pulls.end(),
                                   [&](Parameter* p) { return p->name() == member; });
            if (it == pulls.end())
                throw UnknownMember("group member '" + member + "' is not in the pull list");
            grouped[it - pulls.begin()] = true;
            d.push_back((*it)->value() - (*it)->central());
        }
        const Matrix c = reg.group_covariance(*g);
        total += quadratic_form(cholesky_factor(c), d);
    }

    for (std::size_t i = 0; i < pulls.size(); ++i) {
        if (grouped[i]) continue;
        const double t = (pulls[i]->value() - pulls[i]->central()) / pulls[i]->sigma();
        total += t * t;
    }
    return total;
}

Matrix build_covariance(const CovarianceModel& model, Graph& g, OutputPort& prediction,
                        std::span<const double> data, ParameterRegistry& reg,
                        const ParameterSnapshot* at) {
    std::optional<ParameterSnapshot> saved;
    if (at) {
        saved = reg.snapshot();
        reg.restore(*at);
    }

    g.touch(prediction.node());
    const std::size_t n = prediction.data().size();

    Matrix v(n, n);
    switch (model.stat_part) {
    case CovarianceModel::StatPart::FromPrediction:
        for (std::size_t i = 0; i < n; ++i) v(i, i) = prediction.data().values[i];
        break;
    case CovarianceModel::StatPart::FromData:
        if (data.size() != n) throw TypeMismatch("covariance: data length mismatch");
        for (std::size_t i = 0; i < n; ++i) v(i, i) = data[i];
        break;
    case CovarianceModel::StatPart::Fixed:
        if (model.fixed.rows() != n || model.fixed.cols() != n)
            throw TypeMismatch("covariance: fixed matrix shape mismatch");
        v = model.fixed;
        break;
    }

    for (const ParameterGroup* grp : model.syst_groups) {
        std::vector<Parameter*> ps;
        ps.reserve(grp->members.size());
        for (const auto& m : grp->members) ps.push_back(&reg.at(m));
        const Matrix jac = transforms::finite_diff_jacobian(g, prediction, ps, model.fd_rel_step);
        const Matrix c = reg.group_covariance(*grp);
        v = v + jac * c * jac.transposed();
    }

    v = symmetrized(v);
    cholesky_psd(v); // NotPSD on inconsistent inputs

    if (saved) {
        reg.restore(*saved);
        g.touch(prediction.node());
    }
    return v;
}

// ---------------------------------------------------------------------------

struct Statistic::State {
    Kind kind;
    std::optional<Matrix> chol; // factored covariance (Chi2Cov)
    std::vector<Parameter*> pulls;
    // per group: member positions within the pull list + factored C
    struct GroupTerm {
        std::vector<std::size_t> pull_index;
        Matrix chol;
    };
    std::vector<GroupTerm> group_terms;
    std::vector<bool> grouped;
};

Statistic::Statistic(Graph& g, std::string name, Kind kind, OutputPort& prediction,
                     OutputPort& data, std::vector<Parameter*> pulls,
                     std::vector<const ParameterGroup*> pull_groups)
    : kind_(kind), state_(std::make_shared<State>()) {
    state_->kind = kind;
    state_->pulls = std::move(pulls);
    state_->grouped.assign(state_->pulls.size(), false);

    for (Parameter* p : state_->pulls)
        if (p->fixed())
            throw FixedParameter("pull parameter '" + p->name() + "' has sigma == 0");

    // Resolve groups against the pull list and factor their covariances once.
    for (const ParameterGroup* grp : pull_groups) {
        State::GroupTerm term;
        std::vector<double> sigmas;
        for (const auto& member : grp->members) {
            auto it = std::find_if(state_->pulls.begin(), state_->pulls.end(),
                                   [&](Parameter* p) { return p->name() == member; });
            if (it == state_->pulls.end())
                throw UnknownMember("pull group member '" + member + "' is not a pull");
            term.pull_index.push_back(it - state_->pulls.begin());
            state_->grouped[it - state_->pulls.begin()] = true;
            sigmas.push_back((*it)->sigma());
        }
        grp->validate();
        const std::size_t n = grp->members.size();
        Matrix c(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j)
                c(i, j) = c(j, i) = grp->correlation(i, j) * sigmas[i] * sigmas[j];
        term.chol = cholesky_factor(c);
        state_->group_terms.push_back(std::move(term));
    }

    auto state = state_;
    Node& node = g.add_node(
        std::move(name), kind == Kind::Chi2Cov ? "chi2" : "poisson_logl",
        2 + state_->pulls.size(), 1,
        [](const Node& n) {
            const DataType& pred = n.input_dtype(0);
            const DataType& data_dt = n.input_dtype(1);
            if (pred.shape != data_dt.shape)
                throw TypeMismatch("prediction " + pred.to_string() + " vs data " +
                                   data_dt.to_string());
            for (std::size_t i = 2; i < n.num_inputs(); ++i)
                if (!n.input_dtype(i).is_scalar())
                    throw TypeMismatch("pull input " + std::to_string(i) + " must be scalar");
            return std::vector<DataType>{DataType::scalar()};
        },
        [state](Node& n) {
            const auto& pred = n.input_data(0).values;
            const auto& data_v = n.input_data(1).values;
            double stat = 0.0;
            if (state->kind == Kind::Chi2Cov) {
                if (!state->chol)
                    throw EvalError("chi2 covariance not set (call set_covariance)");
                std::vector<double> d(pred.size());
                for (std::size_t i = 0; i < d.size(); ++i) d[i] = pred[i] - data_v[i];
                stat = chi2_prefactored(d, *state->chol);
            } else {
                stat = poisson_logl(pred, data_v);
            }
            // pull values come through the bound scalar inputs
            for (const auto& term : state->group_terms) {
                std::vector<double> d(term.pull_index.size());
                for (std::size_t i = 0; i < d.size(); ++i) {
                    const std::size_t k = term.pull_index[i];
                    d[i] = n.input_data(2 + k).values[0] - state->pulls[k]->central();
                }
                stat += quadratic_form(term.chol, d);
            }
            for (std::size_t k = 0; k < state->pulls.size(); ++k) {
                if (state->grouped[k]) continue;
                const double t = (n.input_data(2 + k).values[0] - state->pulls[k]->central()) /
                                 state->pulls[k]->sigma();
                stat += t * t;
            }
            n.output_data(0).values[0] = stat;
        });

    g.bind(prediction, node.in(0));
    g.bind(data, node.in(1));
    for (std::size_t k = 0; k < state_->pulls.size(); ++k)
        g.bind(state_->pulls[k]->output(), node.in(2 + k));
    node_ = &node;
}

void Statistic::set_covariance(const Matrix& v) {
    if (kind_ != Kind::Chi2Cov)
        throw Error("set_covariance only applies to the chi2 statistic");
    state_->chol = cholesky_factor(v);
    node_->taint_flag().taint();
}

bool Statistic::has_covariance() const { return state_->chol.has_value(); }

double Statistic::value(Graph& g) {
    g.touch(*node_);
    return node_->out(0).data().values[0];
}

} // namespace dagfit
