#include "dagfit/model.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace dagfit {

using nlohmann::json;

// ---------------------------------------------------------------------------
// config parsing
// ---------------------------------------------------------------------------

namespace {

Matrix matrix_from_json(const json& j) {
    if (!j.is_array() || j.empty())
        throw ConfigError("correlation must be a non-empty array of rows");
    const std::size_t n = j.size();
    Matrix m(n, j.at(0).size());
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = j.at(i).get<std::vector<double>>();
        if (row.size() != m.cols()) throw ConfigError("ragged correlation matrix");
        for (std::size_t k = 0; k < row.size(); ++k) m(i, k) = row[k];
    }
    return m;
}

ParamSpec param_spec_from_json(const json& j) {
    ParamSpec spec;
    spec.name_template = j.at("name").get<std::string>();
    spec.central = j.at("central").get<double>();
    spec.sigma = j.at("sigma").get<double>();
    spec.constrained = j.value("constrained", false);
    if (j.contains("bounds")) {
        const auto b = j.at("bounds").get<std::vector<double>>();
        if (b.size() != 2) throw ConfigError("bounds must be [lo, hi]");
        spec.bounds = {b[0], b[1]};
    }
    return spec;
}

Statistic::Kind statistic_kind_from_string(const std::string& s) {
    if (s == "chi2") return Statistic::Kind::Chi2Cov;
    if (s == "poisson") return Statistic::Kind::PoissonLogL;
    throw ConfigError("statistic kind must be 'chi2' or 'poisson', got '" + s + "'");
}

CovarianceModel::StatPart stat_part_from_string(const std::string& s) {
    if (s == "prediction") return CovarianceModel::StatPart::FromPrediction;
    if (s == "data") return CovarianceModel::StatPart::FromData;
    throw ConfigError("covariance stat_part must be 'prediction' or 'data', got '" + s + "'");
}

} // namespace

ModelConfig ModelConfig::from_json(const json& j) {
    ModelConfig cfg;
    try {
        if (j.contains("index_space"))
            for (const auto& axis : j.at("index_space").at("axes"))
                cfg.space.add_axis(axis.at("name").get<std::string>(),
                                   axis.at("labels").get<std::vector<std::string>>());

        for (const auto& b : j.value("bundles", json::array())) {
            BundleConfig bc;
            bc.kind = b.at("kind").get<std::string>();
            for (const auto& p : b.value("parameters", json::array()))
                bc.parameters.push_back(param_spec_from_json(p));
            bc.major_axes = b.value("major_axes", std::vector<std::string>{});
            bc.provides = b.value("provides", std::vector<std::string>{});
            bc.expects = b.value("expects", std::vector<std::string>{});
            bc.options = b.value("options", json::object());
            cfg.bundles.push_back(std::move(bc));
        }

        const json exprs = j.value("expressions", json::object());
        for (const auto& [name, source] : exprs.items())
            cfg.expressions.emplace_back(name, source.get<std::string>());

        cfg.parameter_overrides = j.value("parameters", json::object());

        for (const auto& g : j.value("groups", json::array())) {
            GroupConfig gc;
            gc.name = g.at("name").get<std::string>();
            gc.members = g.at("members").get<std::vector<std::string>>();
            gc.correlation = matrix_from_json(g.at("correlation"));
            cfg.groups.push_back(std::move(gc));
        }

        if (j.contains("statistic")) {
            const json& s = j.at("statistic");
            StatisticConfig sc;
            sc.kind = statistic_kind_from_string(s.at("kind").get<std::string>());
            sc.prediction = s.at("prediction").get<std::string>();
            sc.data = s.at("data").get<std::string>();
            sc.pulls = s.value("pulls", std::vector<std::string>{});
            if (s.contains("covariance")) {
                const json& c = s.at("covariance");
                sc.stat_part = stat_part_from_string(c.value("stat_part", "prediction"));
                sc.syst_groups = c.value("syst_groups", std::vector<std::string>{});
                sc.fd_rel_step = c.value("fd_rel_step", 0.01);
            }
            cfg.statistic = std::move(sc);
        }

        if (j.contains("fit")) {
            const json& f = j.at("fit");
            cfg.fit_options.ftol = f.value("ftol", cfg.fit_options.ftol);
            cfg.fit_options.xtol = f.value("xtol", cfg.fit_options.xtol);
            cfg.fit_options.max_evaluations =
                f.value("max_evaluations", cfg.fit_options.max_evaluations);
            cfg.fit_free = f.value("free", std::vector<std::string>{});
            cfg.reassemble_covariance = f.value("reassemble_covariance", false);
        }

        for (const auto& s : j.value("scans", json::array())) {
            ScanRequest req;
            req.param = s.at("param").get<std::string>();
            req.lo = s.at("lo").get<double>();
            req.hi = s.at("hi").get<double>();
            req.points = s.at("points").get<int>();
            req.output = s.at("output").get<std::string>();
            if (req.points < 1) throw ConfigError("scan of '" + req.param + "': points < 1");
            cfg.scans.push_back(std::move(req));
        }
    } catch (json::exception& e) {
        throw ConfigError(std::string("config schema error: ") + e.what());
    }
    return cfg;
}

ModelConfig ModelConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (json::exception& e) {
        throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
    }
    return from_json(j);
}

// ---------------------------------------------------------------------------
// assembly
// ---------------------------------------------------------------------------

Model::Model(const ModelConfig& config, const BundleCatalog& catalog) : config_(config) {
    for (const auto& bc : config_.bundles)
        instantiate_bundle(bc, config_.space, catalog, graph_, params_, names_, &data_handles_);

    for (const auto& gc : config_.groups) {
        if (groups_.count(gc.name)) throw ConfigError("duplicate group '" + gc.name + "'");
        groups_[gc.name] = &params_.define_group(gc.members, gc.correlation);
    }

    for (const auto& [name, ov] : config_.parameter_overrides.items()) {
        Parameter& p = params_.at(name);
        try {
            if (ov.contains("bounds")) {
                const auto b = ov.at("bounds").get<std::vector<double>>();
                if (b.size() != 2) throw ConfigError("bounds must be [lo, hi]");
                p.set_bounds(std::pair{b[0], b[1]});
            }
            if (ov.contains("central")) p.set_central(ov.at("central").get<double>());
            if (ov.contains("sigma")) p.set_sigma(ov.at("sigma").get<double>());
            if (ov.contains("constrained")) p.set_constrained(ov.at("constrained").get<bool>());
            if (ov.contains("value")) p.set_value(ov.at("value").get<double>());
        } catch (json::exception& e) {
            throw ConfigError("override for '" + name + "': " + e.what());
        }
    }

    ExpressionBuilder builder(graph_, names_, &params_);
    for (const auto& [name, source] : config_.expressions) {
        expr::ExprPtr ast;
        try {
            ast = expr::parse(source);
        } catch (Error& e) {
            throw ConfigError("expression '" + name + "': " + e.what());
        }
        for (const auto& instance : expr::expand(ast, config_.space)) {
            std::string key = name;
            for (const auto& [axis, labels] : config_.space.axes()) {
                auto it = instance.assignment.find(axis);
                if (it != instance.assignment.end()) key += "." + it->second;
            }
            names_.add_output(key, builder.build(instance.expr));
        }
    }

    if (config_.statistic) {
        const StatisticConfig& sc = *config_.statistic;
        const NameRegistry::Entry& pred = names_.at(sc.prediction);
        if (!pred.output) throw ConfigError("prediction '" + sc.prediction + "' is not an output");
        prediction_ = pred.output;

        const NameRegistry::Entry& data = names_.at(sc.data);
        if (!data.output) throw ConfigError("data '" + sc.data + "' is not an output");
        data_output_ = data.output;
        data_key_ = sc.data;

        for (const auto& name : sc.pulls) pulls_.push_back(&params_.at(name));
        // pull groups: declared groups fully contained in the pull list
        for (const auto& [gname, group] : groups_) {
            const bool contained =
                std::all_of(group->members.begin(), group->members.end(), [&](const auto& m) {
                    return std::find(sc.pulls.begin(), sc.pulls.end(), m) != sc.pulls.end();
                });
            if (contained && !group->members.empty()) pull_groups_.push_back(group);
        }

        statistic_ = std::make_unique<Statistic>(graph_, "statistic", sc.kind, *prediction_,
                                                 *data_output_, pulls_, pull_groups_);

        cov_model_.stat_part = sc.stat_part;
        cov_model_.fd_rel_step = sc.fd_rel_step;
        for (const auto& gname : sc.syst_groups) {
            auto it = groups_.find(gname);
            if (it == groups_.end()) throw ConfigError("unknown syst group '" + gname + "'");
            cov_model_.syst_groups.push_back(it->second);
        }
    }

    graph_.propagate_types();

    if (!config_.fit_free.empty()) {
        for (const auto& name : config_.fit_free) {
            Parameter& p = params_.at(name);
            if (p.fixed()) throw ConfigError("free parameter '" + name + "' has sigma == 0");
            free_.push_back(&p);
        }
    } else {
        for (Parameter* p : params_.all())
            if (!p->fixed()) free_.push_back(p);
    }
}

OutputPort& Model::output(const std::string& name) {
    const NameRegistry::Entry& e = names_.at(name);
    if (!e.output) throw UnknownName("'" + name + "' is not an output");
    return *e.output;
}

Statistic& Model::statistic() {
    if (!statistic_) throw ConfigError("no statistic defined");
    return *statistic_;
}

OutputPort& Model::prediction() {
    if (!prediction_) throw ConfigError("no statistic defined");
    return *prediction_;
}

DataHandle& Model::data_handle() {
    auto it = data_handles_.find(data_key_);
    if (it == data_handles_.end())
        throw ConfigError("statistic data '" + data_key_ + "' is not a histogram_data bundle");
    return it->second;
}

void Model::assemble_covariance() {
    if (!statistic_) throw ConfigError("no statistic defined");
    if (statistic_->kind() != Statistic::Kind::Chi2Cov) return;
    graph_.touch(data_output_->node());
    last_covariance_ = build_covariance(cov_model_, graph_, *prediction_,
                                        data_output_->data().values, params_);
    statistic_->set_covariance(last_covariance_);
}

FitProblem Model::fit_problem() {
    FitProblem p;
    p.graph = &graph_;
    p.statistic = &statistic();
    p.free = free_;
    p.options = config_.fit_options;
    if (config_.reassemble_covariance && statistic_->kind() == Statistic::Kind::Chi2Cov)
        p.on_iteration = [this] { assemble_covariance(); };
    return p;
}

std::string Model::report() const {
    std::size_t n_free = 0, n_constrained = 0, n_fixed = 0;
    for (const Parameter* p : params_.all()) {
        if (p->fixed())
            ++n_fixed;
        else if (p->constrained())
            ++n_constrained;
        else
            ++n_free;
    }
    std::ostringstream os;
    os << "nodes: " << graph_.node_count() << "\n";
    os << "edges: " << graph_.edge_count() << "\n";
    os << "parameters: " << params_.size() << " (" << n_free << " free, " << n_constrained
       << " constrained, " << n_fixed << " fixed)\n";
    if (statistic_) {
        os << "statistic: "
           << (statistic_->kind() == Statistic::Kind::Chi2Cov ? "chi2" : "poisson") << ", "
           << config_.statistic->prediction << " ["
           << prediction_->dtype().to_string() << "], " << pulls_.size() << " pull(s)\n";
    }
    return os.str();
}

} // namespace dagfit
