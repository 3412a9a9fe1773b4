#include "dagfit/bundles.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "dagfit/transforms.hpp"

namespace dagfit {

void DataHandle::set(std::span<const double> values) {
    if (values.size() != counts->size())
        throw TypeMismatch("data handle expects " + std::to_string(counts->size()) +
                           " values, got " + std::to_string(values.size()));
    counts->assign(values.begin(), values.end());
    node->taint_flag().taint();
}

// ---------------------------------------------------------------------------
// template expansion
// ---------------------------------------------------------------------------

namespace {

std::string substitute_placeholders(const std::string& tmpl,
                                    const std::map<std::string, std::string>& combo,
                                    std::set<std::string>* used = nullptr) {
    std::string out;
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            const std::size_t close = tmpl.find('}', i);
            if (close == std::string::npos)
                throw ConfigError("unterminated placeholder in template '" + tmpl + "'");
            const std::string axis = tmpl.substr(i + 1, close - i - 1);
            auto it = combo.find(axis);
            if (it == combo.end())
                throw UnknownAxis("template '" + tmpl + "' uses non-major axis '" + axis + "'");
            out += it->second;
            if (used) used->insert(axis);
            i = close + 1;
        } else {
            out += tmpl[i++];
        }
    }
    return out;
}

} // namespace

std::string BundleContext::value_key(const std::string& tmpl) const {
    std::set<std::string> used;
    std::string key = substitute_placeholders(tmpl, combo_, &used);
    for (const auto& axis : cfg_->major_axes)
        if (!used.count(axis)) key += "." + combo_.at(axis);
    return key;
}

std::string BundleContext::param_name(const std::string& tmpl) const {
    return substitute_placeholders(tmpl, combo_);
}

std::string BundleContext::node_name(const std::string& stem) const {
    std::string name = stem;
    for (const auto& axis : cfg_->major_axes) name += "." + combo_.at(axis);
    return name;
}

Parameter& BundleContext::define_param(std::size_t spec_index) {
    if (spec_index >= cfg_->parameters.size())
        throw ConfigError("bundle '" + cfg_->kind + "' needs parameter spec " +
                          std::to_string(spec_index) + " but only " +
                          std::to_string(cfg_->parameters.size()) + " were configured");
    const ParamSpec& spec = cfg_->parameters[spec_index];
    const std::string name = param_name(spec.name_template);

    if (auto it = shared_params_->find(name); it != shared_params_->end())
        return *it->second; // shared template, defined by an earlier instance

    ParameterOptions opts;
    opts.bounds = spec.bounds;
    opts.constrained = spec.constrained;
    Parameter& p = params_->define(name, spec.central, spec.sigma, opts);
    (*shared_params_)[name] = &p;
    return p;
}

void BundleContext::provide(std::size_t slot, OutputPort& out,
                            std::vector<InputPort*> call_args) {
    if (slot >= cfg_->provides.size())
        throw ConfigError("bundle '" + cfg_->kind + "' provides slot " + std::to_string(slot) +
                          " but only " + std::to_string(cfg_->provides.size()) +
                          " names were configured");
    if (call_args.empty())
        names_->add_output(value_key(cfg_->provides[slot]), out);
    else
        names_->add_callable(value_key(cfg_->provides[slot]), out, std::move(call_args));
}

void BundleContext::expect(std::size_t slot, InputPort& in) {
    if (slot >= cfg_->expects.size())
        throw ConfigError("bundle '" + cfg_->kind + "' expects slot " + std::to_string(slot) +
                          " but only " + std::to_string(cfg_->expects.size()) +
                          " names were configured");
    names_->add_input(value_key(cfg_->expects[slot]), in);
}

void BundleContext::register_data_handle(std::size_t slot, DataHandle handle) {
    if (data_handles_)
        (*data_handles_)[value_key(cfg_->provides.at(slot))] = std::move(handle);
}

// ---------------------------------------------------------------------------
// catalog
// ---------------------------------------------------------------------------

void BundleCatalog::register_kind(const std::string& kind, BundleFactory factory) {
    if (factories_.count(kind)) throw DuplicateKind("bundle kind '" + kind + "' already registered");
    factories_.emplace(kind, std::move(factory));
}

const BundleFactory& BundleCatalog::at(const std::string& kind) const {
    auto it = factories_.find(kind);
    if (it == factories_.end()) throw UnknownBundleKind("unknown bundle kind '" + kind + "'");
    return it->second;
}

// ---------------------------------------------------------------------------
// built-in factories
// ---------------------------------------------------------------------------

namespace {

void require_counts(const BundleContext& ctx, std::size_t n_params, std::size_t n_provides,
                    std::size_t n_expects) {
    const BundleConfig& cfg = ctx.config();
    if (cfg.parameters.size() != n_params)
        throw ConfigError("bundle '" + cfg.kind + "' needs " + std::to_string(n_params) +
                          " parameter spec(s), got " + std::to_string(cfg.parameters.size()));
    if (cfg.provides.size() != n_provides)
        throw ConfigError("bundle '" + cfg.kind + "' needs " + std::to_string(n_provides) +
                          " provides name(s), got " + std::to_string(cfg.provides.size()));
    if (cfg.expects.size() != n_expects)
        throw ConfigError("bundle '" + cfg.kind + "' needs " + std::to_string(n_expects) +
                          " expects name(s), got " + std::to_string(cfg.expects.size()));
}

/// amp * exp(-(x-mean)^2 / (2 width^2)) evaluated on an open point grid.
void gaussian_peak_factory(BundleContext& ctx) {
    require_counts(ctx, 3, 1, 1);
    Parameter& amp = ctx.define_param(0);
    Parameter& mean = ctx.define_param(1);
    Parameter& width = ctx.define_param(2);

    Node& curve = ctx.graph().add_node(
        ctx.node_name("gaussian_peak"), "gaussian_curve", 4, 1,
        [](const Node& n) {
            if (n.input_dtype(0).rank() != 1)
                throw TypeMismatch("point grid must be rank 1");
            return std::vector<DataType>{DataType::points(n.input_dtype(0).size())};
        },
        [](Node& n) {
            const auto& x = n.input_data(0).values;
            const double a = n.input_data(1).values[0];
            const double mu = n.input_data(2).values[0];
            const double w = n.input_data(3).values[0];
            if (w == 0.0) throw std::runtime_error("peak width is zero");
            auto& out = n.output_data(0).values;
            const double inv2w2 = 1.0 / (2.0 * w * w);
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double dx = x[i] - mu;
                out[i] = a * std::exp(-dx * dx * inv2w2);
            }
        });
    ctx.graph().bind(amp.output(), curve.in(1));
    ctx.graph().bind(mean.output(), curve.in(2));
    ctx.graph().bind(width.output(), curve.in(3));

    ctx.provide(0, curve.out(0), {&curve.in(0)});
    ctx.expect(0, curve.in(0));
}

/// Constant level evaluated on an open point grid.
void flat_curve_factory(BundleContext& ctx) {
    require_counts(ctx, 1, 1, 1);
    Parameter& level = ctx.define_param(0);

    Node& curve = ctx.graph().add_node(
        ctx.node_name("flat_curve"), "flat_curve", 2, 1,
        [](const Node& n) {
            if (n.input_dtype(0).rank() != 1)
                throw TypeMismatch("point grid must be rank 1");
            return std::vector<DataType>{DataType::points(n.input_dtype(0).size())};
        },
        [](Node& n) {
            const double level_v = n.input_data(1).values[0];
            auto& out = n.output_data(0).values;
            std::fill(out.begin(), out.end(), level_v);
        });
    ctx.graph().bind(level.output(), curve.in(1));

    ctx.provide(0, curve.out(0), {&curve.in(0)});
    ctx.expect(0, curve.in(0));
}

/// scale * exp(lin u + quad u^2) with u = (x - center)/halfspan; a smooth,
/// strictly positive background shape.
void exp_poly_factory(BundleContext& ctx) {
    require_counts(ctx, 3, 1, 1);
    Parameter& scale = ctx.define_param(0);
    Parameter& lin = ctx.define_param(1);
    Parameter& quad = ctx.define_param(2);
    const double center = ctx.options().value("center", 0.0);
    const double halfspan = ctx.options().value("halfspan", 1.0);

    Node& curve = ctx.graph().add_node(
        ctx.node_name("exp_poly"), "exp_poly_curve", 4, 1,
        [](const Node& n) {
            if (n.input_dtype(0).rank() != 1)
                throw TypeMismatch("point grid must be rank 1");
            return std::vector<DataType>{DataType::points(n.input_dtype(0).size())};
        },
        [center, halfspan](Node& n) {
            const auto& x = n.input_data(0).values;
            const double s = n.input_data(1).values[0];
            const double l = n.input_data(2).values[0];
            const double q = n.input_data(3).values[0];
            auto& out = n.output_data(0).values;
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double u = (x[i] - center) / halfspan;
                out[i] = s * std::exp(l * u + q * u * u);
            }
        });
    ctx.graph().bind(scale.output(), curve.in(1));
    ctx.graph().bind(lin.output(), curve.in(2));
    ctx.graph().bind(quad.output(), curve.in(3));

    ctx.provide(0, curve.out(0), {&curve.in(0)});
    ctx.expect(0, curve.in(0));
}

/// Single scale parameter applied as a one-term weighted sum.
void norm_factory(BundleContext& ctx) {
    require_counts(ctx, 1, 1, 1);
    Parameter& scale = ctx.define_param(0);

    Node& ws = transforms::make_weighted_sum(ctx.graph(), ctx.node_name("norm"), 1);
    ctx.graph().bind(scale.output(), ws.in(1));

    ctx.provide(0, ws.out(0), {&ws.in(0)});
    ctx.expect(0, ws.in(0));
}

/// Gaussian smearing matrix built from a resolution parameter, applied to an
/// open histogram input. Columns are normalized to 1 (no leakage).
void smear_gauss_factory(BundleContext& ctx) {
    require_counts(ctx, 1, 1, 1);
    Parameter& res = ctx.define_param(0);
    const std::vector<double> edges = parse_edges(ctx.options().at("edges"));
    const std::size_t nbins = edges.size() - 1;

    std::vector<double> centers(nbins);
    for (std::size_t i = 0; i < nbins; ++i) centers[i] = 0.5 * (edges[i] + edges[i + 1]);

    Node& matrix = ctx.graph().add_node(
        ctx.node_name("smear_matrix"), "smear_matrix", 1, 1,
        [nbins](const Node&) {
            return std::vector<DataType>{DataType::points(nbins, nbins)};
        },
        [centers, nbins](Node& n) {
            const double sigma = n.input_data(0).values[0];
            if (!(sigma > 0.0)) throw std::runtime_error("resolution must be positive");
            auto& out = n.output_data(0).values;
            const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
            for (std::size_t j = 0; j < nbins; ++j) {
                double colsum = 0.0;
                for (std::size_t i = 0; i < nbins; ++i) {
                    const double d = centers[i] - centers[j];
                    const double w = std::exp(-d * d * inv2s2);
                    out[i * nbins + j] = w;
                    colsum += w;
                }
                for (std::size_t i = 0; i < nbins; ++i) out[i * nbins + j] /= colsum;
            }
        });
    ctx.graph().bind(res.output(), matrix.in(0));

    Node& apply = transforms::make_smear_apply(ctx.graph(), ctx.node_name("smear_apply"));
    ctx.graph().bind(matrix.out(0), apply.in(0));

    ctx.provide(0, apply.out(0), {&apply.in(1)});
    ctx.expect(0, apply.in(1));
}

std::vector<double> load_counts_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open data file '" + path + "'");
    std::vector<double> counts;
    std::string line;
    while (std::getline(in, line)) {
        const auto start = line.find_first_not_of(" \t");
        if (start == std::string::npos || line[start] == '#') continue;
        try {
            counts.push_back(std::stod(line.substr(start)));
        } catch (const std::exception&) {
            throw ConfigError("bad count line in '" + path + "': " + line);
        }
    }
    return counts;
}

/// Observed-counts histogram from an inline array or a text file
/// (one count per line, '#' comments).
void histogram_data_factory(BundleContext& ctx) {
    require_counts(ctx, 0, 1, 0);
    const std::vector<double> edges = parse_edges(ctx.options().at("edges"));
    const std::size_t nbins = edges.size() - 1;

    std::vector<double> counts;
    if (ctx.options().contains("counts"))
        counts = ctx.options().at("counts").get<std::vector<double>>();
    else if (ctx.options().contains("path"))
        counts = load_counts_file(ctx.options().at("path").get<std::string>());
    else
        throw ConfigError("histogram_data needs 'counts' or 'path'");
    if (counts.size() != nbins)
        throw ConfigError("histogram_data: " + std::to_string(counts.size()) +
                          " counts for " + std::to_string(nbins) + " bins");

    auto storage = std::make_shared<std::vector<double>>(std::move(counts));
    DataType dtype = DataType::histogram(edges);
    Node& node = ctx.graph().add_node(
        ctx.node_name("data"), "data", 0, 1,
        [dtype](const Node&) { return std::vector<DataType>{dtype}; },
        [storage](Node& n) { n.output_data(0).values = *storage; });

    ctx.provide(0, node.out(0));
    ctx.register_data_handle(0, DataHandle{&node, storage});
}

/// Gauss-Legendre sampler/collector pair: provides the binned integral
/// (callable on the integrand values) and the sample-point grid.
void quadrature_factory(BundleContext& ctx) {
    require_counts(ctx, 0, 2, 1);
    auto rule = transforms::make_quadrature_rule(parse_edges(ctx.options().at("edges")),
                                                 ctx.options().value("order", 2));

    Node& sampler = transforms::make_gl_sampler(ctx.graph(), ctx.node_name("gl_sampler"), rule);
    Node& collector =
        transforms::make_gl_collector(ctx.graph(), ctx.node_name("gl_collector"), rule);

    ctx.provide(0, collector.out(0), {&collector.in(0)});
    ctx.provide(1, sampler.out(0));
    ctx.expect(0, collector.in(0));
}

} // namespace

BundleCatalog BundleCatalog::with_builtins() {
    BundleCatalog c;
    c.register_kind("gaussian_peak", gaussian_peak_factory);
    c.register_kind("flat_curve", flat_curve_factory);
    c.register_kind("exp_poly", exp_poly_factory);
    c.register_kind("norm", norm_factory);
    c.register_kind("smear_gauss", smear_gauss_factory);
    c.register_kind("histogram_data", histogram_data_factory);
    c.register_kind("quadrature", quadrature_factory);
    return c;
}

// ---------------------------------------------------------------------------
// instantiation
// ---------------------------------------------------------------------------

namespace {

void check_placeholders(const std::string& tmpl, const std::vector<std::string>& major_axes) {
    std::size_t i = 0;
    while ((i = tmpl.find('{', i)) != std::string::npos) {
        const std::size_t close = tmpl.find('}', i);
        if (close == std::string::npos)
            throw ConfigError("unterminated placeholder in template '" + tmpl + "'");
        const std::string axis = tmpl.substr(i + 1, close - i - 1);
        if (std::find(major_axes.begin(), major_axes.end(), axis) == major_axes.end())
            throw UnknownAxis("template '" + tmpl + "' uses non-major axis '" + axis + "'");
        i = close + 1;
    }
}

} // namespace

void instantiate_bundle(const BundleConfig& cfg, const expr::IndexSpace& space,
                        const BundleCatalog& catalog, Graph& g, ParameterRegistry& params,
                        NameRegistry& names, std::map<std::string, DataHandle>* data_handles) {
    const BundleFactory& factory = catalog.at(cfg.kind);

    for (const auto& axis : cfg.major_axes)
        if (!space.has(axis))
            throw UnknownAxis("bundle '" + cfg.kind + "' major axis '" + axis +
                              "' is not in the index space");
    for (const auto& spec : cfg.parameters) check_placeholders(spec.name_template, cfg.major_axes);
    for (const auto& tmpl : cfg.provides) check_placeholders(tmpl, cfg.major_axes);
    for (const auto& tmpl : cfg.expects) check_placeholders(tmpl, cfg.major_axes);

    std::map<std::string, Parameter*> shared_params;

    // odometer over the major-axis label combinations
    std::vector<std::size_t> counter(cfg.major_axes.size(), 0);
    while (true) {
        BundleContext ctx;
        ctx.graph_ = &g;
        ctx.params_ = &params;
        ctx.names_ = &names;
        ctx.cfg_ = &cfg;
        ctx.shared_params_ = &shared_params;
        ctx.data_handles_ = data_handles;
        for (std::size_t a = 0; a < cfg.major_axes.size(); ++a)
            ctx.combo_[cfg.major_axes[a]] = space.labels(cfg.major_axes[a])[counter[a]];

        factory(ctx);

        if (cfg.major_axes.empty()) return;
        std::size_t a = cfg.major_axes.size();
        while (a > 0) {
            --a;
            if (++counter[a] < space.labels(cfg.major_axes[a]).size()) break;
            counter[a] = 0;
            if (a == 0) return;
        }
    }
}

std::vector<double> parse_edges(const nlohmann::json& spec) {
    if (spec.is_array()) {
        auto edges = spec.get<std::vector<double>>();
        if (edges.size() < 2) throw ConfigError("edges array needs at least 2 entries");
        return edges;
    }
    if (spec.is_object()) {
        const double lo = spec.at("lo").get<double>();
        const double hi = spec.at("hi").get<double>();
        const int n = spec.at("n").get<int>();
        if (!(hi > lo) || n < 1) throw ConfigError("edges need hi > lo and n >= 1");
        std::vector<double> edges(n + 1);
        for (int i = 0; i <= n; ++i) edges[i] = lo + (hi - lo) * i / n;
        return edges;
    }
    throw ConfigError("edges must be an array or {lo, hi, n}");
}

} // namespace dagfit
