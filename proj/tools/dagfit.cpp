#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dagfit/model.hpp"
#include "dagfit/rng.hpp"

namespace {

using namespace dagfit;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNoConvergence = 3;

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out << content;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

int cmd_build(const std::string& config_path, const std::string& dot_path,
              const std::string& params_path, const std::string& dump_path) {
    Model model(ModelConfig::from_file(config_path));
    if (!model.has_statistic()) throw ConfigError("no statistic defined");
    std::cout << model.report();
    if (!dot_path.empty()) write_file(dot_path, model.graph().to_dot());
    if (!params_path.empty()) write_file(params_path, model.params().dump_table());
    if (!dump_path.empty()) write_file(dump_path, model.graph().dump());
    return kExitOk;
}

int cmd_fit(const std::string& config_path, const std::string& output_path,
            const std::string& data_path, const std::string& cov_path) {
    Model model(ModelConfig::from_file(config_path));
    model.statistic(); // config error before any computation if absent
    if (!data_path.empty()) {
        std::ifstream in(data_path);
        if (!in) throw ConfigError("cannot open data file '" + data_path + "'");
        std::vector<double> counts;
        std::string line;
        while (std::getline(in, line)) {
            const auto start = line.find_first_not_of(" \t");
            if (start == std::string::npos || line[start] == '#') continue;
            counts.push_back(std::stod(line.substr(start)));
        }
        model.data_handle().set(counts);
    }
    model.assemble_covariance();
    if (!cov_path.empty()) write_file(cov_path, to_csv(model.last_covariance()));

    FitProblem problem = model.fit_problem();
    FitResult result = minimize(problem);
    if (result.converged) estimate_errors(problem, result);

    if (!output_path.empty()) write_file(output_path, fit_result_to_json(result));
    for (std::size_t k = 0; k < result.names.size(); ++k)
        std::cout << result.names[k] << " = " << format_double(result.values[k]) << " +- "
                  << format_double(result.errors[k]) << "\n";
    std::cout << "fun = " << format_double(result.fun) << "  nfev = " << result.nfev << "  "
              << (result.converged ? "converged" : "NOT converged") << "\n";
    return result.converged ? kExitOk : kExitNoConvergence;
}

int cmd_scan(const std::string& config_path, const std::string& param, double lo, double hi,
             int points, const std::string& output_path) {
    const ModelConfig config = ModelConfig::from_file(config_path);
    Model model(config);
    model.statistic();
    model.assemble_covariance();

    std::vector<ScanRequest> requests;
    if (!param.empty()) {
        if (output_path.empty()) throw ConfigError("scan needs --output");
        if (points < 1) throw ConfigError("scan needs at least 1 point");
        requests.push_back(ScanRequest{param, lo, hi, points, output_path});
    } else {
        requests = config.scans;
        if (requests.empty())
            throw ConfigError("no scan requested (pass --param or add a 'scans' section)");
    }

    for (const ScanRequest& req : requests) {
        Parameter& target = model.params().at(req.param);
        FitProblem problem = model.fit_problem();
        if (std::find(problem.free.begin(), problem.free.end(), &target) == problem.free.end())
            throw ConfigError("scan parameter '" + req.param + "' is not free");

        // settle at the minimum so the profile warm-starts from the best fit
        minimize(problem);

        std::vector<double> grid(req.points);
        for (int i = 0; i < req.points; ++i)
            grid[i] = req.points == 1 ? req.lo
                                      : req.lo + (req.hi - req.lo) * i / (req.points - 1);

        std::ostringstream csv;
        csv << "value,fun_min,converged\n";
        for (const ScanPoint& pt : profile_scan(problem, target, grid))
            csv << format_double(pt.value) << "," << format_double(pt.fun_min) << ","
                << (pt.converged ? 1 : 0) << "\n";
        write_file(req.output, csv.str());
        std::cout << "scan of " << req.param << ": " << req.points << " point(s) -> "
                  << req.output << "\n";
    }
    return kExitOk;
}

int cmd_mc(const std::string& config_path, std::uint64_t seed, int n,
           const std::string& output_dir) {
    if (n < 0) throw ConfigError("number of pseudo-experiments must be >= 0");
    Model model(ModelConfig::from_file(config_path));
    model.statistic();

    model.graph().touch(model.prediction().node());
    const std::vector<double> pred = model.prediction().data().values;

    std::error_code ec;
    std::filesystem::create_directories(output_dir, ec);
    if (!std::filesystem::is_directory(output_dir))
        throw ConfigError("cannot create output directory '" + output_dir + "'");

    for (int k = 0; k < n; ++k) {
        Rng rng(seed, static_cast<std::uint64_t>(k));
        std::ostringstream os;
        os << "# pseudo-experiment " << k << " (seed " << seed << ")\n";
        for (double mu : pred) os << rng.poisson(mu) << "\n";
        char name[32];
        std::snprintf(name, sizeof name, "pseudo_%05d.txt", k);
        write_file((std::filesystem::path(output_dir) / name).string(), os.str());
    }
    std::cout << "wrote " << n << " pseudo-experiment(s) to " << output_dir << "\n";
    return kExitOk;
}

int cmd_expr(const std::string& source, bool dump) {
    const expr::ExprPtr ast = expr::parse(source);
    if (dump)
        std::cout << expr::dump_ast(ast);
    else
        std::cout << expr::pretty_print(ast) << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"dagfit - dataflow model builder and fitter"};
    app.require_subcommand(1);

    std::string config_path, output_path, dot_path, params_path, data_path, cov_path, dump_path;
    std::string param_name, expr_source, output_dir;
    double lo = 0.0, hi = 1.0;
    int points = 1, n_mc = 0;
    std::uint64_t seed = 0;
    bool dump_ast = false;

    auto* build = app.add_subcommand("build", "build the model and report sizes");
    build->add_option("--config", config_path, "model config (JSON)")->required();
    build->add_option("--dot", dot_path, "write GraphViz export");
    build->add_option("--params", params_path, "write flat parameter table");
    build->add_option("--dump", dump_path, "write the one-node-per-line graph dump");

    auto* fit = app.add_subcommand("fit", "minimize the statistic and estimate errors");
    fit->add_option("--config", config_path, "model config (JSON)")->required();
    fit->add_option("--output", output_path, "fit result JSON path")->required();
    fit->add_option("--data", data_path, "override observed counts (one per line)");
    fit->add_option("--cov", cov_path, "write the assembled chi2 covariance as CSV");

    auto* scan = app.add_subcommand("scan", "profile scan of one parameter");
    scan->add_option("--config", config_path, "model config (JSON)")->required();
    scan->add_option("--param", param_name, "parameter to scan (default: config scan requests)");
    scan->add_option("--lo", lo, "grid start");
    scan->add_option("--hi", hi, "grid end");
    scan->add_option("--points", points, "grid size");
    scan->add_option("--output", output_path, "CSV output path");

    auto* mc = app.add_subcommand("mc", "generate Poisson pseudo-experiments");
    mc->add_option("--config", config_path, "model config (JSON)")->required();
    mc->add_option("--seed", seed, "generator seed")->required();
    mc->add_option("--n", n_mc, "number of pseudo-experiments")->required();
    mc->add_option("--output", output_dir, "output directory")->required();

    auto* expr_cmd = app.add_subcommand("expr", "parse an expression");
    expr_cmd->add_option("expression", expr_source, "expression source")->required();
    expr_cmd->add_flag("--dump-ast", dump_ast, "print the AST as an indented tree");

    CLI11_PARSE(app, argc, argv);

    try {
        if (build->parsed()) return cmd_build(config_path, dot_path, params_path, dump_path);
        if (fit->parsed()) return cmd_fit(config_path, output_path, data_path, cov_path);
        if (scan->parsed()) return cmd_scan(config_path, param_name, lo, hi, points, output_path);
        if (mc->parsed()) return cmd_mc(config_path, seed, n_mc, output_dir);
        if (expr_cmd->parsed()) return cmd_expr(expr_source, dump_ast);
    } catch (const dagfit::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}
