#include <doctest.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "dagfit/rng.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output; // stdout + stderr
};

std::string bin_path() {
    const char* env = std::getenv("DAGFIT_BIN");
    REQUIRE_MESSAGE(env != nullptr, "DAGFIT_BIN must point at the dagfit binary");
    return env;
}

std::string data_dir() {
    const char* env = std::getenv("DAGFIT_DATA");
    REQUIRE_MESSAGE(env != nullptr, "DAGFIT_DATA must point at tests/data");
    return env;
}

RunResult run(const std::string& args) {
    const std::string cmd = bin_path() + " " + args + " 2>&1";
    RunResult r;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buf{};
    std::size_t n = 0;
    while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
    const int status = pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / "dagfit_cli_test";
    fs::create_directories(dir);
    return dir;
}

std::string toy_config() { return data_dir() + "/toy.json"; }

} // namespace

TEST_CASE("cli build reports the frozen model sizes") {
    const RunResult r = run("build --config " + toy_config());
    CHECK(r.exit_code == 0);
    CHECK(r.output == slurp(data_dir() + "/build_report.golden"));
}

TEST_CASE("cli build writes dot and parameter-table exports") {
    const fs::path dot = temp_dir() / "graph.dot";
    const fs::path table = temp_dir() / "params.txt";
    const RunResult r = run("build --config " + toy_config() + " --dot " + dot.string() +
                            " --params " + table.string());
    CHECK(r.exit_code == 0);
    const std::string dot_text = slurp(dot);
    CHECK(dot_text.find("digraph") != std::string::npos);
    CHECK(dot_text.find("->") != std::string::npos);
    const std::string table_text = slurp(table);
    CHECK(table_text.find("peak.mean") != std::string::npos);
    CHECK(table_text.find("constrained") != std::string::npos);
}

TEST_CASE("cli config errors exit with code 2") {
    SUBCASE("unknown bundle kind is named in the diagnostic") {
        const fs::path cfg = temp_dir() / "bad_kind.json";
        std::ofstream(cfg) << R"({"bundles": [{"kind": "warp_drive"}],)"
                           << R"( "statistic": {"kind": "poisson", "prediction": "p", "data": "d"}})";
        const RunResult r = run("build --config " + cfg.string());
        CHECK(r.exit_code == 2);
        CHECK(r.output.find("warp_drive") != std::string::npos);
    }
    SUBCASE("empty config has no statistic") {
        const fs::path cfg = temp_dir() / "empty.json";
        std::ofstream(cfg) << "{}";
        const RunResult r = run("build --config " + cfg.string());
        CHECK(r.exit_code == 2);
        CHECK(r.output.find("no statistic defined") != std::string::npos);
    }
    SUBCASE("unparseable config") {
        const fs::path cfg = temp_dir() / "broken.json";
        std::ofstream(cfg) << "{ this is not json";
        const RunResult r = run("fit --config " + cfg.string() + " --output /dev/null");
        CHECK(r.exit_code == 2);
    }
    SUBCASE("scan of an unknown parameter") {
        const RunResult r = run("scan --config " + toy_config() +
                                " --param nobody --lo 0 --hi 1 --points 3 --output /dev/null");
        CHECK(r.exit_code == 2);
    }
}

TEST_CASE("cli fit closes on zero-noise data and is deterministic") {
    const fs::path out1 = temp_dir() / "fit1.json";
    const fs::path out2 = temp_dir() / "fit2.json";
    const RunResult r1 = run("fit --config " + toy_config() + " --output " + out1.string());
    CHECK(r1.exit_code == 0);
    const RunResult r2 = run("fit --config " + toy_config() + " --output " + out2.string());
    CHECK(r2.exit_code == 0);
    CHECK(slurp(out1) == slurp(out2));
    CHECK(r1.output == r2.output);

    // the frozen counts are the exact prediction at the central values
    const auto fit = nlohmann::json::parse(slurp(out1));
    CHECK(fit.at("converged").get<bool>());
    const std::map<std::string, std::pair<double, double>> truth = {
        {"peak.mean", {5.0, 0.2}},   {"bkg.level", {200.0, 20.0}}, {"bkg.lin", {0.2, 0.2}},
        {"bkg.quad", {-0.1, 0.2}},   {"smear.res", {0.5, 0.15}},   {"norm", {1.0, 0.1}},
    };
    for (const auto& [name, ts] : truth) {
        const double fitted = fit.at("values").at(name).get<double>();
        CHECK_MESSAGE(std::fabs(fitted - ts.first) <= 1e-4 * ts.second, name);
    }
}

TEST_CASE("cli fit exits 3 on non-convergence but still writes the result") {
    // melt the evaluation budget so the minimizer cannot finish
    nlohmann::json cfg = nlohmann::json::parse(slurp(toy_config()));
    cfg["fit"]["max_evaluations"] = 3;
    const fs::path cfg_path = temp_dir() / "starved.json";
    std::ofstream(cfg_path) << cfg.dump();
    const fs::path out = temp_dir() / "starved_fit.json";
    const RunResult r = run("fit --config " + cfg_path.string() + " --output " + out.string());
    CHECK(r.exit_code == 3);
    const auto fit = nlohmann::json::parse(slurp(out));
    CHECK(!fit.at("converged").get<bool>());
}

TEST_CASE("cli scan emits a plot-ready deterministic csv") {
    const fs::path out1 = temp_dir() / "scan1.csv";
    const fs::path out2 = temp_dir() / "scan2.csv";
    const std::string args = "scan --config " + toy_config() +
                             " --param peak.mean --lo 4.9 --hi 5.1 --points 5 --output ";
    CHECK(run(args + out1.string()).exit_code == 0);
    CHECK(run(args + out2.string()).exit_code == 0);
    const std::string csv = slurp(out1);
    CHECK(csv == slurp(out2));

    std::istringstream is(csv);
    std::string header;
    std::getline(is, header);
    CHECK(header == "value,fun_min,converged");
    double min_fun = 1e300;
    int rows = 0;
    std::string line;
    while (std::getline(is, line)) {
        ++rows;
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        min_fun = std::min(min_fun, std::stod(line.substr(c1 + 1, c2 - c1 - 1)));
        CHECK(line.substr(c2 + 1) == "1");
    }
    CHECK(rows == 5);
    // the grid passes through the zero-noise truth, where the statistic is 0
    CHECK(min_fun < 1e-6);
}

TEST_CASE("cli scan runs the config scan requests when no flags are given") {
    nlohmann::json cfg = nlohmann::json::parse(slurp(toy_config()));
    const fs::path csv = temp_dir() / "scan_from_config.csv";
    cfg["scans"] = {{{"param", "peak.mean"},
                     {"lo", 4.95},
                     {"hi", 5.05},
                     {"points", 3},
                     {"output", csv.string()}}};
    const fs::path path = temp_dir() / "with_scans.json";
    std::ofstream(path) << cfg.dump();
    const RunResult r = run("scan --config " + path.string());
    CHECK(r.exit_code == 0);
    const std::string text = slurp(csv);
    CHECK(text.rfind("value,fun_min,converged\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 4);
}

TEST_CASE("cli build --dump writes the one-node-per-line serialization") {
    const fs::path dump = temp_dir() / "graph.txt";
    const RunResult r = run("build --config " + toy_config() + " --dump " + dump.string());
    CHECK(r.exit_code == 0);
    const std::string text = slurp(dump);
    CHECK(std::count(text.begin(), text.end(), '\n') == 18); // one line per node
    CHECK(text.find("gl_sampler") != std::string::npos);
    CHECK(text.find(" | in:") != std::string::npos);
    CHECK(text.find("Histogram[40]") != std::string::npos);
}

TEST_CASE("cli scan with a single point samples lo only") {
    const fs::path out = temp_dir() / "scan_single.csv";
    const RunResult r = run("scan --config " + toy_config() +
                            " --param peak.mean --lo 4.75 --hi 5.25 --points 1 --output " +
                            out.string());
    CHECK(r.exit_code == 0);
    std::istringstream is(slurp(out));
    std::string header, row, extra;
    std::getline(is, header);
    REQUIRE(std::getline(is, row));
    CHECK(row.substr(0, row.find(',')) == "4.75");
    CHECK(!std::getline(is, extra));
}

TEST_CASE("cli mc generates seeded, reproducible pseudo-experiments") {
    const fs::path dir1 = temp_dir() / "mc1";
    const fs::path dir2 = temp_dir() / "mc2";
    fs::remove_all(dir1);
    fs::remove_all(dir2);
    const std::string args = "mc --config " + toy_config() + " --seed 99 --n 3 --output ";
    CHECK(run(args + dir1.string()).exit_code == 0);
    CHECK(run(args + dir2.string()).exit_code == 0);

    int files = 0;
    for (const auto& entry : fs::directory_iterator(dir1)) {
        ++files;
        const fs::path twin = dir2 / entry.path().filename();
        CHECK(slurp(entry.path()) == slurp(twin));
    }
    CHECK(files == 3);

    SUBCASE("counts parse as non-negative integers matching the bin count") {
        std::istringstream is(slurp(dir1 / "pseudo_00000.txt"));
        std::string line;
        int bins = 0;
        while (std::getline(is, line)) {
            if (line.empty() || line[0] == '#') continue;
            ++bins;
            CHECK(std::stod(line) >= 0.0);
        }
        CHECK(bins == 40);
    }
}

TEST_CASE("cli mc rejects invalid n and unwritable directories") {
    CHECK(run("mc --config " + toy_config() + " --seed 1 --n -5 --output /tmp/x").exit_code == 2);
    CHECK(run("mc --config " + toy_config() + " --seed 1 --n 1 --output /proc/nope/dir")
              .exit_code == 2);
}

TEST_CASE("cli mc with n=0 writes nothing and succeeds") {
    const fs::path dir = temp_dir() / "mc_zero";
    fs::remove_all(dir);
    const RunResult r = run("mc --config " + toy_config() + " --seed 1 --n 0 --output " +
                            dir.string());
    CHECK(r.exit_code == 0);
    int files = 0;
    for ([[maybe_unused]] const auto& entry : fs::directory_iterator(dir)) ++files;
    CHECK(files == 0);
}

TEST_CASE("cli fit accepts a pseudo-experiment data override") {
    const fs::path dir = temp_dir() / "mc_fit";
    fs::remove_all(dir);
    REQUIRE(run("mc --config " + toy_config() + " --seed 7 --n 1 --output " + dir.string())
                .exit_code == 0);
    const fs::path out = temp_dir() / "fit_pseudo.json";
    const RunResult r = run("fit --config " + toy_config() + " --data " +
                            (dir / "pseudo_00000.txt").string() + " --output " + out.string());
    CHECK(r.exit_code == 0);
    const auto fit = nlohmann::json::parse(slurp(out));
    CHECK(fit.at("converged").get<bool>());
    CHECK(fit.at("fun").get<double>() > 1.0); // fluctuated data: non-zero statistic
}

TEST_CASE("cli expr parses and dumps ASTs") {
    const RunResult pretty = run("expr \"a*b + c\"");
    CHECK(pretty.exit_code == 0);
    CHECK(pretty.output == "a * b + c\n");

    const RunResult dumped = run("expr \"a*b + c\" --dump-ast");
    CHECK(dumped.exit_code == 0);
    CHECK(dumped.output.find("Add") != std::string::npos);
    CHECK(dumped.output.find("  Mul") != std::string::npos);

    const RunResult bad = run("expr \"a + \"");
    CHECK(bad.exit_code == 2);
    CHECK(bad.output.find("expected term") != std::string::npos);
}

TEST_CASE("cli fit supports the chi2 statistic with covariance export") {
    // flat background over 4 bins, chi2 with data-driven diagonal plus one
    // systematic group; the level lands on the weighted mean of the counts
    nlohmann::json cfg = {
        {"bundles",
         {{{"kind", "quadrature"},
           {"provides", {"quad", "quad.points"}},
           {"expects", {"quad.f"}},
           {"options", {{"edges", {{"lo", 0.0}, {"hi", 4.0}, {"n", 4}}}, {"order", 2}}}},
          {{"kind", "flat_curve"},
           {"parameters",
            {{{"name", "bkg.level"}, {"central", 90.0}, {"sigma", 10.0}, {"bounds", {1.0, 1e4}}}}},
           {"provides", {"bkg"}},
           {"expects", {"bkg.points"}}},
          {{"kind", "histogram_data"},
           {"provides", {"data"}},
           {"options",
            {{"edges", {{"lo", 0.0}, {"hi", 4.0}, {"n", 4}}},
             {"counts", {95.0, 105.0, 98.0, 102.0}}}}}}},
        {"groups",
         {{{"name", "bkg_syst"}, {"members", {"bkg.level"}}, {"correlation", {{1.0}}}}}},
        {"expressions", {{"prediction", "quad(bkg(quad.points))"}}},
        {"statistic",
         {{"kind", "chi2"},
          {"prediction", "prediction"},
          {"data", "data"},
          {"covariance", {{"stat_part", "data"}, {"syst_groups", {"bkg_syst"}}}}}},
        {"fit", {{"reassemble_covariance", false}}}};
    const fs::path path = temp_dir() / "chi2.json";
    std::ofstream(path) << cfg.dump(2);

    const fs::path out = temp_dir() / "chi2_fit.json";
    const fs::path cov = temp_dir() / "chi2_cov.csv";
    const RunResult r = run("fit --config " + path.string() + " --output " + out.string() +
                            " --cov " + cov.string());
    CHECK(r.exit_code == 0);
    const auto fit = nlohmann::json::parse(slurp(out));
    CHECK(fit.at("converged").get<bool>());
    CHECK(fit.at("values").at("bkg.level").get<double>() == doctest::Approx(100.0).epsilon(0.01));

    // covariance CSV: 4x4, diagonal dominated by the counts plus the
    // systematic block
    std::istringstream is(slurp(cov));
    std::string line;
    int rows = 0;
    while (std::getline(is, line)) {
        ++rows;
        CHECK(std::count(line.begin(), line.end(), ',') == 3);
    }
    CHECK(rows == 4);

    SUBCASE("scan crossings at +-1 sigma reproduce the hessian error") {
        const double level = fit.at("values").at("bkg.level").get<double>();
        const double err = fit.at("errors").at("bkg.level").get<double>();
        const double fun0 = fit.at("fun").get<double>();
        const fs::path csv = temp_dir() / "chi2_scan.csv";
        char args[512];
        std::snprintf(args, sizeof args,
                      "scan --config %s --param bkg.level --lo %.17g --hi %.17g --points 3 "
                      "--output %s",
                      path.string().c_str(), level - err, level + err, csv.string().c_str());
        REQUIRE(run(args).exit_code == 0);
        std::istringstream scan_is(slurp(csv));
        std::string header, line;
        std::getline(scan_is, header);
        std::vector<double> fun_min;
        while (std::getline(scan_is, line)) {
            const auto c1 = line.find(',');
            const auto c2 = line.find(',', c1 + 1);
            fun_min.push_back(std::stod(line.substr(c1 + 1, c2 - c1 - 1)));
        }
        REQUIRE(fun_min.size() == 3);
        // single free parameter: the profile is the raw quadratic
        CHECK(std::fabs((fun_min[0] - fun0) - 1.0) <= 1e-2);
        CHECK(std::fabs((fun_min[2] - fun0) - 1.0) <= 1e-2);
    }

    SUBCASE("per-iteration covariance reassembly converges to the same level") {
        cfg["fit"]["reassemble_covariance"] = true;
        const fs::path path2 = temp_dir() / "chi2_reassemble.json";
        std::ofstream(path2) << cfg.dump(2);
        const fs::path out2 = temp_dir() / "chi2_fit2.json";
        const RunResult r2 = run("fit --config " + path2.string() + " --output " + out2.string());
        CHECK(r2.exit_code == 0);
        const auto fit2 = nlohmann::json::parse(slurp(out2));
        CHECK(fit2.at("converged").get<bool>());
        CHECK(fit2.at("values").at("bkg.level").get<double>() ==
              doctest::Approx(100.0).epsilon(0.02));
    }
}

TEST_CASE("poisson sampler mean matches the prediction") {
    dagfit::Rng rng(4242);
    const double mean = 100.0;
    const int n = 10000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += static_cast<double>(rng.poisson(mean));
    const double sample_mean = sum / n;
    CHECK(std::fabs(sample_mean - mean) <= 0.3); // 3 sigma of the mean of 10^4 draws
}

TEST_CASE("multi-detector config combines replicated bundles with a dsl sum") {
    // one shared spectrum, per-detector efficiency scales, stacked with
    // sum[d| ...]; the shared subexpression is built once (CSE) and its
    // output feeds both detector branches
    nlohmann::json cfg = {
        {"index_space", {{"axes", {{{"name", "d"}, {"labels", {"ad1", "ad2"}}}}}}},
        {"bundles",
         {{{"kind", "quadrature"},
           {"provides", {"quad", "quad.points"}},
           {"expects", {"quad.f"}},
           {"options", {{"edges", {{"lo", 0.0}, {"hi", 4.0}, {"n", 8}}}, {"order", 2}}}},
          {{"kind", "gaussian_peak"},
           {"parameters",
            {{{"name", "peak.amp"}, {"central", 100.0}, {"sigma", 10.0}, {"bounds", {0.0, 1e6}}},
             {{"name", "peak.mean"}, {"central", 2.0}, {"sigma", 0.1}, {"bounds", {0.0, 4.0}}},
             {{"name", "peak.width"}, {"central", 0.5}, {"sigma", 0.0}}}},
           {"provides", {"peak"}},
           {"expects", {"peak.points"}}},
          {{"kind", "norm"},
           {"parameters",
            {{{"name", "eff.{d}"},
              {"central", 1.0},
              {"sigma", 0.05},
              {"constrained", true},
              {"bounds", {0.1, 3.0}}}}},
           {"major_axes", {"d"}},
           {"provides", {"normed"}},
           {"expects", {"normed.input"}}},
          {{"kind", "histogram_data"},
           {"provides", {"data"}},
           {"options",
            {{"edges", {{"lo", 0.0}, {"hi", 4.0}, {"n", 8}}},
             {"counts", {0, 5, 34, 86, 86, 34, 5, 0}}}}}}},
        {"expressions", {{"prediction", "sum[d| normed[d](quad(peak(quad.points)))]"}}},
        {"statistic",
         {{"kind", "poisson"},
          {"prediction", "prediction"},
          {"data", "data"},
          {"pulls", {"eff.ad1", "eff.ad2"}}}}};

    const fs::path path = temp_dir() / "multi.json";
    std::ofstream(path) << cfg.dump(2);
    const RunResult build = run("build --config " + path.string());
    CHECK(build.exit_code == 0);
    // amp, mean, width, eff.ad1, eff.ad2
    CHECK(build.output.find("parameters: 5 (2 free, 2 constrained, 1 fixed)") !=
          std::string::npos);

    const fs::path out = temp_dir() / "multi_fit.json";
    const RunResult fit = run("fit --config " + path.string() + " --output " + out.string());
    CHECK(fit.exit_code == 0);
    const auto result = nlohmann::json::parse(slurp(out));
    CHECK(result.at("converged").get<bool>());
    CHECK(result.at("values").at("peak.mean").get<double>() == doctest::Approx(2.0).epsilon(0.05));
}
