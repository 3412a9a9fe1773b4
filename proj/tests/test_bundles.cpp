#include <doctest.h>

#include <cmath>

#include "dagfit/bundles.hpp"
#include "dagfit/transforms.hpp"
#include "helpers.hpp"

using namespace dagfit;

namespace {

struct Bench {
    Graph g;
    ParameterRegistry params{g};
    NameRegistry names;
    expr::IndexSpace space;
    BundleCatalog catalog = BundleCatalog::with_builtins();
    std::map<std::string, DataHandle> data;

    void instantiate(const BundleConfig& cfg) {
        instantiate_bundle(cfg, space, catalog, g, params, names, &data);
    }
};

BundleConfig norm_config(const std::string& provide, const std::string& param) {
    BundleConfig cfg;
    cfg.kind = "norm";
    cfg.parameters = {{param, 1.0, 0.1, true, {}}};
    cfg.provides = {provide};
    cfg.expects = {provide + ".input"};
    return cfg;
}

} // namespace

TEST_CASE("catalog registration") {
    BundleCatalog cat = BundleCatalog::with_builtins();
    CHECK(cat.contains("gaussian_peak"));
    CHECK(cat.contains("norm"));
    CHECK(cat.contains("smear_gauss"));
    CHECK(cat.contains("histogram_data"));

    SUBCASE("custom kinds can be registered and used") {
        bool called = false;
        cat.register_kind("custom", [&called](BundleContext&) { called = true; });
        Bench b;
        BundleConfig cfg;
        cfg.kind = "custom";
        instantiate_bundle(cfg, b.space, cat, b.g, b.params, b.names);
        CHECK(called);
    }
    SUBCASE("unknown kinds are rejected") {
        Bench b;
        BundleConfig cfg;
        cfg.kind = "nope";
        CHECK_THROWS_AS(b.instantiate(cfg), UnknownBundleKind);
    }
    SUBCASE("re-registering a kind is rejected") {
        CHECK_THROWS_AS(cat.register_kind("norm", [](BundleContext&) {}), DuplicateKind);
    }
}

TEST_CASE("bundle with no major axes registers bare names once") {
    Bench b;
    b.instantiate(norm_config("normed", "norm"));
    CHECK(b.names.contains("normed"));
    CHECK(b.names.contains("normed.input"));
    CHECK(b.params.contains("norm"));
    CHECK(b.params.at("norm").constrained());

    // duplicate instantiation collides in the registry
    CHECK_THROWS_AS(b.instantiate(norm_config("normed", "norm")), DuplicateName);
}

TEST_CASE("replication over detectors instantiates per-label names") {
    Bench b;
    b.space.add_axis("d", {"a", "b"});
    BundleConfig cfg = norm_config("eff", "eff.{d}");
    cfg.major_axes = {"d"};
    b.instantiate(cfg);

    CHECK(b.names.contains("eff.a"));
    CHECK(b.names.contains("eff.b"));
    CHECK(b.params.contains("eff.a"));
    CHECK(b.params.contains("eff.b"));
    CHECK(b.names.contains("eff.input.a")); // expects template, label appended
}

TEST_CASE("a placeholder-free parameter template is shared across instances") {
    Bench b;
    b.space.add_axis("d", {"a", "b"});
    BundleConfig cfg = norm_config("scaled", "global_scale");
    cfg.major_axes = {"d"};
    b.instantiate(cfg);

    CHECK(b.params.contains("global_scale"));
    CHECK(b.params.size() == 1);
    CHECK(b.names.contains("scaled.a"));
    CHECK(b.names.contains("scaled.b"));
}

TEST_CASE("two-axis replication scales the node count by the instance count") {
    Bench single;
    single.instantiate(norm_config("n", "p"));
    const std::size_t per_instance = single.g.node_count() - 1; // minus the parameter node

    Bench b;
    b.space.add_axis("d", {"a", "b"});
    b.space.add_axis("r", {"r1", "r2", "r3"});
    BundleConfig cfg = norm_config("n", "p.{d}.{r}");
    cfg.major_axes = {"d", "r"};
    b.instantiate(cfg);

    // 6 instances: per-instance nodes plus one variable node per parameter
    CHECK(b.g.node_count() == 6 * per_instance + 6);
    int registered = 0;
    for (const std::string dv : {"a", "b"})
        for (const std::string rv : {"r1", "r2", "r3"})
            if (b.names.contains("n." + dv + "." + rv)) ++registered;
    CHECK(registered == 6);
}

TEST_CASE("instances are independent: one parameter taints one branch") {
    Bench b;
    b.space.add_axis("d", {"a", "b"});
    BundleConfig cfg = norm_config("scaled", "sc.{d}");
    cfg.major_axes = {"d"};
    b.instantiate(cfg);

    Node& base = transforms::make_constant(b.g, "base", std::vector<double>{1.0, 2.0});
    b.g.bind(base.out(0), *b.names.at("scaled.input.a").input);
    b.g.bind(base.out(0), *b.names.at("scaled.input.b").input);
    b.g.propagate_types();

    Node& out_a = b.names.at("scaled.a").output->node();
    Node& out_b = b.names.at("scaled.b").output->node();
    b.g.touch(out_a);
    b.g.touch(out_b);

    b.params.at("sc.a").set_value(2.0);
    CHECK(out_a.tainted());
    CHECK(!out_b.tainted());
    const auto evals_b = out_b.eval_count();
    b.g.touch(out_a);
    b.g.touch(out_b);
    CHECK(out_b.eval_count() == evals_b);
}

TEST_CASE("registry keys equal the template expansion set exactly") {
    Bench b;
    b.space.add_axis("d", {"a", "b"});
    BundleConfig cfg = norm_config("k", "kp.{d}");
    cfg.major_axes = {"d"};
    b.instantiate(cfg);

    std::set<std::string> expected{"k.a", "k.b", "k.input.a", "k.input.b"};
    std::set<std::string> got;
    for (const auto& key : b.names.keys()) got.insert(key);
    CHECK(got == expected);
}

TEST_CASE("gaussian peak bundle evaluates the curve on a grid") {
    Bench b;
    BundleConfig cfg;
    cfg.kind = "gaussian_peak";
    cfg.parameters = {{"amp", 2.0, 0.2, false, {}},
                      {"mean", 1.0, 0.1, false, {}},
                      {"width", 0.5, 0.05, false, {}}};
    cfg.provides = {"peak"};
    cfg.expects = {"peak.points"};
    b.instantiate(cfg);

    Node& grid = transforms::make_constant(b.g, "grid", std::vector<double>{0.0, 1.0, 2.0});
    b.g.bind(grid.out(0), *b.names.at("peak.points").input);
    b.g.propagate_types();
    Node& peak = b.names.at("peak").output->node();
    b.g.touch(peak);
    const auto& v = peak.out(0).data().values;
    CHECK(v[1] == doctest::Approx(2.0).epsilon(1e-15)); // at the mean
    CHECK(v[0] == doctest::Approx(2.0 * std::exp(-2.0)).epsilon(1e-12));
    CHECK(v[0] == v[2]);
}

TEST_CASE("smear_gauss bundle applies a column-normalized kernel") {
    Bench b;
    BundleConfig cfg;
    cfg.kind = "smear_gauss";
    cfg.parameters = {{"res", 0.5, 0.05, true, {}}};
    cfg.provides = {"smeared"};
    cfg.expects = {"smeared.input"};
    cfg.options = nlohmann::json{{"edges", {{"lo", 0.0}, {"hi", 4.0}, {"n", 8}}}};
    b.instantiate(cfg);

    Node& spike = transforms::make_constant(b.g, "spike.points",
                                            std::vector<double>{0, 0, 0, 10, 0, 0, 0, 0});
    Node& hist = transforms::make_histogram(b.g, "spike",
                                            {0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0});
    b.g.bind(spike.out(0), hist.in(0));
    b.g.bind(hist.out(0), *b.names.at("smeared.input").input);
    b.g.propagate_types();

    Node& smeared = b.names.at("smeared").output->node();
    b.g.touch(smeared);
    const auto& v = smeared.out(0).data().values;
    double total = 0.0;
    for (double x : v) total += x;
    CHECK(total == doctest::Approx(10.0).epsilon(1e-12)); // column-normalized
    CHECK(v[3] > v[2]);
    CHECK(v[2] > v[1]);
    CHECK(v[2] == doctest::Approx(v[4]).epsilon(1e-12)); // symmetric spread
}

TEST_CASE("histogram_data bundle loads counts and exposes a handle") {
    Bench b;
    BundleConfig cfg;
    cfg.kind = "histogram_data";
    cfg.provides = {"data"};
    cfg.options = nlohmann::json{{"edges", {0.0, 1.0, 2.0}}, {"counts", {4.0, 9.0}}};
    b.instantiate(cfg);

    b.g.propagate_types();
    Node& data = b.names.at("data").output->node();
    b.g.touch(data);
    CHECK(data.out(0).data().values == std::vector<double>{4.0, 9.0});
    CHECK(data.out(0).dtype().kind == DataType::Kind::Histogram);

    REQUIRE(b.data.count("data") == 1);
    b.data.at("data").set(std::vector<double>{1.0, 2.0});
    CHECK(data.tainted());
    b.g.touch(data);
    CHECK(data.out(0).data().values == std::vector<double>{1.0, 2.0});
}

TEST_CASE("quadrature bundle integrates a bound curve") {
    Bench b;
    BundleConfig quad;
    quad.kind = "quadrature";
    quad.provides = {"quad", "quad.points"};
    quad.expects = {"quad.f"};
    quad.options = nlohmann::json{{"edges", {0.0, 1.0, 2.0}}, {"order", 3}};
    b.instantiate(quad);

    BundleConfig flat;
    flat.kind = "flat_curve";
    flat.parameters = {{"level", 2.5, 0.1, false, {}}};
    flat.provides = {"bkg"};
    flat.expects = {"bkg.points"};
    b.instantiate(flat);

    b.g.bind(*b.names.at("quad.points").output, *b.names.at("bkg.points").input);
    b.g.bind(*b.names.at("bkg").output, *b.names.at("quad.f").input);
    b.g.propagate_types();

    Node& integral = b.names.at("quad").output->node();
    b.g.touch(integral);
    const auto& v = integral.out(0).data().values;
    CHECK(v[0] == doctest::Approx(2.5).epsilon(1e-14));
    CHECK(v[1] == doctest::Approx(2.5).epsilon(1e-14));
    CHECK(integral.out(0).dtype().kind == DataType::Kind::Histogram);
}

TEST_CASE("templates referencing non-major axes are rejected") {
    Bench b;
    b.space.add_axis("d", {"a"});
    BundleConfig cfg = norm_config("n", "p.{z}");
    cfg.major_axes = {"d"};
    CHECK_THROWS_AS(b.instantiate(cfg), UnknownAxis);
}
