#include "exciton/experiments.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

using namespace exciton;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("exciton_test_" + name);
    fs::remove_all(p);
    return p;
}

const char* kSmallExpect = R"([run]
kind = expect
seed = 3
[device]
sigma = 1
d = 1
[interface]
K = 2
amplitude = 0.05
dist_a = 0
dist_b = 1
[grid]
asymptotic = 16
reference = 16
[rule]
level = 2
)";

} // namespace

TEST_CASE("SHA-256 digest")
{
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("").size() == 64);
}

TEST_CASE("config parsing, defaults and validation")
{
    const RunConfig c = parse_config(kSmallExpect);
    CHECK(c.kind == ExperimentKind::Expect);
    CHECK(c.modes == 2);
    CHECK(c.family.lambdas == std::vector<double>{1.0, 1.0});
    CHECK(c.family.dist.a == 0.0);
    CHECK(c.grid.asymptotic == 16);
    CHECK(c.hash == sha256_hex(kSmallExpect));

    const RunConfig v = parse_config(kSmallExpect, ExperimentKind::Validate1D);
    CHECK(v.kind == ExperimentKind::Validate1D);
    CHECK(v.hash != c.hash);
    CHECK(v.thicknesses.front() == 10.0);

    const RunConfig e = parse_config("[run]\nkind = estimate\n");
    CHECK(e.thicknesses.front() == doctest::Approx(0.1));
    CHECK(e.newton.initial_sigma(e.thicknesses) == 20.5);
    CHECK(e.rule.level == 2);

    const RunConfig b = parse_config("[run]\nkind = validate\n[interface]\nbeta = -2\n");
    CHECK(b.modes == 10);
    CHECK(b.family.lambdas[2] == doctest::Approx(1.0 / 9.0));

    CHECK_THROWS_AS(parse_config("[run]\nkind = expect\nbogus = 1\n"), InputError);
    CHECK_THROWS_AS(parse_config("[run]\nkind = dance\n"), InputError);
    CHECK_THROWS_AS(parse_config("[study]\nthicknesses = 3, 2\n"), InputError);
    CHECK_THROWS_AS(parse_config("[study]\nsigmas = 1, x\n"), InputError);
    CHECK_THROWS_AS(parse_config("[newton]\nbracket_lo = 1\n"), InputError);
    CHECK_THROWS_AS(parse_config("[grid]\nasymptotic_solver = spectral\n"), InputError);
    CHECK_THROWS_AS(load_config("/nonexistent/exciton.cfg"), InputError);
}

TEST_CASE("slope fitting")
{
    std::vector<double> x, e;
    for (int i = 2; i <= 7; ++i) {
        x.push_back(std::ldexp(1.0, -i));
        e.push_back(3.7 * x.back() * x.back());
    }
    const SlopeFit f = fit_slope(x, e);
    CHECK(f.slope == doctest::Approx(2.0).epsilon(0.005));
    CHECK(f.residual < 1e-12);
    CHECK(std::exp(f.intercept) == doctest::Approx(3.7));
    CHECK_THROWS_AS(fit_slope({1.0, 2.0}, {1.0, 2.0}), InputError);
    CHECK_THROWS_AS(fit_slope({1.0, 2.0, 3.0}, {1.0, 0.0, 2.0}), InputError);
}

TEST_CASE("synthetic curves")
{
    SyntheticSpec flat;
    flat.family.amplitude = 0.0;
    flat.rule = build_rule(RuleKind::TensorGaussLegendre, 5, 1, flat.family.dist);
    flat.cells = 32;
    const std::vector<double> d{0.5, 1.0, 2.0};
    const PLCurve c2 = generate_synthetic_curve(flat, 2.0, d);
    CHECK(c2.source == CurveSource::Synthetic2D);

    SyntheticSpec line = flat;
    line.kind = SyntheticKind::Model1D;
    const PLCurve c1 = generate_synthetic_curve(line, 2.0, d);
    for (std::size_t i = 0; i < d.size(); ++i)
        CHECK(c2.points[i].value == doctest::Approx(c1.points[i].value).epsilon(1e-10));

    SyntheticSpec rough = flat;
    rough.family.amplitude = 0.05;
    rough.rule = build_rule(RuleKind::TensorGaussLegendre, 5, 2, rough.family.dist);
    const PLCurve cr = generate_synthetic_curve(rough, 2.0, {0.5, 1.0, 1.5, 2.0, 3.0});
    for (std::size_t i = 1; i < cr.size(); ++i)
        CHECK(cr.points[i].value > cr.points[i - 1].value);
}

TEST_CASE("correlation half-width grows as the spectrum decays faster")
{
    const auto rough = InterfaceModel::power_law(1.0, 4.0, 10, 0.0, {-1.0, 1.0});
    const auto smooth = InterfaceModel::power_law(1.0, 4.0, 10, -2.0, {-1.0, 1.0});
    const double wr = correlation_half_width(rough);
    const double ws = correlation_half_width(smooth);
    CHECK(wr > 0.0);
    CHECK(ws > 2.0 * wr);
}

TEST_CASE("expect run writes hashed CSVs and replays byte-identically")
{
    RunConfig cfg = parse_config(kSmallExpect);
    cfg.output = scratch("expect_a");
    const auto files = run_experiment(cfg);
    CHECK(std::find(files.begin(), files.end(), "expect.csv") != files.end());
    CHECK(std::find(files.begin(), files.end(), "manifest.json") != files.end());
    const std::string expect_csv = slurp(cfg.output / "expect.csv");
    CHECK(expect_csv.rfind("# config_hash=" + cfg.hash + "\n", 0) == 0);
    CHECK(expect_csv.find("asymptotic_order2") != std::string::npos);

    RunConfig again = parse_config(kSmallExpect);
    again.output = scratch("expect_b");
    again.threads = 2;
    run_experiment(again);
    for (const char* f : {"expect.csv", "approximant.csv", "rule.csv"})
        CHECK(slurp(cfg.output / f) == slurp(again.output / f));
}

TEST_CASE("forward run")
{
    RunConfig cfg = parse_config("[run]\nkind = forward\n[grid]\nreference = 16\n[interface]\nK = 2\ntheta = 0.5, -0.5\n");
    cfg.output = scratch("forward");
    run_experiment(cfg);
    const std::string pl = slurp(cfg.output / "pl.csv");
    CHECK(pl.find("pl\n") != std::string::npos);
    CHECK(fs::file_size(cfg.output / "field.csv") > 1000);
}

TEST_CASE("small convergence, estimation, validation and timing runs")
{
    RunConfig conv = parse_config(R"([run]
kind = converge
[interface]
K = 1
dist_a = 0
dist_b = 1
[grid]
asymptotic = 16
reference = 16
[rule]
level = 2
[reference_rule]
level = 3
[study]
epsilons = 0.2, 0.1, 0.05
)");
    const auto cr = convergence_study(conv);
    REQUIRE(cr.rows.size() == 3);
    REQUIRE(cr.fits.size() == 3);
    CHECK(std::isfinite(cr.fits[2].slope));
    CHECK(cr.max_order01_gap >= 0.0);

    RunConfig est = parse_config(R"([run]
kind = estimate
[interface]
K = 1
[grid]
asymptotic = 16
data = 16
[study]
sigmas = 5
epsilons = 0.01
thicknesses = 0.2, 0.4, 0.6, 0.8
)");
    const auto cells = estimation_study(est);
    REQUIRE(cells.size() == 1);
    CHECK(cells[0].status == CellStatus::Converged);
    CHECK(cells[0].trace.final_rel_error() < 1e-2);

    RunConfig val = parse_config(R"([run]
kind = validate
[interface]
K = 2
[grid]
asymptotic = 16
cells_1d = 64
[study]
sigmas = 10
betas = -2
thicknesses = 20, 40, 60
)");
    const auto vr = validation_study(val);
    REQUIRE(vr.cells.size() == 1);
    CHECK(vr.half_widths.size() == 1);

    RunConfig tim = parse_config(R"([run]
kind = timing
[interface]
K = 1
amplitude = 0.05
[grid]
asymptotic = 16
reference = 16
)");
    const auto tr = timing_study(tim);
    CHECK(tr.entries.size() >= 4);
    CHECK(tr.entries.front().method.rfind("reference", 0) == 0);
    CHECK(tr.speedup > 0.0);
}
