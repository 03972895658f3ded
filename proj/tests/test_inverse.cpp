#include "exciton/inverse.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace exciton;

namespace {

// E[I] = offset + closed form; lets objective tests use exact numbers.
class ShiftedProvider final : public ForwardProvider {
public:
    explicit ShiftedProvider(double offset) : offset_(offset) {}
    std::string name() const override { return "shifted"; }
    double expected_pl(double sigma, double d) const override
    {
        return offset_ + closed_form_pl_constant_generation(sigma, d);
    }

private:
    double offset_;
};

std::vector<double> thicknesses_10i()
{
    std::vector<double> d;
    for (int i = 1; i <= 10; ++i)
        d.push_back(10.0 * i);
    return d;
}

PLCurve curve_from(const ForwardProvider& p, double sigma, const std::vector<double>& d)
{
    PLCurve c;
    c.source = CurveSource::Synthetic1D;
    const auto v = evaluate_curve(p, sigma, d);
    for (std::size_t i = 0; i < d.size(); ++i)
        c.points.push_back({d[i], v[i]});
    return c;
}

const Model1DProvider kModel1D(DeviceTemplate{}, {0.0, 0.0}, 256);

} // namespace

TEST_CASE("PL curve validation and CSV round trip")
{
    PLCurve c{{{1.0, 0.5}, {2.0, 0.9}}, CurveSource::Synthetic2D};
    CHECK_NOTHROW(c.validate());
    std::stringstream ss;
    c.write_csv(ss);
    const PLCurve back = PLCurve::read_csv(ss);
    CHECK(back.source == CurveSource::Synthetic2D);
    REQUIRE(back.size() == 2);
    CHECK(back.points[1].d == 2.0);
    CHECK(back.points[1].value == 0.9);

    CHECK_THROWS_AS((PLCurve{{{2.0, 0.5}, {1.0, 0.9}}}).validate(), InputError);
    CHECK_THROWS_AS((PLCurve{{{1.0, 0.5}, {1.0, 0.9}}}).validate(), InputError);
    CHECK_THROWS_AS((PLCurve{{{1.0, -0.5}}}).validate(), InputError);
    CHECK_THROWS_AS(PLCurve{}.validate(), InputError);
    CHECK(parse_curve_source(to_string(CurveSource::External)) == CurveSource::External);
}

TEST_CASE("objective: trivial cases")
{
    const ShiftedProvider exact(0.0), plus_one(1.0);
    const PLCurve one{{{10.0, closed_form_pl_constant_generation(2.0, 10.0)}}};
    CHECK(objective(plus_one, one, 2.0) == doctest::Approx(1.0).epsilon(1e-12));

    const PLCurve self = curve_from(exact, 5.0, thicknesses_10i());
    double max_sq = 0.0;
    for (const auto& p : self.points)
        max_sq = std::max(max_sq, p.value * p.value);
    CHECK(objective(exact, self, 5.0) <= 1e-16 * max_sq);
}

TEST_CASE("objective is unimodal around the generating sigma")
{
    const PLCurve data = curve_from(kModel1D, 10.0, thicknesses_10i());
    std::vector<double> J;
    for (double s = 4.0; s <= 16.0; s += 1.0)
        J.push_back(objective(kModel1D, data, s));
    const auto it = std::min_element(J.begin(), J.end());
    CHECK(it - J.begin() == 6); // sigma = 10
    for (auto p = J.begin(); p != it; ++p)
        CHECK(*p > *(p + 1));
    for (auto p = it; p + 1 != J.end(); ++p)
        CHECK(*p < *(p + 1));
}

TEST_CASE("objective derivatives: sensitivity equations against finite differences")
{
    const PLCurve data = curve_from(kModel1D, 10.0, thicknesses_10i());
    DerivativePlan fd;
    DerivativePlan pde;
    pde.method = DerivativeMethod::SensitivityPDE;
    for (double s : {6.0, 8.0, 13.0}) {
        const auto a = objective_derivatives(kModel1D, data, s, fd);
        const auto b = objective_derivatives(kModel1D, data, s, pde);
        CHECK(a.J == b.J);
        CHECK(std::abs(a.dJ - b.dJ) <= 1e-5 * std::abs(b.dJ));
        CHECK(std::abs(a.d2J - b.d2J) <= 1e-4 * std::abs(b.d2J));
    }
    const auto at = objective_derivatives(kModel1D, data, 10.0, pde);
    CHECK(std::abs(at.dJ) < 1e-12);
    CHECK(at.d2J > 0.0);
    CHECK(objective_derivatives(kModel1D, data, 9.0, pde).d2J > 0.0);
    CHECK(objective_derivatives(kModel1D, data, 11.0, pde).d2J > 0.0);
}

TEST_CASE("provider values and their sigma derivatives")
{
    DerivativePlan pde;
    pde.method = DerivativeMethod::SensitivityPDE;
    for (double sigma : {3.0, 5.0, 10.0, 20.0}) {
        const auto v = evaluate(kModel1D, sigma, 50.0, pde);
        const auto f = evaluate(kModel1D, sigma, 50.0, DerivativePlan{});
        CHECK(v.value == f.value);
        CHECK(std::abs(v.d1 - f.d1) <= 1e-4 * std::abs(v.d1));
        CHECK(std::abs(v.d2 - f.d2) <= 1e-4 * std::abs(v.d2));
    }

    // A distributed offset averages the fixed-offset values.
    const Model1DProvider spread(DeviceTemplate{}, {-1.0, 1.0}, 256, 8);
    const double mid = kModel1D.expected_pl(5.0, 20.0);
    CHECK(spread.expected_pl(5.0, 20.0) != mid);
    CHECK(spread.expected_pl(5.0, 20.0) == doctest::Approx(mid).epsilon(1e-2));

    // 2D sensitivities through the quadrature rule.
    InterfaceFamily fam;
    fam.lambdas = {1.0, 0.5};
    const auto rule = build_rule(RuleKind::TensorGaussLegendre, 2, 2, fam.dist);
    const Mapped2DProvider mapped(DeviceTemplate{}, fam, rule, Grid2D(16, 16));
    const auto m = mapped.expected_pl_sensitivities(5.0, 1.0);
    const double h = 5e-3;
    const double fd1 = (mapped.expected_pl(5.0 + h, 1.0) - mapped.expected_pl(5.0 - h, 1.0)) / (2 * h);
    CHECK(m.value == doctest::Approx(mapped.expected_pl(5.0, 1.0)).epsilon(1e-13));
    CHECK(std::abs(m.d1 - fd1) <= 1e-5 * std::abs(fd1));

    // The asymptotic provider has no sensitivity equations.
    const AsymptoticProvider asym(DeviceTemplate{}, fam);
    CHECK_FALSE(asym.has_sensitivities());
    CHECK_THROWS_AS(check_plan(asym, pde), UnsupportedError);
    CHECK_THROWS_AS(asym.expected_pl_sensitivities(5.0, 1.0), UnsupportedError);
    const AsymptoticProvider asym2d(DeviceTemplate{}, fam, 64, 64, 2, AsymptoticSolver::Full2D);
    CHECK(asym.expected_pl(5.0, 1.0) == doctest::Approx(asym2d.expected_pl(5.0, 1.0)).epsilon(1e-12));
    CHECK(parse_asymptotic_solver(to_string(AsymptoticSolver::Full2D)) == AsymptoticSolver::Full2D);
}

TEST_CASE("non-positive provider values are rejected")
{
    const ShiftedProvider negative(-100.0);
    CHECK_THROWS_AS(evaluate_curve(negative, 2.0, {1.0, 2.0}), NumericalError);
}

TEST_CASE("Newton recovers sigma from 1D data")
{
    const auto d = thicknesses_10i();
    const PLCurve data = curve_from(kModel1D, 5.0, d);
    NewtonOptions opt;
    opt.sigma_exact = 5.0;
    for (DerivativeMethod method : {DerivativeMethod::CentralFD, DerivativeMethod::SensitivityPDE}) {
        opt.plan.method = method;
        const auto trace = newton_estimate(kModel1D, data, 12.0, opt);
        CHECK(trace.reason == Termination::Converged);
        CHECK(trace.final_rel_error() < 1e-3);
        // Every accepted step lowers the misfit.
        for (std::size_t n = 1; n < trace.J.size(); ++n)
            CHECK(trace.J[n] <= trace.J[n - 1]);
        CHECK(std::abs(trace.sigma.back() - trace.sigma[trace.sigma.size() - 2]) < opt.tol);
    }

    opt.plan.method = DerivativeMethod::SensitivityPDE;
    const auto start = newton_estimate(kModel1D, data, 5.0, opt);
    CHECK(start.iterations() <= 1);
    CHECK(start.final_rel_error() < 1e-6);

    std::ostringstream os;
    start.write_csv(os);
    CHECK(os.str().rfind("n,sigma,J,alpha,rel_error\n", 0) == 0);
}

TEST_CASE("Newton failures carry the trace")
{
    const PLCurve data = curve_from(kModel1D, 5.0, thicknesses_10i());
    NewtonOptions opt;
    opt.max_iter = 1;
    opt.plan.method = DerivativeMethod::SensitivityPDE;
    try {
        (void)newton_estimate(kModel1D, data, 30.0, opt);
        FAIL("expected EstimationFailure");
    } catch (const EstimationFailure& e) {
        CHECK(e.trace().reason == Termination::MaxIterations);
        CHECK(e.trace().iterations() == 1);
    }
    CHECK_THROWS_AS(newton_estimate(kModel1D, data, -1.0, opt), InputError);
}
