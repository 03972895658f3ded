#include "exciton/asymptotic.hpp"
#include "exciton/collocation.hpp"
#include "exciton/errors.hpp"
#include "exciton/experiments.hpp"
#include "exciton/forward.hpp"
#include "exciton/inverse.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace exciton;

namespace {

py::array_t<double> to_array(const Field2D& f)
{
    const Grid2D& g = f.grid();
    py::array_t<double> out({g.ny + 1, g.nz + 1});
    auto v = f.values();
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

InterfaceSample make_sample(std::vector<double> thetas) { return InterfaceSample{std::move(thetas)}; }

PLCurve make_curve(const std::vector<double>& d, const std::vector<double>& pl)
{
    if (d.size() != pl.size())
        throw InputError("curve: thickness and value lengths differ");
    PLCurve c;
    for (std::size_t i = 0; i < d.size(); ++i)
        c.points.push_back({d[i], pl[i]});
    c.validate();
    return c;
}

} // namespace

PYBIND11_MODULE(_exciton, m)
{
    m.doc() = "Exciton diffusion in rough bilayer films: forward solvers, asymptotics and sigma estimation.";

    py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<UnsupportedError>(m, "UnsupportedError", PyExc_NotImplementedError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    py::class_<UniformDist>(m, "UniformDist")
        .def(py::init([](double a, double b) { return UniformDist{a, b}; }), py::arg("a") = -1.0, py::arg("b") = 1.0)
        .def_readwrite("a", &UniformDist::a)
        .def_readwrite("b", &UniformDist::b)
        .def("mean", &UniformDist::mean)
        .def("variance", &UniformDist::variance);

    py::class_<InterfaceModel>(m, "InterfaceModel")
        .def(py::init<double, double, std::vector<double>, UniformDist>(), py::arg("hbar"), py::arg("period"),
             py::arg("lambdas"), py::arg("dist") = UniformDist{})
        .def_static("power_law", &InterfaceModel::power_law, py::arg("hbar"), py::arg("period"), py::arg("modes"),
                    py::arg("beta"), py::arg("dist") = UniformDist{})
        .def_property_readonly("hbar", &InterfaceModel::hbar)
        .def_property_readonly("period", &InterfaceModel::period)
        .def_property_readonly("lambdas", &InterfaceModel::lambdas)
        .def_property_readonly("modes", &InterfaceModel::modes)
        .def("evaluate", [](const InterfaceModel& im, std::vector<double> t, double z) {
            return im.evaluate(make_sample(std::move(t)), z);
        }, py::arg("thetas"), py::arg("z"))
        .def("covariance", &InterfaceModel::covariance, py::arg("z1"), py::arg("z2"))
        .def("sample", [](const InterfaceModel& im, std::uint64_t seed, std::uint64_t stream) {
            return im.sample(seed, stream).thetas;
        }, py::arg("seed"), py::arg("stream") = 0);

    py::class_<DeviceConfig>(m, "DeviceConfig")
        .def(py::init([](double sigma, double d, double L, std::optional<double> constant_generation) {
                 DeviceConfig dev = DeviceConfig::with_default_generation(sigma, d, L);
                 if (constant_generation)
                     dev.G = GenerationProfile::constant(*constant_generation);
                 dev.validate();
                 return dev;
             }),
             py::arg("sigma"), py::arg("d"), py::arg("L") = 4.0, py::arg("constant_generation") = py::none(),
             "Generation defaults to exp(-x / (d/2)); pass constant_generation for a uniform profile.")
        .def_readwrite("sigma", &DeviceConfig::sigma)
        .def_readwrite("d", &DeviceConfig::d)
        .def_readwrite("L", &DeviceConfig::L);

    m.def("closed_form_pl", &closed_form_pl_constant_generation, py::arg("sigma"), py::arg("d"));

    m.def("solve_1d", [](const DeviceConfig& dev, double xi, int cells) {
        const Solution1D s = solve_mapped_1d(dev, Interface1D{xi}, cells);
        return py::make_tuple(s.pl, py::array_t<double>(s.field.size(), s.field.data()));
    }, py::arg("device"), py::arg("xi") = 0.0, py::arg("cells") = 256, "Returns (pl, field on the mapped grid).");

    m.def("solve_2d", [](const DeviceConfig& dev, const InterfaceModel& im, std::vector<double> thetas, int ny, int nz) {
        const MappedSolution s = solve_mapped_2d(dev, im, make_sample(std::move(thetas)), Grid2D(ny, nz));
        return py::make_tuple(s.pl, to_array(s.field));
    }, py::arg("device"), py::arg("model"), py::arg("thetas"), py::arg("ny") = 64, py::arg("nz") = 64,
       "Returns (pl, field[ny+1, nz+1]).");

    m.def("expected_pl_collocation", [](const DeviceConfig& dev, const InterfaceModel& im, int points, int ny, int nz) {
        const QuadratureRule rule = build_rule(RuleKind::TensorGaussLegendre, im.modes(), points, im.dist());
        return expect(rule, [&](const InterfaceSample& s) { return pl_of_sample(dev, im, s, Grid2D(ny, nz)); }).value;
    }, py::arg("device"), py::arg("model"), py::arg("points") = 3, py::arg("ny") = 64, py::arg("nz") = 64,
       "Tensor Gauss-Legendre expectation of the 2D PL.");

    m.def("expected_pl_asymptotic", [](const DeviceConfig& dev, const InterfaceModel& im, int order, int ny, int nz) {
        const PLApproximant a = modal_approximant(dev, im, ny, nz, order);
        return expected_pl(a, moments(im.dist()), order);
    }, py::arg("device"), py::arg("model"), py::arg("order") = 2, py::arg("ny") = 64, py::arg("nz") = 64);

    py::class_<EstimationTrace>(m, "EstimationTrace")
        .def_readonly("sigma", &EstimationTrace::sigma)
        .def_readonly("J", &EstimationTrace::J)
        .def_readonly("alpha", &EstimationTrace::alpha)
        .def_readonly("rel_error", &EstimationTrace::rel_error)
        .def_property_readonly("reason", [](const EstimationTrace& t) { return to_string(t.reason); })
        .def_property_readonly("iterations", &EstimationTrace::iterations)
        .def_property_readonly("final_sigma", &EstimationTrace::final_sigma);

    m.def("estimate_sigma_1d", [](const std::vector<double>& d, const std::vector<double>& pl, double sigma0,
                                  std::optional<double> sigma_exact, double relative_decay, double L, int cells) {
        DeviceTemplate tmpl;
        tmpl.value = relative_decay;
        tmpl.L = L;
        const Model1DProvider provider(tmpl, {0.0, 0.0}, cells);
        NewtonOptions opt;
        opt.sigma_exact = sigma_exact;
        opt.plan.method = DerivativeMethod::SensitivityPDE;
        return newton_estimate(provider, make_curve(d, pl), sigma0, opt);
    }, py::arg("d"), py::arg("pl"), py::arg("sigma0"), py::arg("sigma_exact") = py::none(),
       py::arg("relative_decay") = 0.5, py::arg("L") = 4.0, py::arg("cells") = 1024,
       "Newton fit of sigma to a PL curve with the flat 1D model.");

    m.def("model_1d_curve", [](double sigma, const std::vector<double>& d, double relative_decay, int cells) {
        DeviceTemplate tmpl;
        tmpl.value = relative_decay;
        return evaluate_curve(Model1DProvider(tmpl, {0.0, 0.0}, cells), sigma, d);
    }, py::arg("sigma"), py::arg("d"), py::arg("relative_decay") = 0.5, py::arg("cells") = 1024);

    m.def("config_hash", [](const std::string& text) { return parse_config(text).hash; }, py::arg("text"));
    m.def("run_config", [](const std::filesystem::path& path, std::optional<std::filesystem::path> output) {
        RunConfig cfg = load_config(path);
        if (output)
            cfg.output = *output;
        return run_experiment(cfg);
    }, py::arg("path"), py::arg("output") = py::none(), "Runs a config file; returns the files written.");
}
