#include "exciton/inverse.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

namespace exciton {

std::string to_string(CurveSource s)
{
    switch (s) {
    case CurveSource::Synthetic2D:
        return "synthetic-2D";
    case CurveSource::Synthetic1D:
        return "synthetic-1D";
    case CurveSource::External:
        return "external";
    }
    return "external";
}

CurveSource parse_curve_source(const std::string& s)
{
    if (s == "synthetic-2D")
        return CurveSource::Synthetic2D;
    if (s == "synthetic-1D")
        return CurveSource::Synthetic1D;
    if (s == "external")
        return CurveSource::External;
    throw InputError("unknown curve source '" + s + "'");
}

std::vector<double> PLCurve::thicknesses() const
{
    std::vector<double> d;
    d.reserve(points.size());
    for (const auto& p : points)
        d.push_back(p.d);
    return d;
}

void PLCurve::validate() const
{
    if (points.empty())
        throw InputError("PL curve is empty");
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (!(points[i].d > 0.0))
            throw InputError("PL curve: thickness must be positive");
        if (!(points[i].value > 0.0) || !std::isfinite(points[i].value))
            throw InputError("PL curve: values must be positive and finite");
        if (i > 0 && !(points[i].d > points[i - 1].d))
            throw InputError("PL curve: thicknesses must be strictly increasing");
    }
}

void PLCurve::write_csv(std::ostream& out) const
{
    const auto prec = out.precision(17);
    out << "# source=" << to_string(source) << '\n' << "d,pl\n";
    for (const auto& p : points)
        out << p.d << ',' << p.value << '\n';
    out.precision(prec);
}

PLCurve PLCurve::read_csv(std::istream& in)
{
    PLCurve c;
    std::string line;
    bool header = false;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        if (line[0] == '#') {
            const auto pos = line.find("source=");
            if (pos != std::string::npos)
                c.source = parse_curve_source(line.substr(pos + 7));
            continue;
        }
        if (!header) {
            header = true;
            if (line.rfind("d,", 0) == 0)
                continue;
        }
        std::istringstream row(line);
        PLPoint p;
        char comma = 0;
        if (!(row >> p.d >> comma >> p.value) || comma != ',')
            throw InputError("PL curve: malformed row '" + line + "'");
        c.points.push_back(p);
    }
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------------------------

DeviceConfig DeviceTemplate::make(double sigma, double d) const
{
    DeviceConfig dev;
    dev.sigma = sigma;
    dev.d = d;
    dev.L = L;
    switch (generation) {
    case Generation::Constant:
        dev.G = GenerationProfile::constant(value);
        break;
    case Generation::RelativeDecay:
        dev.G = GenerationProfile::exponential(value * d);
        break;
    case Generation::FixedDecay:
        dev.G = GenerationProfile::exponential(value);
        break;
    }
    dev.validate();
    return dev;
}

void DeviceTemplate::validate() const
{
    if (!(value > 0.0))
        throw InputError("device template: generation parameter must be positive");
    if (!(L > 0.0))
        throw InputError("device template: period must be positive");
}

InterfaceModel InterfaceFamily::make(double d, double L) const
{
    const double hbar = scaling == Scaling::FixedHbar ? amplitude : amplitude * d;
    return InterfaceModel(hbar, L, lambdas, dist);
}

// ---------------------------------------------------------------------------------------------

std::string to_string(DerivativeMethod m)
{
    return m == DerivativeMethod::SensitivityPDE ? "sensitivity_pde" : "central_fd";
}

DerivativeMethod parse_derivative_method(const std::string& s)
{
    if (s == "sensitivity_pde" || s == "SENSITIVITY_PDE")
        return DerivativeMethod::SensitivityPDE;
    if (s == "central_fd" || s == "CENTRAL_FD")
        return DerivativeMethod::CentralFD;
    throw InputError("unknown derivative method '" + s + "'");
}

ProviderValue ForwardProvider::expected_pl_sensitivities(double, double) const
{
    throw UnsupportedError("provider '" + name() + "' has no sensitivity equations; use central_fd");
}

void check_plan(const ForwardProvider& provider, const DerivativePlan& plan)
{
    if (plan.method == DerivativeMethod::SensitivityPDE && !provider.has_sensitivities())
        throw UnsupportedError("provider '" + provider.name() + "' has no sensitivity equations; use central_fd");
    if (plan.method == DerivativeMethod::CentralFD && !(plan.relative_step > 0.0 && plan.relative_step < 0.5))
        throw InputError("central_fd: relative step must lie in (0, 0.5)");
}

namespace {

struct Differences {
    double d1;
    double d2;
};

Differences central(double fm, double f0, double fp, double h)
{
    return {(fp - fm) / (2 * h), (fp - 2 * f0 + fm) / (h * h)};
}

} // namespace

ProviderValue evaluate(const ForwardProvider& provider, double sigma, double d, const DerivativePlan& plan)
{
    check_plan(provider, plan);
    if (!(sigma > 0.0))
        throw InputError("sigma must be positive");
    if (plan.method == DerivativeMethod::SensitivityPDE)
        return provider.expected_pl_sensitivities(sigma, d);

    const double h = plan.relative_step * sigma;
    const double f0 = provider.expected_pl(sigma, d);
    const Differences fine = central(provider.expected_pl(sigma - h, d), f0, provider.expected_pl(sigma + h, d), h);
    if (!plan.richardson)
        return {f0, fine.d1, fine.d2};

    const Differences coarse =
        central(provider.expected_pl(sigma - 2 * h, d), f0, provider.expected_pl(sigma + 2 * h, d), 2 * h);
    const double gap = std::abs(fine.d1 - coarse.d1);
    if (gap > plan.richardson_tolerance * std::max(std::abs(fine.d1), 1e-300))
        throw NumericalError("central_fd: derivative estimates at h and 2h disagree (" + std::to_string(fine.d1) +
                             " vs " + std::to_string(coarse.d1) + ")");
    return {f0, (4 * fine.d1 - coarse.d1) / 3, (4 * fine.d2 - coarse.d2) / 3};
}

// ---------------------------------------------------------------------------------------------

Model1DProvider::Model1DProvider(DeviceTemplate device, UniformDist xi, int cells, int xi_points)
    : device_(device), cells_(cells)
{
    device_.validate();
    if (cells < 2)
        throw InputError("1D provider needs at least 2 cells");
    if (xi.b < xi.a)
        throw InputError("1D provider: xi range must satisfy a <= b");
    if (xi.a == xi.b) {
        xi_nodes_ = {xi.a};
        xi_weights_ = {1.0};
        return;
    }
    gauss_legendre(xi_points, xi_nodes_, xi_weights_);
    for (std::size_t q = 0; q < xi_nodes_.size(); ++q) {
        xi_nodes_[q] = xi.mean() + 0.5 * (xi.b - xi.a) * xi_nodes_[q];
        xi_weights_[q] *= 0.5;
    }
}

double Model1DProvider::expected_pl(double sigma, double d) const
{
    const DeviceConfig dev = device_.make(sigma, d);
    double sum = 0.0;
    for (std::size_t q = 0; q < xi_nodes_.size(); ++q)
        sum += xi_weights_[q] * solve_mapped_1d(dev, Interface1D{xi_nodes_[q]}, cells_).pl;
    return sum;
}

ProviderValue Model1DProvider::expected_pl_sensitivities(double sigma, double d) const
{
    const DeviceConfig dev = device_.make(sigma, d);
    ProviderValue v;
    for (std::size_t q = 0; q < xi_nodes_.size(); ++q) {
        MappedProblem1D p(dev, Interface1D{xi_nodes_[q]}, cells_);
        const auto u = p.solve();
        const auto [u1, u2] = p.sensitivities(u);
        v.value += xi_weights_[q] * p.pl(u);
        v.d1 += xi_weights_[q] * p.pl(u1);
        v.d2 += xi_weights_[q] * p.pl(u2);
    }
    return v;
}

Mapped2DProvider::Mapped2DProvider(DeviceTemplate device, InterfaceFamily family, QuadratureRule rule,
                                   Grid2D grid, int threads)
    : device_(device), family_(std::move(family)), rule_(std::move(rule)), grid_(grid), threads_(threads)
{
    device_.validate();
    if (rule_.dimension != family_.modes())
        throw InputError("mapped provider: rule dimension does not match the number of modes");
}

double Mapped2DProvider::expected_pl(double sigma, double d) const
{
    const DeviceConfig dev = device_.make(sigma, d);
    const InterfaceModel model = family_.make(d, device_.L);
    return expect(rule_, [&](const InterfaceSample& s) { return pl_of_sample(dev, model, s, grid_); }, threads_)
        .value;
}

ProviderValue Mapped2DProvider::expected_pl_sensitivities(double sigma, double d) const
{
    const DeviceConfig dev = device_.make(sigma, d);
    const InterfaceModel model = family_.make(d, device_.L);
    // PL is linear in u with geometry-only weights, so dPL/dsigma = PL[u1].
    const auto v = expect_vector(
        rule_,
        [&](const InterfaceSample& s) {
            MappedProblem2D p(dev, model, s, grid_);
            const Field2D u = p.solve();
            const auto [u1, u2] = p.sensitivities(u);
            return std::vector<double>{p.pl(u), p.pl(u1), p.pl(u2)};
        },
        threads_);
    return {v[0], v[1], v[2]};
}

std::string to_string(AsymptoticSolver s)
{
    return s == AsymptoticSolver::Modal ? "modal" : "full_2d";
}

AsymptoticSolver parse_asymptotic_solver(const std::string& s)
{
    if (s == "modal")
        return AsymptoticSolver::Modal;
    if (s == "full_2d")
        return AsymptoticSolver::Full2D;
    throw InputError("unknown asymptotic solver '" + s + "' (modal | full_2d)");
}

AsymptoticProvider::AsymptoticProvider(DeviceTemplate device, InterfaceFamily family, int ny, int nz, int order,
                                       AsymptoticSolver solver)
    : device_(device), family_(std::move(family)), ny_(ny), nz_(nz), order_(order), solver_(solver)
{
    device_.validate();
    if (order < 0 || order > 2)
        throw UnsupportedError("asymptotic provider supports orders 0..2");
    (void)Grid2D(ny, nz); // validates the sizes
    if (solver == AsymptoticSolver::Modal && order >= 2 && nz <= 2 * static_cast<int>(family_.lambdas.size()))
        throw InputError("modal asymptotic solver needs nz > 2K");
}

double AsymptoticProvider::expected_pl(double sigma, double d) const
{
    const DeviceConfig dev = device_.make(sigma, d);
    const InterfaceModel model = family_.make(d, device_.L);
    if (solver_ == AsymptoticSolver::Modal)
        return exciton::expected_pl(modal_approximant(dev, model, ny_, nz_, order_), moments(family_.dist), order_);
    const AsymptoticBasis basis = build_basis(dev, model, fixed_domain_grid(dev, ny_, nz_), order_);
    return exciton::expected_pl(assemble_approximant(basis), moments(family_.dist), order_);
}

std::pair<Field2D, Field2D> sensitivities_mapped(const DeviceConfig& device, const InterfaceModel& model,
                                                 const InterfaceSample& sample, const Grid2D& grid,
                                                 const Field2D& u)
{
    return MappedProblem2D(device, model, sample, grid).sensitivities(u);
}

// ---------------------------------------------------------------------------------------------

namespace {

template <class T, class F>
std::vector<T> map_devices(const std::vector<double>& d, int threads, F&& f)
{
    const std::size_t n = d.size();
    std::vector<T> out(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                out[i] = f(d[i]);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const int workers = std::max(1, std::min<int>(threads > 0 ? threads : default_threads(), int(n)));
    if (workers == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < workers; ++t)
            pool.emplace_back(work);
    }
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
    return out;
}

} // namespace

std::vector<double> evaluate_curve(const ForwardProvider& provider, double sigma, const std::vector<double>& d,
                                   int threads)
{
    if (!(sigma > 0.0))
        throw InputError("sigma must be positive");
    return map_devices<double>(d, threads, [&](double di) {
        const double v = provider.expected_pl(sigma, di);
        if (!std::isfinite(v) || !(v > 0.0))
            throw NumericalError(provider.name() + " returned a non-positive PL at d = " + std::to_string(di));
        return v;
    });
}

std::vector<ProviderValue> evaluate_curve(const ForwardProvider& provider, double sigma,
                                          const std::vector<double>& d, const DerivativePlan& plan, int threads)
{
    check_plan(provider, plan);
    return map_devices<ProviderValue>(d, threads, [&](double di) { return evaluate(provider, sigma, di, plan); });
}

double objective(const ForwardProvider& provider, const PLCurve& curve, double sigma, int threads)
{
    const auto e = evaluate_curve(provider, sigma, curve.thicknesses(), threads);
    double J = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) {
        const double r = e[i] - curve.points[i].value;
        J += r * r;
    }
    return J / double(e.size());
}

ObjectiveValue objective_derivatives(const ForwardProvider& provider, const PLCurve& curve, double sigma,
                                     const DerivativePlan& plan, int threads)
{
    const auto e = evaluate_curve(provider, sigma, curve.thicknesses(), plan, threads);
    ObjectiveValue o;
    for (std::size_t i = 0; i < e.size(); ++i) {
        const double r = e[i].value - curve.points[i].value;
        o.J += r * r;
        o.dJ += r * e[i].d1;
        o.d2J += e[i].d1 * e[i].d1 + r * e[i].d2;
    }
    const double n = double(e.size());
    o.J /= n;
    o.dJ *= 2.0 / n;
    o.d2J *= 2.0 / n;
    return o;
}

std::string to_string(Termination t)
{
    switch (t) {
    case Termination::Converged:
        return "converged";
    case Termination::MaxIterations:
        return "max_iterations";
    case Termination::LineSearchFailed:
        return "line_search_failed";
    }
    return "?";
}

void EstimationTrace::write_csv(std::ostream& out) const
{
    const auto prec = out.precision(17);
    out << "n,sigma,J,alpha,rel_error\n";
    for (std::size_t n = 0; n < sigma.size(); ++n)
        out << n << ',' << sigma[n] << ',' << J[n] << ',' << alpha[n] << ',' << rel_error[n] << '\n';
    out.precision(prec);
}

EstimationTrace newton_estimate(const ForwardProvider& provider, const PLCurve& curve, double sigma0,
                                const NewtonOptions& opt)
{
    curve.validate();
    check_plan(provider, opt.plan);
    if (!(sigma0 > 0.0))
        throw InputError("initial sigma must be positive");
    if (!(opt.tol > 0.0) || opt.max_iter < 1 || opt.max_halvings < 0)
        throw InputError("newton: tol must be positive and max_iter >= 1");

    const double nan = std::numeric_limits<double>::quiet_NaN();
    auto rel = [&](double s) { return opt.sigma_exact ? std::abs(s - *opt.sigma_exact) / *opt.sigma_exact : nan; };

    EstimationTrace trace;
    double sigma = sigma0;
    double J = objective(provider, curve, sigma, opt.threads);
    trace.sigma.push_back(sigma);
    trace.J.push_back(J);
    trace.alpha.push_back(0.0);
    trace.rel_error.push_back(rel(sigma));

    for (int n = 1; n <= opt.max_iter; ++n) {
        const ObjectiveValue o = objective_derivatives(provider, curve, sigma, opt.plan, opt.threads);
        const double curvature = std::abs(o.d2J);
        double step;
        if (o.d2J > 0.0)
            step = -o.dJ / o.d2J;
        else if (curvature > 0.0)
            step = -o.dJ / curvature; // gradient fallback
        else
            step = o.dJ > 0.0 ? -0.5 * sigma : 0.5 * sigma;

        // Predicted decrease per unit alpha; Armijo needs J_new <= J - c alpha dJ² / |J''|.
        const double slope = curvature > 0.0 ? o.dJ * o.dJ / curvature : std::abs(o.dJ * step);

        double alpha = 1.0;
        double candidate = 0.0;
        double Jc = 0.0;
        bool accepted = false;
        const int tries = opt.line_search ? opt.max_halvings + 1 : 1;
        for (int t = 0; t < tries; ++t, alpha *= 0.5) {
            candidate = sigma + alpha * step;
            if (!(candidate > 0.0)) {
                candidate = 0.5 * sigma;
                ++trace.clamps;
            }
            Jc = objective(provider, curve, candidate, opt.threads);
            if (!opt.line_search || Jc <= J - opt.armijo * alpha * slope) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            // Below tolerance the misfit is flat to rounding; stay put and stop.
            trace.reason = std::abs(step) < opt.tol ? Termination::Converged : Termination::LineSearchFailed;
            return trace;
        }

        const double delta = candidate - sigma;
        sigma = candidate;
        J = Jc;
        trace.sigma.push_back(sigma);
        trace.J.push_back(J);
        trace.alpha.push_back(alpha);
        trace.rel_error.push_back(rel(sigma));
        if (std::abs(delta) < opt.tol) {
            trace.reason = Termination::Converged;
            return trace;
        }
    }
    trace.reason = Termination::MaxIterations;
    throw EstimationFailure("newton: no convergence after " + std::to_string(opt.max_iter) + " iterations",
                            std::move(trace));
}

} // namespace exciton
