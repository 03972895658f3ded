#include "exciton/experiments.hpp"

#include "exciton/asymptotic.hpp"
#include "exciton/errors.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

namespace exciton {

std::string to_string(ExperimentKind k)
{
    switch (k) {
    case ExperimentKind::Forward:
        return "forward";
    case ExperimentKind::Expect:
        return "expect";
    case ExperimentKind::Convergence:
        return "converge";
    case ExperimentKind::Estimate:
        return "estimate";
    case ExperimentKind::Validate1D:
        return "validate";
    case ExperimentKind::Timing:
        return "timing";
    }
    return "?";
}

ExperimentKind parse_experiment_kind(const std::string& s)
{
    for (auto k : {ExperimentKind::Forward, ExperimentKind::Expect, ExperimentKind::Convergence,
                   ExperimentKind::Estimate, ExperimentKind::Validate1D, ExperimentKind::Timing})
        if (s == to_string(k))
            return k;
    throw InputError("unknown experiment kind '" + s + "'");
}

QuadratureRule RuleConfig::build(int K, UniformDist support, std::uint64_t seed) const
{
    return build_rule(kind, K, level, support, seed);
}

double NewtonConfig::initial_sigma(const std::vector<double>& thicknesses) const
{
    if (sigma0)
        return *sigma0;
    if (bracket_lo && bracket_hi)
        return 0.5 * (*bracket_lo + *bracket_hi);
    if (thicknesses.empty())
        throw InputError("cannot pick an initial sigma without thicknesses");
    return 0.25 * *std::max_element(thicknesses.begin(), thicknesses.end());
}

InterfaceModel RunConfig::model_for(double d_value) const
{
    return family.make(d_value, device.L);
}

DeviceConfig RunConfig::device_for(double sigma_value, double d_value) const
{
    return device.make(sigma_value, d_value);
}

// ---------------------------------------------------------------------------------------------
// Config parsing

namespace {

namespace pt = boost::property_tree;

const std::set<std::string> kKnownKeys = {
    "run.kind", "run.output", "run.seed", "run.threads",
    "device.L", "device.sigma", "device.d", "device.generation", "device.generation_value",
    "interface.scaling", "interface.amplitude", "interface.K", "interface.beta", "interface.lambdas",
    "interface.dist_a", "interface.dist_b", "interface.theta",
    "grid.asymptotic", "grid.reference", "grid.data", "grid.cells_1d", "grid.richardson", "grid.asymptotic_solver",
    "rule.kind", "rule.level", "reference_rule.kind", "reference_rule.level",
    "newton.tol", "newton.max_iter", "newton.line_search", "newton.derivative", "newton.relative_step",
    "newton.richardson", "newton.sigma0", "newton.bracket_lo", "newton.bracket_hi",
    "study.epsilons", "study.sigmas", "study.betas", "study.thicknesses", "study.order", "study.xi_a",
    "study.xi_b", "study.threshold", "study.beta_cut", "study.repeats",
};

std::vector<double> parse_list(const std::string& key, const std::string& text)
{
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        if (b == std::string::npos)
            continue;
        try {
            std::size_t used = 0;
            const std::string trimmed = item.substr(b, item.find_last_not_of(" \t") - b + 1);
            out.push_back(std::stod(trimmed, &used));
            if (used != trimmed.size())
                throw std::invalid_argument(trimmed);
        } catch (const std::exception&) {
            throw InputError("config: bad number '" + item + "' in " + key);
        }
    }
    return out;
}

class Reader {
public:
    explicit Reader(const pt::ptree& tree) : tree_(tree) {}

    template <class T>
    std::optional<T> get(const std::string& key) const
    {
        const auto node = tree_.get_child_optional(pt::ptree::path_type(key, '.'));
        if (!node)
            return std::nullopt;
        try {
            if constexpr (std::is_same_v<T, bool>) {
                const std::string v = node->get_value<std::string>();
                if (v == "true" || v == "1" || v == "yes" || v == "on")
                    return true;
                if (v == "false" || v == "0" || v == "no" || v == "off")
                    return false;
                throw InputError("config: " + key + " expects a boolean");
            } else {
                return node->get_value<T>();
            }
        } catch (const pt::ptree_bad_data&) {
            throw InputError("config: bad value for " + key);
        }
    }

    std::optional<std::vector<double>> list(const std::string& key) const
    {
        const auto s = get<std::string>(key);
        if (!s)
            return std::nullopt;
        return parse_list(key, *s);
    }

private:
    const pt::ptree& tree_;
};

template <class T>
void assign(T& dst, const std::optional<T>& v)
{
    if (v)
        dst = *v;
}

std::vector<double> powers_of_two(int from, int to)
{
    std::vector<double> v;
    for (int i = from; i <= to; ++i)
        v.push_back(std::ldexp(1.0, -i));
    return v;
}

void require_positive_cells(int n, const std::string& what)
{
    if (n < 4)
        throw InputError("config: " + what + " needs at least 4 cells");
}

} // namespace

RunConfig parse_config(const std::string& text, std::optional<ExperimentKind> kind)
{
    pt::ptree tree;
    try {
        std::istringstream in(text);
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw InputError(std::string("config: ") + e.what());
    }
    for (const auto& [section, body] : tree) {
        if (body.empty())
            throw InputError("config: key '" + section + "' must sit inside a [section]");
        for (const auto& [key, value] : body)
            if (!kKnownKeys.count(section + "." + key))
                throw InputError("config: unknown key " + section + "." + key);
    }

    const Reader r(tree);
    RunConfig c;
    c.text = text;
    c.hash = sha256_hex(text);

    if (const auto k = r.get<std::string>("run.kind"))
        c.kind = parse_experiment_kind(*k);
    if (kind && *kind != c.kind) {
        c.kind = *kind;
        c.hash = sha256_hex("kind=" + to_string(c.kind) + "\n" + text);
    }
    if (const auto o = r.get<std::string>("run.output"))
        c.output = *o;
    assign(c.seed, r.get<std::uint64_t>("run.seed"));
    assign(c.threads, r.get<int>("run.threads"));

    const bool validate = c.kind == ExperimentKind::Validate1D;
    const bool estimate = c.kind == ExperimentKind::Estimate;

    assign(c.device.L, r.get<double>("device.L"));
    assign(c.sigma, r.get<double>("device.sigma"));
    assign(c.d, r.get<double>("device.d"));
    if (const auto g = r.get<std::string>("device.generation")) {
        if (*g == "relative_decay")
            c.device.generation = DeviceTemplate::Generation::RelativeDecay;
        else if (*g == "fixed_decay")
            c.device.generation = DeviceTemplate::Generation::FixedDecay;
        else if (*g == "constant")
            c.device.generation = DeviceTemplate::Generation::Constant;
        else
            throw InputError("config: device.generation must be relative_decay, fixed_decay or constant");
        if (c.device.generation == DeviceTemplate::Generation::Constant)
            c.device.value = 1.0;
    }
    assign(c.device.value, r.get<double>("device.generation_value"));
    c.device.validate();
    if (!(c.sigma > 0.0) || !(c.d > 0.0))
        throw InputError("config: device.sigma and device.d must be positive");

    c.modes = validate ? 10 : 5;
    assign(c.modes, r.get<int>("interface.K"));
    if (c.modes < 1)
        throw InputError("config: interface.K must be >= 1");
    c.family.scaling = validate ? InterfaceFamily::Scaling::FixedHbar : InterfaceFamily::Scaling::FixedEpsilon;
    c.family.amplitude = validate ? 1.0 : 0.01;
    if (const auto s = r.get<std::string>("interface.scaling")) {
        if (*s == "epsilon")
            c.family.scaling = InterfaceFamily::Scaling::FixedEpsilon;
        else if (*s == "hbar")
            c.family.scaling = InterfaceFamily::Scaling::FixedHbar;
        else
            throw InputError("config: interface.scaling must be epsilon or hbar");
    }
    assign(c.family.amplitude, r.get<double>("interface.amplitude"));
    if (!(c.family.amplitude >= 0.0))
        throw InputError("config: interface.amplitude must be non-negative");
    c.beta = r.get<double>("interface.beta");
    const auto lambdas = r.list("interface.lambdas");
    if (c.beta && lambdas)
        throw InputError("config: give interface.beta or interface.lambdas, not both");
    if (lambdas) {
        c.family.lambdas = *lambdas;
        if (r.get<int>("interface.K") && int(lambdas->size()) != c.modes)
            throw InputError("config: interface.lambdas length differs from interface.K");
        c.modes = int(lambdas->size());
    } else {
        c.family.lambdas.assign(std::size_t(c.modes), 1.0);
        if (c.beta)
            for (int k = 1; k <= c.modes; ++k)
                c.family.lambdas[std::size_t(k - 1)] = std::pow(double(k), *c.beta);
    }
    assign(c.family.dist.a, r.get<double>("interface.dist_a"));
    assign(c.family.dist.b, r.get<double>("interface.dist_b"));
    if (c.family.dist.b < c.family.dist.a)
        throw InputError("config: interface.dist_a must not exceed interface.dist_b");
    if (const auto t = r.list("interface.theta"))
        c.thetas = *t;

    assign(c.grid.asymptotic, r.get<int>("grid.asymptotic"));
    assign(c.grid.reference, r.get<int>("grid.reference"));
    assign(c.grid.data, r.get<int>("grid.data"));
    assign(c.grid.cells_1d, r.get<int>("grid.cells_1d"));
    if (auto v = r.get<std::string>("grid.asymptotic_solver"))
        c.grid.solver = parse_asymptotic_solver(*v);
    assign(c.grid.richardson, r.get<bool>("grid.richardson"));
    require_positive_cells(c.grid.asymptotic, "grid.asymptotic");
    require_positive_cells(c.grid.reference, "grid.reference");
    require_positive_cells(c.grid.data, "grid.data");
    if (c.grid.cells_1d < 2)
        throw InputError("config: grid.cells_1d must be >= 2");
    if (c.grid.richardson && (c.grid.asymptotic % 2 || c.grid.reference % 2 || c.grid.asymptotic < 8 ||
                              c.grid.reference < 8))
        throw InputError("config: grid.richardson needs even cell counts >= 8");

    c.rule.level = estimate ? 2 : 3;
    if (const auto k = r.get<std::string>("rule.kind"))
        c.rule.kind = parse_rule_kind(*k);
    assign(c.rule.level, r.get<int>("rule.level"));
    if (const auto k = r.get<std::string>("reference_rule.kind"))
        c.reference_rule.kind = parse_rule_kind(*k);
    assign(c.reference_rule.level, r.get<int>("reference_rule.level"));
    if (c.rule.level < 1 || c.reference_rule.level < 1)
        throw InputError("config: rule levels must be >= 1");

    NewtonOptions& n = c.newton.options;
    assign(n.tol, r.get<double>("newton.tol"));
    assign(n.max_iter, r.get<int>("newton.max_iter"));
    assign(n.line_search, r.get<bool>("newton.line_search"));
    if (const auto m = r.get<std::string>("newton.derivative"))
        n.plan.method = parse_derivative_method(*m);
    assign(n.plan.relative_step, r.get<double>("newton.relative_step"));
    assign(n.plan.richardson, r.get<bool>("newton.richardson"));
    c.newton.sigma0 = r.get<double>("newton.sigma0");
    c.newton.bracket_lo = r.get<double>("newton.bracket_lo");
    c.newton.bracket_hi = r.get<double>("newton.bracket_hi");
    if (!c.newton.bracket_lo && !c.newton.bracket_hi && (estimate || validate)) {
        c.newton.bracket_lo = 1.0;
        c.newton.bracket_hi = 40.0;
    }
    if (bool(c.newton.bracket_lo) != bool(c.newton.bracket_hi))
        throw InputError("config: newton.bracket_lo and newton.bracket_hi go together");
    if (!(n.tol > 0.0) || n.max_iter < 1)
        throw InputError("config: newton.tol must be positive and newton.max_iter >= 1");
    if (c.newton.sigma0 && !(*c.newton.sigma0 > 0.0))
        throw InputError("config: newton.sigma0 must be positive");
    n.threads = c.threads;

    if (const auto v = r.list("study.epsilons"))
        c.epsilons = *v;
    else if (c.kind == ExperimentKind::Convergence)
        c.epsilons = powers_of_two(2, 7);
    else if (estimate)
        c.epsilons = {0.01, 0.02, 0.04, 0.08, 0.16, 0.32};
    if (const auto v = r.list("study.sigmas"))
        c.sigmas = *v;
    else
        c.sigmas = validate ? std::vector<double>{5.0, 10.0} : std::vector<double>{5.0, 10.0, 20.0};
    if (const auto v = r.list("study.betas"))
        c.betas = *v;
    else
        c.betas = {-2.0, -1.0, 0.0};
    if (const auto v = r.list("study.thicknesses"))
        c.thicknesses = *v;
    else
        // Thin films keep ε-scaled roughness slopes small enough for the expansion.
        for (int i = 1; i <= 10; ++i)
            c.thicknesses.push_back((estimate ? 0.1 : 10.0) * i);
    assign(c.order, r.get<int>("study.order"));
    assign(c.xi.a, r.get<double>("study.xi_a"));
    assign(c.xi.b, r.get<double>("study.xi_b"));
    assign(c.validation_threshold, r.get<double>("study.threshold"));
    assign(c.validation_beta_cut, r.get<double>("study.beta_cut"));
    assign(c.timing_repeats, r.get<int>("study.repeats"));
    if (c.order < 0 || c.order > 2)
        throw InputError("config: study.order must be 0, 1 or 2");
    if (c.xi.b < c.xi.a)
        throw InputError("config: study.xi_a must not exceed study.xi_b");
    if (c.timing_repeats < 1)
        throw InputError("config: study.repeats must be >= 1");
    for (double e : c.epsilons)
        if (!(e >= 0.0))
            throw InputError("config: epsilons must be non-negative");
    for (double s : c.sigmas)
        if (!(s > 0.0))
            throw InputError("config: sigmas must be positive");
    for (std::size_t i = 0; i < c.thicknesses.size(); ++i)
        if (!(c.thicknesses[i] > 0.0) || (i > 0 && !(c.thicknesses[i] > c.thicknesses[i - 1])))
            throw InputError("config: thicknesses must be positive and strictly increasing");
    return c;
}

RunConfig load_config(const std::filesystem::path& path, std::optional<ExperimentKind> kind)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw InputError("cannot open config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), kind);
}

std::string sha256_hex(const std::string& data)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw NumericalError("sha256 digest failed");
    std::ostringstream os;
    os << std::hex << std::setfill('0');
    for (unsigned int i = 0; i < len; ++i)
        os << std::setw(2) << int(digest[i]);
    return os.str();
}

// ---------------------------------------------------------------------------------------------

SlopeFit fit_slope(const std::vector<double>& x, const std::vector<double>& error)
{
    if (x.size() != error.size())
        throw InputError("slope fit: x and error lengths differ");
    if (x.size() < 3)
        throw InputError("slope fit needs at least 3 points");
    const std::size_t n = x.size();
    double sx = 0, sy = 0;
    std::vector<double> lx(n), ly(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(x[i] > 0.0) || !(error[i] > 0.0))
            throw InputError("slope fit needs positive abscissae and errors");
        lx[i] = std::log(x[i]);
        ly[i] = std::log(error[i]);
        sx += lx[i];
        sy += ly[i];
    }
    const double mx = sx / double(n), my = sy / double(n);
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    if (sxx == 0.0)
        throw InputError("slope fit needs distinct abscissae");
    SlopeFit f;
    f.x = x;
    f.error = error;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double rss = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = ly[i] - (f.intercept + f.slope * lx[i]);
        rss += r * r;
    }
    f.residual = std::sqrt(rss / double(n));
    return f;
}

PLCurve generate_synthetic_curve(const SyntheticSpec& spec, double sigma_star, const std::vector<double>& thicknesses)
{
    PLCurve curve;
    std::vector<double> values;
    if (spec.kind == SyntheticKind::Model2D) {
        curve.source = CurveSource::Synthetic2D;
        const Mapped2DProvider p(spec.device, spec.family, spec.rule, Grid2D(spec.cells, spec.cells), 1);
        values = evaluate_curve(p, sigma_star, thicknesses, spec.threads);
    } else {
        curve.source = CurveSource::Synthetic1D;
        const Model1DProvider p(spec.device, spec.xi, spec.cells);
        values = evaluate_curve(p, sigma_star, thicknesses, spec.threads);
    }
    for (std::size_t i = 0; i < thicknesses.size(); ++i)
        curve.points.push_back({thicknesses[i], values[i]});
    curve.validate();
    return curve;
}

// ---------------------------------------------------------------------------------------------
// Studies

namespace {

// (4 f_h - f_2h) / 3 when enabled, else the fine value.
double extrapolate(double fine, double coarse, bool on)
{
    return on ? (4.0 * fine - coarse) / 3.0 : fine;
}

double reference_expectation(const DeviceConfig& dev, const InterfaceModel& model, const QuadratureRule& rule,
                             int cells, int threads)
{
    const Grid2D g(cells, cells);
    return expect(rule, [&](const InterfaceSample& s) { return pl_of_sample(dev, model, s, g); }, threads).value;
}

std::array<double, 3> asymptotic_expectations(const DeviceConfig& dev, const InterfaceModel& model, int cells)
{
    const auto basis = build_basis(dev, model, fixed_domain_grid(dev, cells, cells), 2);
    const auto a = assemble_approximant(basis);
    const Moments m = moments(model.dist());
    return {expected_pl(a, m, 0), expected_pl(a, m, 1), expected_pl(a, m, 2)};
}

std::optional<SlopeFit> try_fit(const std::vector<double>& x, const std::vector<double>& e)
{
    try {
        return fit_slope(x, e);
    } catch (const InputError&) {
        return std::nullopt;
    }
}

} // namespace

ConvergenceResult convergence_study(const RunConfig& cfg)
{
    const DeviceConfig dev = cfg.device_for(cfg.sigma, cfg.d);
    const QuadratureRule rule = cfg.reference_rule.build(cfg.modes, cfg.family.dist, cfg.seed);
    const bool rich = cfg.grid.richardson;

    ConvergenceResult out;
    out.reference_rule = rule.describe();
    out.richardson = rich;
    for (double eps : cfg.epsilons) {
        const InterfaceModel model(eps * dev.d, dev.L, cfg.family.lambdas, cfg.family.dist);
        ConvergenceRow row;
        row.epsilon = eps;
        row.reference_raw = reference_expectation(dev, model, rule, cfg.grid.reference, cfg.threads);
        const auto fine = asymptotic_expectations(dev, model, cfg.grid.asymptotic);
        row.reference = row.reference_raw;
        std::array<double, 3> coarse = fine;
        if (rich) {
            const double rc = reference_expectation(dev, model, rule, cfg.grid.reference / 2, cfg.threads);
            row.reference = extrapolate(row.reference_raw, rc, true);
            coarse = asymptotic_expectations(dev, model, cfg.grid.asymptotic / 2);
        }
        for (int n = 0; n < 3; ++n) {
            row.expected_raw[n] = fine[std::size_t(n)];
            row.expected[n] = extrapolate(fine[std::size_t(n)], coarse[std::size_t(n)], rich);
            row.error[n] = std::abs(row.expected[n] - row.reference);
            row.error_raw[n] = std::abs(row.expected_raw[n] - row.reference_raw);
        }
        out.max_order01_gap = std::max(out.max_order01_gap, std::abs(row.expected[0] - row.expected[1]));
        out.rows.push_back(row);
    }

    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (int n = 0; n < 3; ++n) {
        std::vector<double> x, e, er;
        for (const auto& r : out.rows) {
            x.push_back(r.epsilon);
            e.push_back(r.error[n]);
            er.push_back(r.error_raw[n]);
        }
        const auto f = try_fit(x, e);
        const auto fr = try_fit(x, er);
        SlopeFit blank;
        blank.x = x;
        blank.error = e;
        blank.slope = blank.intercept = blank.residual = nan;
        out.fits.push_back(f.value_or(blank));
        out.fits_raw.push_back(fr ? *fr : blank);
    }
    return out;
}

std::string to_string(CellStatus s)
{
    switch (s) {
    case CellStatus::Converged:
        return "converged";
    case CellStatus::NotConverged:
        return "not_converged";
    case CellStatus::DomainFailure:
        return "domain_error";
    case CellStatus::NumericalFailure:
        return "numerical_error";
    }
    return "?";
}

namespace {

EstimationCell run_cell(const ForwardProvider& estimator, const std::function<PLCurve()>& data, double sigma_star,
                        const RunConfig& cfg)
{
    EstimationCell cell;
    cell.sigma_star = sigma_star;
    try {
        const PLCurve curve = data();
        NewtonOptions opt = cfg.newton.options;
        opt.sigma_exact = sigma_star;
        cell.trace = newton_estimate(estimator, curve, cfg.newton.initial_sigma(curve.thicknesses()), opt);
        cell.status = cell.trace.reason == Termination::Converged ? CellStatus::Converged : CellStatus::NotConverged;
        if (cell.status != CellStatus::Converged)
            cell.message = to_string(cell.trace.reason);
    } catch (const EstimationFailure& e) {
        cell.status = CellStatus::NotConverged;
        cell.trace = e.trace();
        cell.message = e.what();
    } catch (const DomainError& e) {
        cell.status = CellStatus::DomainFailure;
        cell.message = e.what();
    } catch (const NumericalError& e) {
        cell.status = CellStatus::NumericalFailure;
        cell.message = e.what();
    }
    return cell;
}

} // namespace

std::vector<EstimationCell> estimation_study(const RunConfig& cfg)
{
    std::vector<EstimationCell> cells;
    for (double sigma_star : cfg.sigmas) {
        for (double eps : cfg.epsilons) {
            InterfaceFamily fam = cfg.family;
            fam.scaling = InterfaceFamily::Scaling::FixedEpsilon;
            fam.amplitude = eps;
            const AsymptoticProvider estimator(cfg.device, fam, cfg.grid.asymptotic, cfg.grid.asymptotic, cfg.order,
                                             cfg.grid.solver);
            SyntheticSpec spec;
            spec.kind = SyntheticKind::Model2D;
            spec.device = cfg.device;
            spec.family = fam;
            spec.rule = cfg.rule.build(cfg.modes, fam.dist, cfg.seed);
            spec.cells = cfg.grid.data;
            spec.threads = cfg.threads;
            EstimationCell cell = run_cell(
                estimator, [&] { return generate_synthetic_curve(spec, sigma_star, cfg.thicknesses); }, sigma_star,
                cfg);
            cell.epsilon = eps;
            cells.push_back(std::move(cell));
        }
    }
    return cells;
}

double correlation_half_width(const InterfaceModel& model, int samples)
{
    // Averaging over z1 leaves Σ λ_k² cos(2 π k r / L) / 2, up to the common hbar² Var(θ) factor.
    const auto& lam = model.lambdas();
    const double L = model.period();
    auto c = [&](double r) {
        double s = 0.0;
        for (std::size_t k = 0; k < lam.size(); ++k)
            s += lam[k] * lam[k] * std::cos(2.0 * std::numbers::pi * double(k + 1) * r / L);
        return s;
    };
    const double c0 = c(0.0);
    if (!(c0 > 0.0))
        return 0.0;
    double prev_r = 0.0, prev = c0;
    for (int i = 1; i <= samples; ++i) {
        const double r = 0.5 * L * i / samples;
        const double v = c(r);
        if (v <= 0.5 * c0) {
            // Linear interpolation inside the bracketing step.
            return prev_r + (r - prev_r) * (prev - 0.5 * c0) / (prev - v);
        }
        prev_r = r;
        prev = v;
    }
    return 0.5 * L;
}

ValidationResult validation_study(const RunConfig& cfg)
{
    ValidationResult out;
    for (double beta : cfg.betas) {
        InterfaceFamily fam = cfg.family;
        fam.lambdas.resize(std::size_t(cfg.modes));
        for (int k = 1; k <= cfg.modes; ++k)
            fam.lambdas[std::size_t(k - 1)] = std::pow(double(k), beta);
        out.half_widths.push_back(correlation_half_width(fam.make(1.0, cfg.device.L)));
    }

    for (double sigma_star : cfg.sigmas) {
        SyntheticSpec spec;
        spec.kind = SyntheticKind::Model1D;
        spec.device = cfg.device;
        spec.cells = cfg.grid.cells_1d;
        spec.xi = cfg.xi;
        spec.threads = cfg.threads;
        std::optional<PLCurve> curve;
        for (double beta : cfg.betas) {
            InterfaceFamily fam = cfg.family;
            fam.lambdas.resize(std::size_t(cfg.modes));
            for (int k = 1; k <= cfg.modes; ++k)
                fam.lambdas[std::size_t(k - 1)] = std::pow(double(k), beta);
            const AsymptoticProvider estimator(cfg.device, fam, cfg.grid.asymptotic, cfg.grid.asymptotic, cfg.order,
                                             cfg.grid.solver);
            EstimationCell cell = run_cell(
                estimator,
                [&] {
                    if (!curve)
                        curve = generate_synthetic_curve(spec, sigma_star, cfg.thicknesses);
                    return *curve;
                },
                sigma_star, cfg);
            cell.beta = beta;
            out.cells.push_back(std::move(cell));
        }
    }

    out.rule_holds = !out.cells.empty();
    for (const auto& c : out.cells) {
        const bool small = c.status == CellStatus::Converged && c.trace.final_rel_error() < cfg.validation_threshold;
        if (small != (c.beta <= cfg.validation_beta_cut))
            out.rule_holds = false;
    }
    return out;
}

TimingResult timing_study(const RunConfig& cfg)
{
    using clock = std::chrono::steady_clock;
    const DeviceConfig dev = cfg.device_for(cfg.sigma, cfg.d);
    const InterfaceModel model = cfg.model_for(cfg.d);
    const int K = cfg.modes;
    const int reps = cfg.timing_repeats;
    auto seconds = [](clock::duration dt) { return std::chrono::duration<double>(dt).count(); };

    TimingResult out;
    const QuadratureRule ref_rule = cfg.reference_rule.build(K, model.dist(), cfg.seed);
    auto t0 = clock::now();
    const double ref = reference_expectation(dev, model, ref_rule, cfg.grid.reference, cfg.threads);
    out.entries.push_back({"reference " + ref_rule.describe() + " H=1/" + std::to_string(cfg.grid.reference),
                           seconds(clock::now() - t0), ref, 0.0, ref_rule.size()});

    // Asymptotic order 2 on the coarse grid.
    double asym = 0.0;
    std::size_t asym_solves = 0;
    t0 = clock::now();
    for (int r = 0; r < reps; ++r) {
        const auto basis = build_basis(dev, model, fixed_domain_grid(dev, cfg.grid.asymptotic, cfg.grid.asymptotic), 2);
        asym = expected_pl(assemble_approximant(basis), moments(model.dist()), 2);
        asym_solves = std::size_t(basis.solve_count);
    }
    const TimingEntry asym_entry{"asymptotic order 2 H=1/" + std::to_string(cfg.grid.asymptotic),
                                 seconds(clock::now() - t0) / reps, asym, std::abs(asym - ref), asym_solves};

    // Collocation ladder on the same coarse grid, cheapest first.
    std::vector<QuadratureRule> ladder;
    for (int level = 1; level <= 3; ++level)
        ladder.push_back(build_rule(RuleKind::Smolyak, K, level, model.dist()));
    for (int n = 2; n <= 3; ++n)
        ladder.push_back(build_rule(RuleKind::TensorGaussLegendre, K, n, model.dist()));
    std::sort(ladder.begin(), ladder.end(), [](const auto& a, const auto& b) { return a.size() < b.size(); });

    std::optional<std::size_t> matched;
    for (const auto& rule : ladder) {
        double v = 0.0;
        t0 = clock::now();
        for (int r = 0; r < reps; ++r)
            v = reference_expectation(dev, model, rule, cfg.grid.asymptotic, cfg.threads);
        out.entries.push_back({"collocation " + rule.describe() + " H=1/" + std::to_string(cfg.grid.asymptotic),
                               seconds(clock::now() - t0) / reps, v, std::abs(v - ref), rule.size()});
        // Comparable accuracy: within a factor 1.5 of the asymptotic error or better.
        if (!matched && out.entries.back().error <= 1.5 * asym_entry.error)
            matched = out.entries.size() - 1;
    }
    out.entries.push_back(asym_entry);
    const std::size_t m = matched.value_or(out.entries.size() - 2);
    out.matched_method = out.entries[m].method;
    out.speedup = out.entries[m].seconds / asym_entry.seconds;

    // Same coefficients through z-Fourier modes, for reference.
    t0 = clock::now();
    double modal = 0.0;
    for (int r = 0; r < reps; ++r)
        modal = expected_pl(modal_approximant(dev, model, cfg.grid.asymptotic, cfg.grid.asymptotic, 2),
                            moments(model.dist()), 2);
    out.entries.push_back({"asymptotic order 2 modal H=1/" + std::to_string(cfg.grid.asymptotic),
                           seconds(clock::now() - t0) / reps, modal, std::abs(modal - ref), std::size_t(1 + 2 * K)});
    return out;
}

// ---------------------------------------------------------------------------------------------
// Output

namespace {

class OutputDir {
public:
    OutputDir(const RunConfig& cfg) : cfg_(cfg)
    {
        std::error_code ec;
        std::filesystem::create_directories(cfg.output, ec);
        if (ec || !std::filesystem::is_directory(cfg.output))
            throw InputError("cannot create output directory " + cfg.output.string());
    }

    /// Opens a CSV whose first line carries the config hash.
    std::ofstream csv(const std::string& name)
    {
        std::ofstream out(cfg_.output / name, std::ios::binary);
        if (!out)
            throw InputError("cannot write " + (cfg_.output / name).string());
        out << "# config_hash=" << cfg_.hash << '\n';
        out.precision(17);
        files_.push_back(name);
        return out;
    }

    const std::vector<std::string>& files() const { return files_; }

private:
    const RunConfig& cfg_;
    std::vector<std::string> files_;
};

std::string fmt(double v)
{
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

void write_traces(OutputDir& dir, const std::vector<EstimationCell>& cells, bool by_beta)
{
    for (const auto& c : cells) {
        if (c.trace.sigma.empty())
            continue;
        const std::string name = "trace_sigma" + fmt(c.sigma_star) +
                                 (by_beta ? "_beta" + fmt(c.beta) : "_eps" + fmt(c.epsilon)) + ".csv";
        auto out = dir.csv(name);
        c.trace.write_csv(out);
    }
}

void write_summary(std::ofstream& out, const std::vector<EstimationCell>& cells)
{
    out << "sigma_star,epsilon,beta,status,iterations,final_sigma,final_rel_error,message\n";
    for (const auto& c : cells) {
        std::string msg = c.message;
        std::replace(msg.begin(), msg.end(), ',', ';');
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        out << c.sigma_star << ',' << c.epsilon << ',' << c.beta << ',' << to_string(c.status) << ','
            << c.trace.iterations() << ',';
        if (c.trace.sigma.empty())
            out << "nan,nan,";
        else
            out << c.trace.final_sigma() << ',' << c.trace.final_rel_error() << ',';
        out << msg << '\n';
    }
}

} // namespace

std::vector<std::string> run_experiment(const RunConfig& cfg)
{
    OutputDir dir(cfg);
    nlohmann::ordered_json manifest;
    manifest["kind"] = to_string(cfg.kind);
    manifest["config_hash"] = cfg.hash;
    manifest["seed"] = cfg.seed;
    manifest["version"] = "0.1.0";
    manifest["grids"] = {{"asymptotic", cfg.grid.asymptotic},
                         {"reference", cfg.grid.reference},
                         {"data", cfg.grid.data},
                         {"cells_1d", cfg.grid.cells_1d},
                         {"richardson", cfg.grid.richardson},
                         {"asymptotic_solver", to_string(cfg.grid.solver)}};
    manifest["rules"] = {{"rule", cfg.rule.build(cfg.modes, cfg.family.dist, cfg.seed).describe()},
                         {"reference_rule", cfg.reference_rule.build(cfg.modes, cfg.family.dist, cfg.seed).describe()}};

    switch (cfg.kind) {
    case ExperimentKind::Forward: {
        const DeviceConfig dev = cfg.device_for(cfg.sigma, cfg.d);
        const InterfaceModel model = cfg.model_for(cfg.d);
        InterfaceSample s;
        s.thetas = cfg.thetas.empty() ? std::vector<double>(std::size_t(cfg.modes), model.dist().mean()) : cfg.thetas;
        const auto sol = solve_mapped_2d(dev, model, s, Grid2D(cfg.grid.reference, cfg.grid.reference));
        auto f = dir.csv("field.csv");
        sol.field.write_csv(f);
        auto p = dir.csv("pl.csv");
        p << "pl\n" << sol.pl << '\n';
        break;
    }
    case ExperimentKind::Expect: {
        const DeviceConfig dev = cfg.device_for(cfg.sigma, cfg.d);
        const InterfaceModel model = cfg.model_for(cfg.d);
        const QuadratureRule rule = cfg.rule.build(cfg.modes, model.dist(), cfg.seed);
        const double sc = reference_expectation(dev, model, rule, cfg.grid.reference, cfg.threads);
        const auto basis =
            build_basis(dev, model, fixed_domain_grid(dev, cfg.grid.asymptotic, cfg.grid.asymptotic), cfg.order);
        const auto approx = assemble_approximant(basis);
        auto out = dir.csv("expect.csv");
        out << "method,value,solves\n";
        out << "collocation," << sc << ',' << rule.size() << '\n';
        for (int n = 0; n <= cfg.order; ++n)
            out << "asymptotic_order" << n << ',' << expected_pl(approx, moments(model.dist()), n) << ','
                << basis.solve_count << '\n';
        auto a = dir.csv("approximant.csv");
        approx.write_csv(a);
        auto q = dir.csv("rule.csv");
        rule.write_csv(q);
        break;
    }
    case ExperimentKind::Convergence: {
        const auto res = convergence_study(cfg);
        auto out = dir.csv("convergence.csv");
        out << "epsilon,reference,E0,E1,E2,err0,err1,err2,reference_raw,E0_raw,E1_raw,E2_raw,err0_raw,err1_raw,"
               "err2_raw\n";
        for (const auto& r : res.rows) {
            out << r.epsilon << ',' << r.reference;
            for (double v : r.expected)
                out << ',' << v;
            for (double v : r.error)
                out << ',' << v;
            out << ',' << r.reference_raw;
            for (double v : r.expected_raw)
                out << ',' << v;
            for (double v : r.error_raw)
                out << ',' << v;
            out << '\n';
        }
        auto s = dir.csv("slopes.csv");
        s << "order,slope,intercept,residual,slope_raw\n";
        for (int n = 0; n < 3; ++n)
            s << n << ',' << res.fits[std::size_t(n)].slope << ',' << res.fits[std::size_t(n)].intercept << ','
              << res.fits[std::size_t(n)].residual << ',' << res.fits_raw[std::size_t(n)].slope << '\n';
        manifest["rules"]["reference_rule"] = res.reference_rule;
        break;
    }
    case ExperimentKind::Estimate: {
        const auto cells = estimation_study(cfg);
        auto out = dir.csv("estimation.csv");
        write_summary(out, cells);
        write_traces(dir, cells, false);
        break;
    }
    case ExperimentKind::Validate1D: {
        const auto res = validation_study(cfg);
        auto out = dir.csv("validation.csv");
        write_summary(out, res.cells);
        write_traces(dir, res.cells, true);
        auto cov = dir.csv("covariance.csv");
        cov << "beta,half_width\n";
        for (std::size_t i = 0; i < cfg.betas.size(); ++i)
            cov << cfg.betas[i] << ',' << res.half_widths[i] << '\n';
        auto rule = dir.csv("rule_check.csv");
        rule << "threshold,beta_cut,holds\n"
             << cfg.validation_threshold << ',' << cfg.validation_beta_cut << ',' << (res.rule_holds ? 1 : 0) << '\n';
        break;
    }
    case ExperimentKind::Timing: {
        const auto res = timing_study(cfg);
        // Wall times vary run to run, so this file is excluded from replay comparisons.
        auto out = dir.csv("timing.csv");
        out << "method,seconds,value,error,solves\n";
        for (const auto& e : res.entries)
            out << '"' << e.method << "\"," << e.seconds << ',' << e.value << ',' << e.error << ',' << e.solves
                << '\n';
        out << "\"speedup vs " << res.matched_method << "\"," << res.speedup << ",,,\n";
        break;
    }
    }

    manifest["outputs"] = dir.files();
    manifest["config"] = cfg.text;
    std::ofstream m(cfg.output / "manifest.json", std::ios::binary);
    if (!m)
        throw InputError("cannot write manifest.json");
    m << manifest.dump(2) << '\n';
    auto files = dir.files();
    files.push_back("manifest.json");
    return files;
}

} // namespace exciton
