#pragma once

#include "exciton/asymptotic.hpp"
#include "exciton/collocation.hpp"
#include "exciton/errors.hpp"
#include "exciton/forward.hpp"

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace exciton {

// ---------------------------------------------------------------------------------------------
// Measured or synthetic data

enum class CurveSource { Synthetic2D, Synthetic1D, External };

std::string to_string(CurveSource s);
CurveSource parse_curve_source(const std::string& s);

struct PLPoint {
    double d = 0.0;
    double value = 0.0;
};

/// Photoluminescence per film thickness. Thicknesses strictly increase and values are positive.
struct PLCurve {
    std::vector<PLPoint> points;
    CurveSource source = CurveSource::External;

    std::size_t size() const { return points.size(); }
    std::vector<double> thicknesses() const;
    void validate() const;

    /// '#'-prefixed lines are comments; the header is "d,pl".
    void write_csv(std::ostream& out) const;
    static PLCurve read_csv(std::istream& in);
};

// ---------------------------------------------------------------------------------------------
// Per-thickness device and interface construction

/// Builds the device for a given (sigma, d). The period and generation law are shared.
struct DeviceTemplate {
    enum class Generation {
        Constant,      // G = value
        RelativeDecay, // G = exp(-x / (value * d))
        FixedDecay,    // G = exp(-x / value)
    };
    Generation generation = Generation::RelativeDecay;
    double value = 0.5;
    double L = 4.0;

    DeviceConfig make(double sigma, double d) const;
    void validate() const;
};

/// Builds the interface law for a given thickness. Either hbar is fixed across devices
/// or epsilon = hbar / d is.
struct InterfaceFamily {
    enum class Scaling { FixedHbar, FixedEpsilon };
    Scaling scaling = Scaling::FixedEpsilon;
    double amplitude = 0.01;
    std::vector<double> lambdas{1.0, 1.0, 1.0, 1.0, 1.0};
    UniformDist dist{-1.0, 1.0};

    InterfaceModel make(double d, double L) const;
    int modes() const { return static_cast<int>(lambdas.size()); }
};

// ---------------------------------------------------------------------------------------------
// Forward providers

/// E[I] together with its first two sigma-derivatives when requested.
struct ProviderValue {
    double value = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
};

enum class DerivativeMethod { SensitivityPDE, CentralFD };

std::string to_string(DerivativeMethod m);
DerivativeMethod parse_derivative_method(const std::string& s);

struct DerivativePlan {
    DerivativeMethod method = DerivativeMethod::CentralFD;
    double relative_step = 1e-4;
    /// Extrapolate the steps h and 2h and fail if they disagree beyond richardson_tolerance.
    bool richardson = true;
    double richardson_tolerance = 1e-2;
};

/// sigma -> E[I(sigma, d)] for one device thickness.
class ForwardProvider {
public:
    virtual ~ForwardProvider() = default;

    virtual std::string name() const = 0;
    virtual double expected_pl(double sigma, double d) const = 0;

    /// True when the sigma-sensitivity equations are available.
    virtual bool has_sensitivities() const { return false; }
    /// Value and derivatives from the sensitivity equations.
    virtual ProviderValue expected_pl_sensitivities(double sigma, double d) const;
};

/// Checks that the plan is usable with this provider (UnsupportedError otherwise).
void check_plan(const ForwardProvider& provider, const DerivativePlan& plan);

ProviderValue evaluate(const ForwardProvider& provider, double sigma, double d, const DerivativePlan& plan);

/// 1D reduction. xi is fixed, or averaged over U(a, b) with Gauss-Legendre when a < b.
class Model1DProvider final : public ForwardProvider {
public:
    Model1DProvider(DeviceTemplate device, UniformDist xi = {0.0, 0.0}, int cells = 1024, int xi_points = 8);

    std::string name() const override { return "model_1d"; }
    double expected_pl(double sigma, double d) const override;
    bool has_sensitivities() const override { return true; }
    ProviderValue expected_pl_sensitivities(double sigma, double d) const override;

private:
    DeviceTemplate device_;
    std::vector<double> xi_nodes_;
    std::vector<double> xi_weights_;
    int cells_;
};

/// Mapped 2D solver averaged over a quadrature rule.
class Mapped2DProvider final : public ForwardProvider {
public:
    Mapped2DProvider(DeviceTemplate device, InterfaceFamily family, QuadratureRule rule, Grid2D grid,
                     int threads = 1);

    std::string name() const override { return "mapped_2d"; }
    double expected_pl(double sigma, double d) const override;
    bool has_sensitivities() const override { return true; }
    ProviderValue expected_pl_sensitivities(double sigma, double d) const override;

    const QuadratureRule& rule() const { return rule_; }

private:
    DeviceTemplate device_;
    InterfaceFamily family_;
    QuadratureRule rule_;
    Grid2D grid_;
    int threads_;
};

/// How the flat-film problems are solved. Both give the same discrete coefficients.
enum class AsymptoticSolver { Modal, Full2D };

std::string to_string(AsymptoticSolver s);
AsymptoticSolver parse_asymptotic_solver(const std::string& s);

/// Order-n asymptotic expected PL on an ny x nz flat-film grid.
class AsymptoticProvider final : public ForwardProvider {
public:
    AsymptoticProvider(DeviceTemplate device, InterfaceFamily family, int ny = 64, int nz = 64, int order = 2,
                       AsymptoticSolver solver = AsymptoticSolver::Modal);

    std::string name() const override { return "asymptotic"; }
    double expected_pl(double sigma, double d) const override;

private:
    DeviceTemplate device_;
    InterfaceFamily family_;
    int ny_;
    int nz_;
    int order_;
    AsymptoticSolver solver_;
};

/// u1 = du/dsigma, u2 = d²u/dsigma² for one coefficient sample.
std::pair<Field2D, Field2D> sensitivities_mapped(const DeviceConfig& device, const InterfaceModel& model,
                                                 const InterfaceSample& sample, const Grid2D& grid,
                                                 const Field2D& u);

/// Provider values at every thickness of the curve, in curve order.
std::vector<double> evaluate_curve(const ForwardProvider& provider, double sigma, const std::vector<double>& d,
                                   int threads = 0);
std::vector<ProviderValue> evaluate_curve(const ForwardProvider& provider, double sigma,
                                          const std::vector<double>& d, const DerivativePlan& plan,
                                          int threads = 0);

// ---------------------------------------------------------------------------------------------
// Least-squares objective and Newton iteration

/// J(sigma) = (1/N) Σ (E[I(sigma, d_i)] - Ĩ_i)².
double objective(const ForwardProvider& provider, const PLCurve& curve, double sigma, int threads = 0);

struct ObjectiveValue {
    double J = 0.0;
    double dJ = 0.0;
    double d2J = 0.0;
};

ObjectiveValue objective_derivatives(const ForwardProvider& provider, const PLCurve& curve, double sigma,
                                     const DerivativePlan& plan, int threads = 0);

struct NewtonOptions {
    double tol = 1e-4;
    int max_iter = 50;
    bool line_search = true;
    double armijo = 1e-4;
    int max_halvings = 20;
    DerivativePlan plan;
    std::optional<double> sigma_exact;
    int threads = 0;
};

enum class Termination { Converged, MaxIterations, LineSearchFailed };

std::string to_string(Termination t);

struct EstimationTrace {
    std::vector<double> sigma;     // sigma^(0..n)
    std::vector<double> J;         // J(sigma^(n))
    std::vector<double> alpha;     // step length taken to reach sigma^(n); 0 for n = 0
    std::vector<double> rel_error; // |sigma^(n) - sigma*| / sigma*, NaN without a reference
    Termination reason = Termination::MaxIterations;
    int clamps = 0;                // non-positive candidates replaced by sigma / 2

    std::size_t iterations() const { return sigma.empty() ? 0 : sigma.size() - 1; }
    double final_sigma() const { return sigma.back(); }
    double final_rel_error() const { return rel_error.back(); }

    /// Columns n,sigma,J,alpha,rel_error.
    void write_csv(std::ostream& out) const;
};

/// Thrown when Newton exhausts max_iter; carries the iterates so far.
class EstimationFailure : public NumericalError {
public:
    EstimationFailure(const std::string& what, EstimationTrace trace)
        : NumericalError(what), trace_(std::move(trace))
    {
    }
    const EstimationTrace& trace() const { return trace_; }

private:
    EstimationTrace trace_;
};

EstimationTrace newton_estimate(const ForwardProvider& provider, const PLCurve& curve, double sigma0,
                                const NewtonOptions& options = {});

} // namespace exciton
