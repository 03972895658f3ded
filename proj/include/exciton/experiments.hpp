#pragma once

#include "exciton/collocation.hpp"
#include "exciton/inverse.hpp"

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace exciton {

enum class ExperimentKind { Forward, Expect, Convergence, Estimate, Validate1D, Timing };

std::string to_string(ExperimentKind k);
ExperimentKind parse_experiment_kind(const std::string& s);

struct RuleConfig {
    RuleKind kind = RuleKind::TensorGaussLegendre;
    int level = 3;

    QuadratureRule build(int K, UniformDist support, std::uint64_t seed) const;
};

struct GridConfig {
    int asymptotic = 64; // cells per direction for the flat-film expansion
    int reference = 128; // cells per direction for the mapped reference
    int data = 64;       // cells per direction for synthetic 2D data
    int cells_1d = 1024;
    /// Extrapolate the convergence study from H and 2H to strip the grid offset.
    bool richardson = true;
    AsymptoticSolver solver = AsymptoticSolver::Modal; // estimation and validation runs
};

struct NewtonConfig {
    NewtonOptions options;
    std::optional<double> sigma0;
    std::optional<double> bracket_lo;
    std::optional<double> bracket_hi;

    /// Bracket midpoint, else 0.25 * max(d).
    double initial_sigma(const std::vector<double>& thicknesses) const;
};

/// Everything a run needs, parsed from an INI-style file.
///
/// Sections and keys are listed in the README. Lists are comma separated.
struct RunConfig {
    ExperimentKind kind = ExperimentKind::Forward;
    std::filesystem::path output = "out";
    std::uint64_t seed = 1;
    int threads = 0;

    // device
    DeviceTemplate device;
    double sigma = 1.0;
    double d = 1.0;

    // interface
    InterfaceFamily family;
    std::optional<double> beta; // lambdas = k^beta when set
    int modes = 5;

    GridConfig grid;
    RuleConfig rule;           // collocation for expect / synthetic data
    RuleConfig reference_rule; // oracle rule for convergence and timing
    NewtonConfig newton;

    // study sweeps
    std::vector<double> epsilons;
    std::vector<double> sigmas;
    std::vector<double> betas;
    std::vector<double> thicknesses;
    int order = 2;
    UniformDist xi{0.0, 0.0}; // 1D data offset law; a == b means a fixed offset
    double validation_threshold = 0.01;
    double validation_beta_cut = -1.0;
    int timing_repeats = 1;
    std::vector<double> thetas; // single sample for the forward command

    std::string text; // source text, hashed into every output
    std::string hash;

    InterfaceModel model_for(double d_value) const;
    DeviceConfig device_for(double sigma_value, double d_value) const;
};

/// kind, when given, replaces run.kind (and the kind-dependent defaults) and enters the hash.
RunConfig parse_config(const std::string& text, std::optional<ExperimentKind> kind = std::nullopt);
RunConfig load_config(const std::filesystem::path& path, std::optional<ExperimentKind> kind = std::nullopt);

/// Lowercase hex SHA-256.
std::string sha256_hex(const std::string& data);

// ---------------------------------------------------------------------------------------------

struct SlopeFit {
    std::vector<double> x;
    std::vector<double> error;
    double slope = 0.0;
    double intercept = 0.0;
    double residual = 0.0; // RMS of log-log residuals
};

/// Least squares of log(error) against log(x). Needs >= 3 points with positive errors.
SlopeFit fit_slope(const std::vector<double>& x, const std::vector<double>& error);

enum class SyntheticKind { Model2D, Model1D };

struct SyntheticSpec {
    SyntheticKind kind = SyntheticKind::Model2D;
    DeviceTemplate device;
    InterfaceFamily family;   // Model2D only
    QuadratureRule rule;      // Model2D only
    int cells = 64;           // per direction (2D) or along the line (1D)
    UniformDist xi{0.0, 0.0}; // Model1D only
    int threads = 0;
};

PLCurve generate_synthetic_curve(const SyntheticSpec& spec, double sigma_star, const std::vector<double>& thicknesses);

// ---------------------------------------------------------------------------------------------

/// Values after grid extrapolation (when enabled) and the raw finest-grid values.
struct ConvergenceRow {
    double epsilon = 0.0;
    double reference = 0.0;
    double expected[3] = {0.0, 0.0, 0.0};
    double error[3] = {0.0, 0.0, 0.0};
    double reference_raw = 0.0;
    double expected_raw[3] = {0.0, 0.0, 0.0};
    double error_raw[3] = {0.0, 0.0, 0.0};
};

struct ConvergenceResult {
    std::vector<ConvergenceRow> rows;
    std::vector<SlopeFit> fits;     // one per order 0..2; NaN slope when a fit is impossible
    std::vector<SlopeFit> fits_raw; // same on the raw values
    double max_order01_gap = 0.0;   // max |E I_0 - E I_1|
    bool richardson = false;
    std::string reference_rule;
};

ConvergenceResult convergence_study(const RunConfig& cfg);

enum class CellStatus { Converged, NotConverged, DomainFailure, NumericalFailure };

std::string to_string(CellStatus s);

struct EstimationCell {
    double sigma_star = 0.0;
    double epsilon = 0.0; // estimation study
    double beta = 0.0;    // validation study
    CellStatus status = CellStatus::NotConverged;
    std::string message;
    EstimationTrace trace;
};

std::vector<EstimationCell> estimation_study(const RunConfig& cfg);

struct ValidationResult {
    std::vector<EstimationCell> cells;
    std::vector<double> half_widths; // per beta, correlation half-width of the interface
    /// Converged error below threshold exactly for beta <= cut, per sigma*.
    bool rule_holds = false;
};

/// Smallest lag r > 0 where the z-averaged covariance falls to half its zero-lag value.
double correlation_half_width(const InterfaceModel& model, int samples = 4096);

ValidationResult validation_study(const RunConfig& cfg);

struct TimingEntry {
    std::string method;
    double seconds = 0.0;
    double value = 0.0;
    double error = 0.0; // |value - reference|
    std::size_t solves = 0;
};

struct TimingResult {
    /// Reference first, then the collocation ladder, the 2D asymptotic and the modal asymptotic.
    std::vector<TimingEntry> entries;
    double speedup = 0.0; // matched collocation time / 2D asymptotic time
    std::string matched_method;
};

TimingResult timing_study(const RunConfig& cfg);

// ---------------------------------------------------------------------------------------------

/// Runs the configured experiment, writes CSVs and manifest.json into cfg.output, and returns
/// the written file names.
std::vector<std::string> run_experiment(const RunConfig& cfg);

} // namespace exciton
