#pragma once

#include "exciton/fd_core.hpp"
#include "exciton/interface.hpp"

#include <optional>
#include <vector>

namespace exciton {

/// Exciton generation G(x), x measured from the illuminated top of the film.
/// Either a constant or a sum of decaying exponentials a_m exp(-x / l_m).
class GenerationProfile {
public:
    struct ExpTerm {
        double amplitude;
        double decay;
    };

    static GenerationProfile constant(double c);
    static GenerationProfile exp_sum(std::vector<ExpTerm> terms);
    /// exp(-x / decay), the single-term default.
    static GenerationProfile exponential(double decay) { return exp_sum({{1.0, decay}}); }

    double operator()(double x) const;

    bool is_constant() const { return constant_.has_value(); }
    const std::vector<ExpTerm>& terms() const { return terms_; }
    double constant_value() const { return constant_.value_or(0.0); }

private:
    std::optional<double> constant_;
    std::vector<ExpTerm> terms_;
};

/// One bilayer device: diffusion length, film thickness, in-plane period, generation.
struct DeviceConfig {
    double sigma = 1.0;
    double d = 1.0;
    double L = 4.0;
    GenerationProfile G = GenerationProfile::constant(1.0);

    /// G(x) = exp(-x / (d/2)).
    static DeviceConfig with_default_generation(double sigma, double d, double L);

    DeviceConfig with_sigma(double s) const;
    void validate() const;
};

/// Domain-mapped problem on the unit square for one coefficient sample:
/// sigma² L u - u + g = 0, u(0, z) = 0, u_y(1, z) = 0, periodic in z.
///
/// The system matrix is factorized once; solve() and the sigma-sensitivity solves share it.
class MappedProblem2D {
public:
    MappedProblem2D(const DeviceConfig& device, const InterfaceModel& model,
                    const InterfaceSample& sample, const Grid2D& grid);

    const Grid2D& grid() const { return grid_; }

    Field2D solve() const;

    /// PL = ∫∫ u (d - h(z)) dy dz.
    double pl(const Field2D& u) const;

    /// u1 = du/dsigma and u2 = d²u/dsigma² from the differentiated equations.
    std::pair<Field2D, Field2D> sensitivities(const Field2D& u) const;

    const Field2D& generation() const { return g_; }

private:
    DeviceConfig device_;
    Grid2D grid_;
    std::vector<double> thickness_; // d - h at each column, physical z = L * zeta
    Field2D g_;
    Eigen::VectorXd rhs_;
    LinearSolver solver_;
};

struct MappedSolution {
    Field2D field;
    DeviceConfig device;
    InterfaceSample sample;
    double pl = 0.0;
};

/// Throws DomainError if d - h(z) <= 0 anywhere on a fine z sweep.
void check_domain(const DeviceConfig& device, const InterfaceModel& model,
                  const InterfaceSample& sample, int columns);

MappedSolution solve_mapped_2d(const DeviceConfig& device, const InterfaceModel& model,
                               const InterfaceSample& sample, const Grid2D& grid);

double pl_of_sample(const DeviceConfig& device, const InterfaceModel& model,
                    const InterfaceSample& sample, const Grid2D& grid);

/// 1D reduction over (xi, d) mapped to (0, 1).
class MappedProblem1D {
public:
    MappedProblem1D(const DeviceConfig& device, Interface1D xi, int cells);

    std::vector<double> solve() const;
    double pl(const std::vector<double>& u) const;
    std::pair<std::vector<double>, std::vector<double>> sensitivities(const std::vector<double>& u) const;

    int cells() const { return cells_; }

private:
    std::vector<double> solve_rhs(const std::vector<double>& rhs) const;

    DeviceConfig device_;
    double thickness_;
    int cells_;
    std::vector<double> g_;
};

struct Solution1D {
    std::vector<double> field;
    double pl = 0.0;
};

Solution1D solve_mapped_1d(const DeviceConfig& device, Interface1D xi, int cells);

/// d - sigma tanh(d / sigma): PL of the flat film with G = 1.
double closed_form_pl_constant_generation(double sigma, double d);

} // namespace exciton
