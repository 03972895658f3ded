#include "exciton/forward.hpp"

#include "exciton/errors.hpp"

#include <cmath>
#include <string>

namespace exciton {

GenerationProfile GenerationProfile::constant(double c)
{
    if (!(c >= 0.0) || !std::isfinite(c))
        throw InputError("generation: constant must be non-negative");
    GenerationProfile g;
    g.constant_ = c;
    return g;
}

GenerationProfile GenerationProfile::exp_sum(std::vector<ExpTerm> terms)
{
    if (terms.empty())
        throw InputError("generation: need at least one exponential term");
    for (const auto& t : terms)
        if (!(t.amplitude > 0.0) || !(t.decay > 0.0))
            throw InputError("generation: amplitudes and decay lengths must be positive");
    GenerationProfile g;
    g.terms_ = std::move(terms);
    return g;
}

double GenerationProfile::operator()(double x) const
{
    if (constant_)
        return *constant_;
    double sum = 0.0;
    for (const auto& t : terms_)
        sum += t.amplitude * std::exp(-x / t.decay);
    return sum;
}

DeviceConfig DeviceConfig::with_default_generation(double sigma, double d, double L)
{
    return DeviceConfig{sigma, d, L, GenerationProfile::exponential(0.5 * d)};
}

DeviceConfig DeviceConfig::with_sigma(double s) const
{
    DeviceConfig c = *this;
    c.sigma = s;
    return c;
}

void DeviceConfig::validate() const
{
    if (!(sigma > 0.0))
        throw InputError("device: sigma must be positive");
    if (!(d > 0.0))
        throw InputError("device: thickness d must be positive");
    if (!(L > 0.0))
        throw InputError("device: period L must be positive");
}

void check_domain(const DeviceConfig& device, const InterfaceModel& model,
                  const InterfaceSample& sample, int columns)
{
    if (model.max_amplitude_bound() < device.d)
        return;
    const int n = std::max(columns, 16) * 4;
    for (int j = 0; j < n; ++j) {
        const double z = device.L * j / n;
        if (!(device.d - model.evaluate(sample, z) > 0.0))
            throw DomainError("interface reaches the top of the film (d = " + std::to_string(device.d) +
                              ", h = " + std::to_string(model.evaluate(sample, z)) + ")");
    }
}

namespace {

struct ColumnGeometry {
    double thickness; // d - h
    double dh;        // h'
    double d2h;       // h''
};

std::vector<ColumnGeometry> column_geometry(const DeviceConfig& device, const InterfaceModel& model,
                                            const InterfaceSample& sample, const Grid2D& grid)
{
    std::vector<ColumnGeometry> cols(std::size_t(grid.nz) + 1);
    for (int j = 0; j <= grid.nz; ++j) {
        const double z = device.L * grid.z(j);
        cols[std::size_t(j)] = {device.d - model.evaluate(sample, z), model.evaluate_dz(sample, z),
                                model.evaluate_dzz(sample, z)};
    }
    return cols;
}

SparseSystem assemble_mapped(const DeviceConfig& device, const std::vector<ColumnGeometry>& cols,
                             const Field2D& g, const Grid2D& grid)
{
    const double s2 = device.sigma * device.sigma;
    const double L = device.L;
    auto coeffs = [&](int i, int j) {
        const ColumnGeometry& c = cols[std::size_t(j)];
        const double y1 = 1.0 - grid.y(i);
        const double D = c.thickness;
        NodeCoefficients n;
        n.yy = s2 * (y1 * y1 * c.dh * c.dh + 1.0) / (D * D);
        n.zz = s2 / (L * L);
        n.yz = -s2 * (2.0 / L) * y1 * c.dh / D;
        n.y = -s2 * (2.0 * y1 * c.dh * c.dh / (D * D) + y1 * c.d2h / D);
        n.c0 = -1.0;
        n.rhs = -g(i, j);
        return n;
    };
    return assemble(coeffs, BoundarySpec{}, grid);
}

void require_unit_square(const Grid2D& grid)
{
    if (grid.ly != 1.0 || grid.lz != 1.0)
        throw InputError("mapped solver expects a unit-square grid");
}

} // namespace

MappedProblem2D::MappedProblem2D(const DeviceConfig& device, const InterfaceModel& model,
                                 const InterfaceSample& sample, const Grid2D& grid)
    : device_(device), grid_(grid), solver_([&] {
          device.validate();
          require_unit_square(grid);
          check_domain(device, model, sample, grid.nz);
          const auto cols = column_geometry(device, model, sample, grid);
          thickness_.reserve(cols.size());
          for (const auto& c : cols)
              thickness_.push_back(c.thickness);
          g_ = Field2D(grid);
          for (int i = 0; i <= grid.ny; ++i)
              for (int j = 0; j <= grid.nz; ++j)
                  g_(i, j) = device.G((1.0 - grid.y(i)) * thickness_[std::size_t(j)]);
          SparseSystem sys = assemble_mapped(device, cols, g_, grid);
          rhs_ = std::move(sys.rhs);
          return LinearSolver(sys.matrix);
      }())
{
}

Field2D MappedProblem2D::solve() const
{
    return to_field(grid_, solver_.solve(rhs_), BoundarySpec{});
}

double MappedProblem2D::pl(const Field2D& u) const
{
    // Weight columns by d - h; the 1/L of the physical average cancels against dz = L dzeta.
    const Grid2D& g = grid_;
    double total = 0.0;
    for (int j = 0; j <= g.nz; ++j) {
        double col = 0.0;
        for (int i = 0; i <= g.ny; ++i)
            col += ((i == 0 || i == g.ny) ? 0.5 : 1.0) * u(i, j);
        total += ((j == 0 || j == g.nz) ? 0.5 : 1.0) * thickness_[std::size_t(j)] * col;
    }
    return total * g.hy() * g.hz();
}

std::pair<Field2D, Field2D> MappedProblem2D::sensitivities(const Field2D& u) const
{
    if (!(u.grid() == grid_))
        throw InputError("sensitivities: field grid does not match problem grid");
    const double s = device_.sigma;
    const int nz = grid_.nz;
    Eigen::VectorXd r1(rhs_.size());
    for (int i = 1; i <= grid_.ny; ++i)
        for (int j = 0; j < nz; ++j)
            r1[(i - 1) * nz + j] = -(2.0 / s) * (u(i, j) - g_(i, j));
    const Field2D u1 = to_field(grid_, solver_.solve(r1), BoundarySpec{});

    Eigen::VectorXd r2(rhs_.size());
    for (int i = 1; i <= grid_.ny; ++i)
        for (int j = 0; j < nz; ++j)
            r2[(i - 1) * nz + j] = (6.0 / (s * s)) * (u(i, j) - g_(i, j)) - (4.0 / s) * u1(i, j);
    Field2D u2 = to_field(grid_, solver_.solve(r2), BoundarySpec{});
    return {u1, std::move(u2)};
}

MappedSolution solve_mapped_2d(const DeviceConfig& device, const InterfaceModel& model,
                               const InterfaceSample& sample, const Grid2D& grid)
{
    MappedProblem2D problem(device, model, sample, grid);
    MappedSolution out;
    out.field = problem.solve();
    out.pl = problem.pl(out.field);
    out.device = device;
    out.sample = sample;
    return out;
}

double pl_of_sample(const DeviceConfig& device, const InterfaceModel& model,
                    const InterfaceSample& sample, const Grid2D& grid)
{
    MappedProblem2D problem(device, model, sample, grid);
    return problem.pl(problem.solve());
}

MappedProblem1D::MappedProblem1D(const DeviceConfig& device, Interface1D xi, int cells)
    : device_(device), thickness_(device.d - xi.xi), cells_(cells)
{
    device.validate();
    if (!(thickness_ > 0.0))
        throw DomainError("1D interface offset xi must be below the film thickness");
    if (cells < 2)
        throw InputError("1D solver needs at least 2 cells");
    g_.resize(std::size_t(cells) + 1);
    for (int i = 0; i <= cells; ++i)
        g_[std::size_t(i)] = device.G((1.0 - double(i) / cells) * thickness_);
}

std::vector<double> MappedProblem1D::solve_rhs(const std::vector<double>& rhs) const
{
    const double a = device_.sigma * device_.sigma / (thickness_ * thickness_);
    return solve_line([&](int i) { return LineCoefficients{a, -1.0, rhs[std::size_t(i)]}; }, cells_,
                      1.0 / cells_);
}

std::vector<double> MappedProblem1D::solve() const
{
    std::vector<double> rhs(g_.size());
    for (std::size_t i = 0; i < g_.size(); ++i)
        rhs[i] = -g_[i];
    return solve_rhs(rhs);
}

double MappedProblem1D::pl(const std::vector<double>& u) const
{
    return thickness_ * trapezoid_1d(u, 1.0 / cells_);
}

std::pair<std::vector<double>, std::vector<double>>
MappedProblem1D::sensitivities(const std::vector<double>& u) const
{
    const double s = device_.sigma;
    std::vector<double> r(g_.size());
    for (std::size_t i = 0; i < r.size(); ++i)
        r[i] = -(2.0 / s) * (u[i] - g_[i]);
    std::vector<double> u1 = solve_rhs(r);
    for (std::size_t i = 0; i < r.size(); ++i)
        r[i] = (6.0 / (s * s)) * (u[i] - g_[i]) - (4.0 / s) * u1[i];
    std::vector<double> u2 = solve_rhs(r);
    return {std::move(u1), std::move(u2)};
}

Solution1D solve_mapped_1d(const DeviceConfig& device, Interface1D xi, int cells)
{
    MappedProblem1D p(device, xi, cells);
    Solution1D s;
    s.field = p.solve();
    s.pl = p.pl(s.field);
    return s;
}

double closed_form_pl_constant_generation(double sigma, double d)
{
    return d - sigma * std::tanh(d / sigma);
}

} // namespace exciton
