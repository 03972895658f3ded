#include "exciton/fd_core.hpp"

#include "exciton/errors.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

namespace exciton {

Grid2D::Grid2D(int ny_, int nz_, double ly_, double lz_) : ny(ny_), nz(nz_), ly(ly_), lz(lz_)
{
    if (ny < 4 || nz < 4)
        throw InputError("grid: need ny, nz >= 4 (got " + std::to_string(ny) + ", " +
                         std::to_string(nz) + ")");
    if (!(ly > 0.0) || !(lz > 0.0))
        throw InputError("grid: extents must be positive");
}

Field2D::Field2D(const Grid2D& grid, double fill) : grid_(grid), values_(grid.node_count(), fill) {}

double Field2D::min() const
{
    return values_.empty() ? 0.0 : *std::min_element(values_.begin(), values_.end());
}

double Field2D::max_abs() const
{
    double m = 0.0;
    for (double v : values_)
        m = std::max(m, std::abs(v));
    return m;
}

void Field2D::write_csv(std::ostream& out) const
{
    out << "y,z,value\n";
    const auto prec = out.precision(17);
    for (int i = 0; i <= grid_.ny; ++i)
        for (int j = 0; j <= grid_.nz; ++j)
            out << grid_.y(i) << ',' << grid_.z(j) << ',' << (*this)(i, j) << '\n';
    out.precision(prec);
}

Field2D& Field2D::operator+=(const Field2D& other)
{
    if (!(other.grid_ == grid_))
        throw InputError("field: grid mismatch in accumulation");
    for (std::size_t n = 0; n < values_.size(); ++n)
        values_[n] += other.values_[n];
    return *this;
}

Field2D& Field2D::operator*=(double s)
{
    for (double& v : values_)
        v *= s;
    return *this;
}

Stencils stencils(const Field2D& f, int i, int j)
{
    const Grid2D& g = f.grid();
    if (i < 1 || i > g.ny - 1 || j < 1 || j > g.nz - 1)
        throw InputError("stencils: node (" + std::to_string(i) + ", " + std::to_string(j) +
                         ") is not interior");
    const double hy = g.hy();
    const double hz = g.hz();
    Stencils s{};
    s.d0y = (f(i + 1, j) - f(i - 1, j)) / (2 * hy);
    s.dmy = (f(i, j) - f(i - 1, j)) / hy;
    s.dpy = (f(i + 1, j) - f(i, j)) / hy;
    s.d0z = (f(i, j + 1) - f(i, j - 1)) / (2 * hz);
    s.dmz = (f(i, j) - f(i, j - 1)) / hz;
    s.dpz = (f(i, j + 1) - f(i, j)) / hz;
    s.dpdmy = (f(i + 1, j) - 2 * f(i, j) + f(i - 1, j)) / (hy * hy);
    s.dpdmz = (f(i, j + 1) - 2 * f(i, j) + f(i, j - 1)) / (hz * hz);
    s.d0yd0z = (f(i + 1, j + 1) - f(i + 1, j - 1) - f(i - 1, j + 1) + f(i - 1, j - 1)) / (4 * hy * hz);
    return s;
}

SparseSystem assemble(const CoefficientProvider& coeffs, const BoundarySpec& bc, const Grid2D& grid)
{
    const int ny = grid.ny;
    const int nz = grid.nz;
    if (!bc.dirichlet.empty() && static_cast<int>(bc.dirichlet.size()) != nz)
        throw InputError("assemble: Dirichlet data must have one value per unique column");

    const double hy = grid.hy();
    const double hz = grid.hz();
    const int n = ny * nz;
    auto unknown = [nz](int i, int j) { return (i - 1) * nz + j; };

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(std::size_t(n) * 9);
    Eigen::VectorXd rhs(n);

    for (int i = 1; i <= ny; ++i) {
        for (int j = 0; j < nz; ++j) {
            const NodeCoefficients c = coeffs(i, j);
            const int row = unknown(i, j);
            const int jm = (j - 1 + nz) % nz;
            const int jp = (j + 1) % nz;
            double b = c.rhs;

            // Neighbour weights on the 3x3 block, indexed [di+1][dj+1].
            double w[3][3] = {};
            const double ayy = c.yy / (hy * hy);
            const double azz = c.zz / (hz * hz);
            const double ayz = c.yz / (4 * hy * hz);
            const double ay = c.y / (2 * hy);
            w[1][1] += -2 * ayy - 2 * azz + c.c0;
            w[1][0] += azz;
            w[1][2] += azz;
            if (i < ny) {
                w[0][1] += ayy - ay;
                w[2][1] += ayy + ay;
                w[2][2] += ayz;
                w[2][0] -= ayz;
                w[0][2] -= ayz;
                w[0][0] += ayz;
            } else {
                // Ghost row u(ny+1) = u(ny-1): the centered first and mixed differences vanish.
                w[0][1] += 2 * ayy;
            }

            const int cols[3] = {jm, j, jp};
            for (int di = -1; di <= 1; ++di) {
                const int ii = i + di;
                if (ii > ny)
                    continue;
                for (int dj = 0; dj < 3; ++dj) {
                    const double v = w[di + 1][dj];
                    if (v == 0.0)
                        continue;
                    if (ii == 0)
                        b -= v * bc.value(cols[dj]);
                    else
                        triplets.emplace_back(row, unknown(ii, cols[dj]), v);
                }
            }
            rhs[row] = b;
        }
    }

    SparseSystem sys;
    sys.grid = grid;
    sys.matrix.resize(n, n);
    sys.matrix.setFromTriplets(triplets.begin(), triplets.end());
    sys.matrix.makeCompressed();
    sys.rhs = std::move(rhs);
    return sys;
}

struct LinearSolver::Impl {
    Eigen::SparseMatrix<double> matrix;
    Eigen::UmfPackLU<Eigen::SparseMatrix<double>> lu;
};

LinearSolver::LinearSolver(const Eigen::SparseMatrix<double>& matrix) : impl_(std::make_unique<Impl>())
{
    impl_->matrix = matrix;
    impl_->lu.analyzePattern(impl_->matrix);
    impl_->lu.factorize(impl_->matrix);
    if (impl_->lu.info() != Eigen::Success)
        throw NumericalError("sparse LU factorization failed: " + std::string("umfpack"));
}

LinearSolver::~LinearSolver() = default;
LinearSolver::LinearSolver(LinearSolver&&) noexcept = default;
LinearSolver& LinearSolver::operator=(LinearSolver&&) noexcept = default;

Eigen::VectorXd LinearSolver::solve(const Eigen::VectorXd& rhs) const
{
    Eigen::VectorXd x = impl_->lu.solve(rhs);
    if (impl_->lu.info() != Eigen::Success)
        throw NumericalError("sparse LU solve failed");
    const double res = (impl_->matrix * x - rhs).norm();
    if (!std::isfinite(res) || res > kResidualTolerance * (1.0 + rhs.norm()))
        throw NumericalError("linear solve residual " + std::to_string(res) + " above tolerance", res);
    return x;
}

Eigen::VectorXd solve(const SparseSystem& system)
{
    return LinearSolver(system.matrix).solve(system.rhs);
}

Field2D to_field(const Grid2D& grid, const Eigen::VectorXd& x, const BoundarySpec& bc)
{
    if (x.size() != Eigen::Index(grid.ny) * grid.nz)
        throw InputError("to_field: unknown vector size does not match grid");
    Field2D f(grid);
    for (int j = 0; j < grid.nz; ++j)
        f(0, j) = bc.value(j);
    for (int i = 1; i <= grid.ny; ++i)
        for (int j = 0; j < grid.nz; ++j)
            f(i, j) = x[(i - 1) * grid.nz + j];
    for (int i = 0; i <= grid.ny; ++i)
        f(i, grid.nz) = f(i, 0);
    return f;
}

Eigen::VectorXd to_unknowns(const Field2D& field)
{
    const Grid2D& g = field.grid();
    Eigen::VectorXd x(Eigen::Index(g.ny) * g.nz);
    for (int i = 1; i <= g.ny; ++i)
        for (int j = 0; j < g.nz; ++j)
            x[(i - 1) * g.nz + j] = field(i, j);
    return x;
}

double trapezoid_2d(const Field2D& field, const std::function<double(double)>& weight)
{
    const Grid2D& g = field.grid();
    double total = 0.0;
    for (int j = 0; j <= g.nz; ++j) {
        double col = 0.0;
        for (int i = 0; i <= g.ny; ++i) {
            const double wy = (i == 0 || i == g.ny) ? 0.5 : 1.0;
            col += wy * field(i, j);
        }
        const double wz = (j == 0 || j == g.nz) ? 0.5 : 1.0;
        const double scale = weight ? weight(g.z(j)) : 1.0;
        total += wz * scale * col;
    }
    return total * g.hy() * g.hz();
}

double trapezoid_1d(std::span<const double> values, double spacing)
{
    if (values.size() < 2)
        return 0.0;
    double sum = 0.5 * (values.front() + values.back());
    for (std::size_t n = 1; n + 1 < values.size(); ++n)
        sum += values[n];
    return sum * spacing;
}

double one_sided_dx(std::span<const double> values, double spacing)
{
    if (values.size() < 3)
        throw InputError("one-sided derivative needs at least 3 nodes");
    return (-3 * values[0] + 4 * values[1] - values[2]) / (2 * spacing);
}

std::vector<double> one_sided_dx_at_boundary(const Field2D& field)
{
    const Grid2D& g = field.grid();
    if (g.ny < 2)
        throw InputError("one-sided derivative needs at least 3 nodes");
    std::vector<double> out(std::size_t(g.nz) + 1);
    for (int j = 0; j <= g.nz; ++j)
        out[std::size_t(j)] = (-3 * field(0, j) + 4 * field(1, j) - field(2, j)) / (2 * g.hy());
    return out;
}

std::vector<double> solve_line(const std::function<LineCoefficients(int i)>& coeffs, int n,
                               double spacing, double left)
{
    if (n < 2)
        throw InputError("solve_line: need at least 2 cells");
    const double h2 = spacing * spacing;
    // Thomas algorithm on rows i = 1..n; row n uses the ghost reflection.
    std::vector<double> lower(n + 1), diag(n + 1), upper(n + 1), rhs(n + 1);
    for (int i = 1; i <= n; ++i) {
        const LineCoefficients c = coeffs(i);
        const double a = c.yy / h2;
        diag[i] = -2 * a + c.c0;
        rhs[i] = c.rhs;
        if (i < n) {
            lower[i] = a;
            upper[i] = a;
        } else {
            lower[i] = 2 * a;
        }
    }
    rhs[1] -= lower[1] * left;
    lower[1] = 0.0;

    for (int i = 2; i <= n; ++i) {
        if (diag[i - 1] == 0.0)
            throw NumericalError("solve_line: zero pivot");
        const double m = lower[i] / diag[i - 1];
        diag[i] -= m * upper[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    std::vector<double> u(n + 1);
    u[0] = left;
    u[n] = rhs[n] / diag[n];
    for (int i = n - 1; i >= 1; --i)
        u[i] = (rhs[i] - upper[i] * u[i + 1]) / diag[i];
    for (double v : u)
        if (!std::isfinite(v))
            throw NumericalError("solve_line: non-finite solution");
    return u;
}

} // namespace exciton
