#pragma once

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <Eigen/UmfPackSupport>

#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

namespace exciton {

/// Structured (ny+1) x (nz+1) node grid on [0, ly] x [0, lz].
///
/// y is the direction carrying Dirichlet (y = 0) and Neumann (y = ly) conditions,
/// z is periodic with period lz. Node (i, j) sits at (i*hy, j*hz), 0-based.
struct Grid2D {
    int ny = 0;
    int nz = 0;
    double ly = 1.0;
    double lz = 1.0;

    Grid2D() = default;
    Grid2D(int ny, int nz, double ly = 1.0, double lz = 1.0);

    double hy() const { return ly / ny; }
    double hz() const { return lz / nz; }
    double y(int i) const { return i * hy(); }
    double z(int j) const { return j * hz(); }
    std::size_t node_count() const { return std::size_t(ny + 1) * std::size_t(nz + 1); }

    bool operator==(const Grid2D&) const = default;
};

/// Nodal values on a Grid2D, row-major in (i, j). Periodic fields keep column nz equal to column 0.
class Field2D {
public:
    Field2D() = default;
    explicit Field2D(const Grid2D& grid, double fill = 0.0);

    const Grid2D& grid() const { return grid_; }
    double& operator()(int i, int j) { return values_[index(i, j)]; }
    double operator()(int i, int j) const { return values_[index(i, j)]; }
    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }

    double min() const;
    double max_abs() const;

    /// Columns y,z,value with a header row.
    void write_csv(std::ostream& out) const;

    Field2D& operator+=(const Field2D& other);
    Field2D& operator*=(double s);

private:
    std::size_t index(int i, int j) const { return std::size_t(i) * std::size_t(grid_.nz + 1) + std::size_t(j); }

    Grid2D grid_;
    std::vector<double> values_;
};

/// Difference quotients at one node. Centered forms need 1 <= i <= ny-1 and 1 <= j <= nz-1.
struct Stencils {
    double d0y, dmy, dpy;
    double d0z, dmz, dpz;
    double dpdmy, dpdmz;
    double d0yd0z;
};

Stencils stencils(const Field2D& field, int i, int j);

/// a_yy u_yy + a_zz u_zz + a_yz u_yz + a_y u_y + a_0 u = rhs at one node.
struct NodeCoefficients {
    double yy = 0.0;
    double zz = 0.0;
    double yz = 0.0;
    double y = 0.0;
    double c0 = 0.0;
    double rhs = 0.0;
};

using CoefficientProvider = std::function<NodeCoefficients(int i, int j)>;

/// Dirichlet data at y = 0 (one value per unique column j = 0..nz-1, empty means zero),
/// homogeneous Neumann at y = ly through a ghost row, periodic wrap in z.
struct BoundarySpec {
    std::vector<double> dirichlet;

    double value(int j) const { return dirichlet.empty() ? 0.0 : dirichlet[std::size_t(j)]; }
};

/// Linear system over the unknowns i = 1..ny, j = 0..nz-1, index (i-1)*nz + j.
struct SparseSystem {
    Grid2D grid;
    Eigen::SparseMatrix<double> matrix;
    Eigen::VectorXd rhs;

    int dimension() const { return static_cast<int>(rhs.size()); }
};

SparseSystem assemble(const CoefficientProvider& coeffs, const BoundarySpec& bc, const Grid2D& grid);

/// Sparse LU factorization of one system matrix, reusable across right-hand sides.
class LinearSolver {
public:
    explicit LinearSolver(const Eigen::SparseMatrix<double>& matrix);
    ~LinearSolver();
    LinearSolver(LinearSolver&&) noexcept;
    LinearSolver& operator=(LinearSolver&&) noexcept;

    /// Residual 2-norm is checked against 1e-10 * (1 + |rhs|).
    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

Eigen::VectorXd solve(const SparseSystem& system);

/// Relative residual tolerance every solve must meet.
inline constexpr double kResidualTolerance = 1e-10;

/// Lift an unknown vector back to a full field: Dirichlet row from bc, periodic column copied.
Field2D to_field(const Grid2D& grid, const Eigen::VectorXd& x, const BoundarySpec& bc);

/// Restrict a field to the unknown layout used by assemble().
Eigen::VectorXd to_unknowns(const Field2D& field);

/// Composite trapezoid over both directions, optionally weighted by w(z) per column.
double trapezoid_2d(const Field2D& field, const std::function<double(double)>& weight = {});

double trapezoid_1d(std::span<const double> values, double spacing);

/// Second-order one-sided y-derivative at y = 0 for every column j = 0..nz.
std::vector<double> one_sided_dx_at_boundary(const Field2D& field);

/// Same one-sided formula on a single column of nodal values.
double one_sided_dx(std::span<const double> values, double spacing);

/// Two-point problem a(i) u'' + c0(i) u = rhs(i) on i = 1..n with u(0) = left and
/// u'(end) = 0 by ghost reflection. Returns all n+1 nodal values.
struct LineCoefficients {
    double yy = 0.0;
    double c0 = 0.0;
    double rhs = 0.0;
};

std::vector<double> solve_line(const std::function<LineCoefficients(int i)>& coeffs, int n,
                               double spacing, double left = 0.0);

} // namespace exciton
