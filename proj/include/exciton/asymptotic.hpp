#pragma once

#include "exciton/fd_core.hpp"
#include "exciton/forward.hpp"
#include "exciton/interface.hpp"

#include <iosfwd>
#include <vector>

namespace exciton {

/// sigma² (w_xx + w_zz) - w + source = 0 on the flat film (0, d) x (0, L), w = data at x = 0,
/// w_x = 0 at x = d, periodic in z. Every term of the expansion shares this operator, so the
/// factorization is built once and reused across right-hand sides.
class FixedDomainOperator {
public:
    FixedDomainOperator(const DeviceConfig& device, const Grid2D& grid);

    const Grid2D& grid() const { return grid_; }
    const DeviceConfig& device() const { return device_; }

    /// Dirichlet data per unique column j = 0..nz-1; with_generation adds G(d - x).
    Field2D solve(const std::vector<double>& dirichlet, bool with_generation) const;

    /// Back-substitutions performed so far.
    int solve_count() const { return solves_; }

private:
    DeviceConfig device_;
    Grid2D grid_;
    Eigen::SparseMatrix<double> matrix_;
    LinearSolver solver_;
    mutable int solves_ = 0;
};

/// Physical grid for the flat film: ny cells across d, nz cells across one period L.
Grid2D fixed_domain_grid(const DeviceConfig& device, int ny, int nz);

Field2D solve_w0(const DeviceConfig& device, const Grid2D& grid);

/// Boundary datum -d φ_k(z) ∂x w0(0, z).
Field2D solve_w1k(const DeviceConfig& device, const InterfaceModel& model, const Grid2D& grid, int k,
                  const Field2D& w0);

/// Unsymmetrized datum -d φ_j ∂x w1k(0, z) + d² G(d) φ_j φ_k / (2 sigma²).
Field2D solve_w2jk(const DeviceConfig& device, const InterfaceModel& model, const Grid2D& grid, int j,
                   int k, const Field2D& w1k);

/// Deterministic building blocks of the order-n expansion (n <= 2).
///
/// w2 holds only the symmetrized pairs j <= k, stored at w2[pair_index(j, k)].
/// The datum used is ½(b_jk + b_kj); only this symmetric part enters any θ_j θ_k sum.
struct AsymptoticBasis {
    DeviceConfig device;
    InterfaceModel model;
    Grid2D grid;
    int order = 2;
    Field2D w0;
    std::vector<Field2D> w1;
    std::vector<Field2D> w2;
    std::vector<double> dw0_dx;              // ∂x w0(0, z_j), j = 0..nz
    std::vector<std::vector<double>> dw1_dx; // ∂x w1,k(0, z_j)
    int solve_count = 0;

    static std::size_t pair_index(int j, int k, int K);
    const Field2D& w2_at(int j, int k) const;
};

/// Number of BVP solves for an order-n basis with K modes: 1, 1 + K, 1 + K + K(K+1)/2.
int basis_solve_count(int K, int order);

AsymptoticBasis build_basis(const DeviceConfig& device, const InterfaceModel& model, const Grid2D& grid,
                            int order = 2);

/// Scalar coefficients of the photoluminescence approximants I0, I1, I2.
struct PLApproximant {
    double i0 = 0.0;
    std::vector<double> i1;                     // I0[w1,k]
    std::vector<std::vector<double>> i2;        // I0[w2,j,k], symmetric
    std::vector<std::vector<double>> boundary;  // (d²/2L) ∫ φ_j φ_k ∂x w0(0, z) dz
    std::vector<double> lambdas;
    double epsilon = 0.0;
    int order = 2;

    /// Header: kind,j,k,value
    void write_csv(std::ostream& out) const;
};

PLApproximant assemble_approximant(const AsymptoticBasis& basis);

/// Same coefficients as assemble_approximant(build_basis(...)) on an ny x nz grid, but from
/// z-Fourier modes: sin(2πkz/L) diagonalizes the periodic second difference, so every flat-film
/// problem reduces to tridiagonal solves along x (1 + 2K in total). Needs nz > 2K so that no
/// product mode aliases to the mean.
PLApproximant modal_approximant(const DeviceConfig& device, const InterfaceModel& model, int ny, int nz,
                                int order = 2);

/// E[I_n] from the coefficient moments. Throws UnsupportedError for n > 2.
double expected_pl(const PLApproximant& approx, const Moments& m, int order);

/// I_n for one coefficient sample.
double sampled_pl(const PLApproximant& approx, const InterfaceSample& sample, int order);

/// v^[n] = Σ_{m <= n} ε^m w_m for one sample, on the flat-film grid.
Field2D sampled_field(const AsymptoticBasis& basis, const InterfaceSample& sample, int order);

} // namespace exciton
