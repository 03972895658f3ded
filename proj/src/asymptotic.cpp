#include "exciton/asymptotic.hpp"

#include "exciton/errors.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <string>

// Boundary data at x = 0 come from Taylor-expanding w(h(z), z) = 0 around the flat film:
//   w_m(0, z) = -Σ_{k=1..m} (d h̃)^k / k! ∂x^k w_{m-k}(0, z).
// For m = 2 the ∂xx w0 term is rewritten with the equation itself (w0(0, z) = 0 gives
// ∂xx w0(0, z) = -G(d) / sigma²). Orders m >= 3 would need ∂x^3 w0 and ∂xx w1 converted the
// same way and K^m solves; they are not built here.

namespace exciton {

namespace {

void check_order(int order)
{
    if (order < 0)
        throw InputError("expansion order must be non-negative");
    if (order > 2)
        throw UnsupportedError("expansion orders above 2 are not implemented");
}

} // namespace

Grid2D fixed_domain_grid(const DeviceConfig& device, int ny, int nz)
{
    return Grid2D(ny, nz, device.d, device.L);
}

FixedDomainOperator::FixedDomainOperator(const DeviceConfig& device, const Grid2D& grid)
    : device_(device), grid_(grid), solver_([&] {
          device.validate();
          if (grid.ly != device.d || grid.lz != device.L)
              throw InputError("fixed-domain grid must span (0, d) x (0, L)");
          const double s2 = device.sigma * device.sigma;
          SparseSystem sys = assemble(
              [s2](int, int) {
                  NodeCoefficients c;
                  c.yy = s2;
                  c.zz = s2;
                  c.c0 = -1.0;
                  return c;
              },
              BoundarySpec{}, grid);
          matrix_ = sys.matrix;
          return LinearSolver(sys.matrix);
      }())
{
}

Field2D FixedDomainOperator::solve(const std::vector<double>& dirichlet, bool with_generation) const
{
    const int ny = grid_.ny;
    const int nz = grid_.nz;
    if (!dirichlet.empty() && static_cast<int>(dirichlet.size()) != nz)
        throw InputError("fixed-domain solve: Dirichlet data must have nz entries");
    const double coupling = device_.sigma * device_.sigma / (grid_.hy() * grid_.hy());
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(Eigen::Index(ny) * nz);
    for (int i = 1; i <= ny; ++i) {
        const double src = with_generation ? -device_.G(device_.d - grid_.y(i)) : 0.0;
        for (int j = 0; j < nz; ++j)
            rhs[(i - 1) * nz + j] = src;
    }
    BoundarySpec bc{dirichlet};
    for (int j = 0; j < nz; ++j)
        rhs[j] -= coupling * bc.value(j);
    ++solves_;
    return to_field(grid_, solver_.solve(rhs), bc);
}

Field2D solve_w0(const DeviceConfig& device, const Grid2D& grid)
{
    return FixedDomainOperator(device, grid).solve({}, true);
}

namespace {

std::vector<double> w1_datum(const DeviceConfig& device, const InterfaceModel& model, const Grid2D& grid,
                             int k, const std::vector<double>& dw0)
{
    std::vector<double> b(std::size_t(grid.nz));
    for (int j = 0; j < grid.nz; ++j)
        b[std::size_t(j)] = -device.d * model.basis(k, grid.z(j)) * dw0[std::size_t(j)];
    return b;
}

// b_jk(z) = -d φ_j ∂x w1,k(0, z) + d² G(d) φ_j φ_k / (2 sigma²), modes 1-based.
std::vector<double> w2_datum(const DeviceConfig& device, const InterfaceModel& model, const Grid2D& grid,
                             int j, int k, const std::vector<double>& dw1k)
{
    const double curv = device.d * device.d * device.G(device.d) / (2.0 * device.sigma * device.sigma);
    std::vector<double> b(std::size_t(grid.nz));
    for (int c = 0; c < grid.nz; ++c) {
        const double z = grid.z(c);
        const double pj = model.basis(j, z);
        b[std::size_t(c)] = -device.d * pj * dw1k[std::size_t(c)] + curv * pj * model.basis(k, z);
    }
    return b;
}

} // namespace

Field2D solve_w1k(const DeviceConfig& device, const InterfaceModel& model, const Grid2D& grid, int k,
                  const Field2D& w0)
{
    if (k < 1 || k > model.modes())
        throw InputError("solve_w1k: mode index out of range");
    FixedDomainOperator op(device, grid);
    return op.solve(w1_datum(device, model, grid, k, one_sided_dx_at_boundary(w0)), false);
}

Field2D solve_w2jk(const DeviceConfig& device, const InterfaceModel& model, const Grid2D& grid, int j,
                   int k, const Field2D& w1k)
{
    if (j < 1 || j > model.modes() || k < 1 || k > model.modes())
        throw InputError("solve_w2jk: mode index out of range");
    FixedDomainOperator op(device, grid);
    return op.solve(w2_datum(device, model, grid, j, k, one_sided_dx_at_boundary(w1k)), false);
}

std::size_t AsymptoticBasis::pair_index(int j, int k, int K)
{
    if (j > k)
        std::swap(j, k);
    // Row-major upper triangle, 1-based modes.
    const std::size_t r = std::size_t(j - 1);
    return r * std::size_t(K) - r * (r - 1) / 2 + std::size_t(k - j);
}

const Field2D& AsymptoticBasis::w2_at(int j, int k) const
{
    return w2.at(pair_index(j, k, model.modes()));
}

int basis_solve_count(int K, int order)
{
    check_order(order);
    int n = 1;
    if (order >= 1)
        n += K;
    if (order >= 2)
        n += K * (K + 1) / 2;
    return n;
}

AsymptoticBasis build_basis(const DeviceConfig& device, const InterfaceModel& model, const Grid2D& grid,
                            int order)
{
    check_order(order);
    FixedDomainOperator op(device, grid);
    const int K = model.modes();

    AsymptoticBasis b{device, model, grid, order, {}, {}, {}, {}, {}, 0};
    b.w0 = op.solve({}, true);
    b.dw0_dx = one_sided_dx_at_boundary(b.w0);

    if (order >= 1) {
        b.w1.reserve(std::size_t(K));
        for (int k = 1; k <= K; ++k) {
            b.w1.push_back(op.solve(w1_datum(device, model, grid, k, b.dw0_dx), false));
            b.dw1_dx.push_back(one_sided_dx_at_boundary(b.w1.back()));
        }
    }
    if (order >= 2) {
        b.w2.resize(std::size_t(K) * std::size_t(K + 1) / 2);
        for (int j = 1; j <= K; ++j) {
            for (int k = j; k <= K; ++k) {
                std::vector<double> data = w2_datum(device, model, grid, j, k, b.dw1_dx[std::size_t(k - 1)]);
                if (j != k) {
                    const auto other = w2_datum(device, model, grid, k, j, b.dw1_dx[std::size_t(j - 1)]);
                    for (std::size_t c = 0; c < data.size(); ++c)
                        data[c] = 0.5 * (data[c] + other[c]);
                }
                b.w2[AsymptoticBasis::pair_index(j, k, K)] = op.solve(data, false);
            }
        }
    }
    b.solve_count = op.solve_count();
    return b;
}

PLApproximant assemble_approximant(const AsymptoticBasis& basis)
{
    const DeviceConfig& dev = basis.device;
    const int K = basis.model.modes();
    const Grid2D& g = basis.grid;

    PLApproximant a;
    a.order = basis.order;
    a.lambdas = basis.model.lambdas();
    a.epsilon = basis.model.hbar() / dev.d;
    a.i0 = trapezoid_2d(basis.w0) / dev.L;

    if (basis.order >= 1) {
        a.i1.resize(std::size_t(K));
        for (int k = 0; k < K; ++k)
            a.i1[std::size_t(k)] = trapezoid_2d(basis.w1[std::size_t(k)]) / dev.L;
    }
    if (basis.order >= 2) {
        a.i2.assign(std::size_t(K), std::vector<double>(std::size_t(K), 0.0));
        a.boundary.assign(std::size_t(K), std::vector<double>(std::size_t(K), 0.0));
        std::vector<double> line(std::size_t(g.nz) + 1);
        const double scale = dev.d * dev.d / (2.0 * dev.L);
        for (int j = 1; j <= K; ++j) {
            for (int k = j; k <= K; ++k) {
                const double v = trapezoid_2d(basis.w2_at(j, k)) / dev.L;
                for (int c = 0; c <= g.nz; ++c) {
                    const double z = g.z(c);
                    line[std::size_t(c)] = basis.model.basis(j, z) * basis.model.basis(k, z) *
                                           basis.dw0_dx[std::size_t(c)];
                }
                const double bnd = scale * trapezoid_1d(line, g.hz());
                a.i2[std::size_t(j - 1)][std::size_t(k - 1)] = a.i2[std::size_t(k - 1)][std::size_t(j - 1)] = v;
                a.boundary[std::size_t(j - 1)][std::size_t(k - 1)] =
                    a.boundary[std::size_t(k - 1)][std::size_t(j - 1)] = bnd;
            }
        }
    }
    return a;
}

PLApproximant modal_approximant(const DeviceConfig& device, const InterfaceModel& model, int ny, int nz,
                                int order)
{
    check_order(order);
    device.validate();
    const int K = model.modes();
    if (ny < 2 || nz < 3)
        throw InputError("modal expansion needs ny >= 2 and nz >= 3");
    if (order >= 2 && nz <= 2 * K)
        throw InputError("modal expansion needs nz > 2K");
    if (model.period() != device.L)
        throw InputError("interface period must equal the device period");

    const double s2 = device.sigma * device.sigma;
    const double hx = device.d / ny;
    const double hz = device.L / nz;
    auto line = [&](double mu, bool gen, double left) {
        return solve_line(
            [&](int i) {
                LineCoefficients c;
                c.yy = s2;
                c.c0 = -1.0 - s2 * mu;
                c.rhs = gen ? -device.G(device.d - i * hx) : 0.0;
                return c;
            },
            ny, hx, left);
    };

    PLApproximant a;
    a.order = order;
    a.lambdas = model.lambdas();
    a.epsilon = model.hbar() / device.d;
    const std::vector<double> w0 = line(0.0, true, 0.0);
    a.i0 = trapezoid_1d(w0, hx);
    if (order >= 1)
        a.i1.assign(std::size_t(K), 0.0); // sine modes average to zero over a period
    if (order >= 2) {
        a.i2.assign(std::size_t(K), std::vector<double>(std::size_t(K), 0.0));
        a.boundary.assign(std::size_t(K), std::vector<double>(std::size_t(K), 0.0));
        const double dw0 = one_sided_dx(w0, hx);
        const double curv = device.d * device.d * device.G(device.d) / (2.0 * s2);
        for (int k = 1; k <= K; ++k) {
            const double sk = std::sin(std::numbers::pi * k / nz);
            const double mu = 4.0 * sk * sk / (hz * hz);
            const std::vector<double> f = line(mu, false, -device.d * dw0);
            // sin² = (1 - cos)/2: only the mean half of the datum survives the z average.
            const std::vector<double> g = line(0.0, false, 0.5 * (-device.d * one_sided_dx(f, hx) + curv));
            const auto kk = std::size_t(k - 1);
            a.i2[kk][kk] = trapezoid_1d(g, hx);
            a.boundary[kk][kk] = 0.25 * device.d * device.d * dw0;
        }
    }
    return a;
}

namespace {

void check_available(const PLApproximant& a, int order)
{
    check_order(order);
    if (order > a.order)
        throw InputError("approximant was assembled to order " + std::to_string(a.order) + ", requested " +
                         std::to_string(order));
}

} // namespace

double expected_pl(const PLApproximant& a, const Moments& m, int order)
{
    check_available(a, order);
    double value = a.i0;
    const std::size_t K = a.lambdas.size();
    if (order >= 1) {
        double s = 0.0;
        for (std::size_t k = 0; k < K; ++k)
            s += a.lambdas[k] * m.mean * a.i1[k];
        value += a.epsilon * s;
    }
    if (order >= 2) {
        double s = 0.0;
        for (std::size_t j = 0; j < K; ++j)
            for (std::size_t k = 0; k < K; ++k) {
                const double mom = (j == k) ? m.second : m.cross;
                s += a.lambdas[j] * a.lambdas[k] * mom * (a.i2[j][k] + a.boundary[j][k]);
            }
        value += a.epsilon * a.epsilon * s;
    }
    return value;
}

double sampled_pl(const PLApproximant& a, const InterfaceSample& sample, int order)
{
    check_available(a, order);
    const std::size_t K = a.lambdas.size();
    if (sample.thetas.size() != K)
        throw InputError("sampled_pl: sample dimension does not match the approximant");
    double value = a.i0;
    if (order >= 1) {
        double s = 0.0;
        for (std::size_t k = 0; k < K; ++k)
            s += a.lambdas[k] * sample.thetas[k] * a.i1[k];
        value += a.epsilon * s;
    }
    if (order >= 2) {
        double s = 0.0;
        for (std::size_t j = 0; j < K; ++j)
            for (std::size_t k = 0; k < K; ++k)
                s += a.lambdas[j] * a.lambdas[k] * sample.thetas[j] * sample.thetas[k] *
                     (a.i2[j][k] + a.boundary[j][k]);
        value += a.epsilon * a.epsilon * s;
    }
    return value;
}

Field2D sampled_field(const AsymptoticBasis& basis, const InterfaceSample& sample, int order)
{
    check_order(order);
    if (order > basis.order)
        throw InputError("basis was built to a lower order than requested");
    const int K = basis.model.modes();
    if (static_cast<int>(sample.thetas.size()) != K)
        throw InputError("sampled_field: sample dimension does not match the basis");
    const double eps = basis.model.hbar() / basis.device.d;
    const auto& lam = basis.model.lambdas();

    Field2D v = basis.w0;
    if (order >= 1)
        for (int k = 0; k < K; ++k) {
            Field2D t = basis.w1[std::size_t(k)];
            t *= eps * lam[std::size_t(k)] * sample.thetas[std::size_t(k)];
            v += t;
        }
    if (order >= 2)
        for (int j = 1; j <= K; ++j)
            for (int k = 1; k <= K; ++k) {
                Field2D t = basis.w2_at(j, k);
                t *= eps * eps * lam[std::size_t(j - 1)] * lam[std::size_t(k - 1)] *
                     sample.thetas[std::size_t(j - 1)] * sample.thetas[std::size_t(k - 1)];
                v += t;
            }
    return v;
}

void PLApproximant::write_csv(std::ostream& out) const
{
    const auto prec = out.precision(17);
    out << "kind,j,k,value\n";
    out << "i0,0,0," << i0 << '\n';
    out << "epsilon,0,0," << epsilon << '\n';
    for (std::size_t k = 0; k < i1.size(); ++k)
        out << "i1," << k + 1 << ",0," << i1[k] << '\n';
    for (std::size_t j = 0; j < i2.size(); ++j)
        for (std::size_t k = 0; k < i2[j].size(); ++k)
            out << "i2," << j + 1 << ',' << k + 1 << ',' << i2[j][k] << '\n';
    for (std::size_t j = 0; j < boundary.size(); ++j)
        for (std::size_t k = 0; k < boundary[j].size(); ++k)
            out << "boundary," << j + 1 << ',' << k + 1 << ',' << boundary[j][k] << '\n';
    out.precision(prec);
}

} // namespace exciton
