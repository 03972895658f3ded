#include "exciton/errors.hpp"
#include "exciton/fd_core.hpp"

#include <Eigen/Dense>
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace exciton;
using std::numbers::pi;

namespace {

template <class F>
Field2D sample_field(const Grid2D& g, F f)
{
    Field2D out(g);
    for (int i = 0; i <= g.ny; ++i)
        for (int j = 0; j <= g.nz; ++j)
            out(i, j) = f(g.y(i), g.z(j));
    return out;
}

// u* = (1 - cos πy) sin 2πz: zero at y = 0, u_y = 0 at y = 1, period 1 in z.
struct Manufactured {
    static double u(double y, double z) { return (1 - std::cos(pi * y)) * std::sin(2 * pi * z); }
    static double uy(double y, double z) { return pi * std::sin(pi * y) * std::sin(2 * pi * z); }
    static double uyy(double y, double z) { return pi * pi * std::cos(pi * y) * std::sin(2 * pi * z); }
    static double uzz(double y, double z) { return -4 * pi * pi * (1 - std::cos(pi * y)) * std::sin(2 * pi * z); }
    static double uyz(double y, double z) { return 2 * pi * pi * std::sin(pi * y) * std::cos(2 * pi * z); }
};

// Max-norm error of the discrete solution; general selects the variable-coefficient operator.
double manufactured_error(int n, bool general)
{
    const Grid2D g(n, n);
    const double s2 = 0.7;
    auto coeffs = [&](int i, int j) {
        const double y = g.y(i), z = g.z(j);
        NodeCoefficients c;
        if (general) {
            c.yy = 1.0 + 0.3 * y;
            c.zz = 0.5 + 0.1 * std::sin(2 * pi * z);
            c.yz = 0.2;
            c.y = 0.4;
        } else {
            c.yy = s2;
            c.zz = s2;
        }
        c.c0 = -1.0;
        using M = Manufactured;
        c.rhs = c.yy * M::uyy(y, z) + c.zz * M::uzz(y, z) + c.yz * M::uyz(y, z) + c.y * M::uy(y, z) -
                M::u(y, z);
        return c;
    };
    const SparseSystem sys = assemble(coeffs, BoundarySpec{}, g);
    const Field2D u = to_field(g, solve(sys), BoundarySpec{});
    double err = 0.0;
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j)
            err = std::max(err, std::abs(u(i, j) - Manufactured::u(g.y(i), g.z(j))));
    return err;
}

} // namespace

TEST_CASE("grid geometry and validation")
{
    const Grid2D g(8, 16, 2.0, 4.0);
    CHECK(g.hy() == 0.25);
    CHECK(g.hz() == 0.25);
    CHECK(g.node_count() == 9u * 17u);
    CHECK_THROWS_AS(Grid2D(2, 8), InputError);
    CHECK_THROWS_AS(Grid2D(8, 8, -1.0, 1.0), InputError);
}

TEST_CASE("difference quotients are exact on low-degree polynomials")
{
    const Grid2D g(8, 8);
    const auto lin = stencils(sample_field(g, [](double y, double) { return y; }), 3, 4);
    CHECK(lin.d0y == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(lin.dmy == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(lin.dpy == doctest::Approx(1.0).epsilon(1e-13));
    const auto quad = stencils(sample_field(g, [](double y, double) { return y * y; }), 3, 4);
    CHECK(quad.dpdmy == doctest::Approx(2.0).epsilon(1e-12));
    const auto bil = stencils(sample_field(g, [](double y, double z) { return y * z; }), 3, 4);
    CHECK(bil.d0yd0z == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(bil.d0z == doctest::Approx(g.y(3)).epsilon(1e-12));
    CHECK_THROWS_AS(stencils(Field2D(g), 0, 4), InputError);
}

TEST_CASE("manufactured solution converges at second order")
{
    for (bool general : {false, true}) {
        const double e16 = manufactured_error(16, general);
        const double e32 = manufactured_error(32, general);
        const double e64 = manufactured_error(64, general);
        const double slope = std::log2(e16 / e64) / 2.0;
        INFO("general=" << general << " errors " << e16 << ' ' << e32 << ' ' << e64);
        CHECK(slope >= 1.9);
        CHECK(slope <= 2.1);
        CHECK(e64 < e32);
    }
}

TEST_CASE("zero data gives the zero solution")
{
    const Grid2D g(8, 8);
    auto coeffs = [](int, int) {
        NodeCoefficients c;
        c.yy = c.zz = 1.0;
        c.c0 = -1.0;
        return c;
    };
    const auto x = solve(assemble(coeffs, BoundarySpec{}, g));
    CHECK(x.lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("sparse solve matches small and dense oracles")
{
    SparseSystem id;
    id.matrix.resize(3, 3);
    id.matrix.setIdentity();
    id.rhs = Eigen::Vector3d(1.0, -2.0, 3.5);
    CHECK((solve(id) - id.rhs).norm() < 1e-15);

    SparseSystem two;
    two.matrix.resize(2, 2);
    two.matrix.insert(0, 0) = 2.0;
    two.matrix.insert(0, 1) = 1.0;
    two.matrix.insert(1, 0) = 1.0;
    two.matrix.insert(1, 1) = 2.0;
    two.rhs = Eigen::Vector2d(3.0, 3.0);
    const Eigen::VectorXd x = solve(two);
    CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(x[1] == doctest::Approx(1.0).epsilon(1e-14));

    const Grid2D g(8, 8);
    auto coeffs = [&](int i, int j) {
        NodeCoefficients c;
        c.yy = 1.0 + 0.3 * g.y(i);
        c.zz = 0.5;
        c.yz = 0.2;
        c.y = 0.4;
        c.c0 = -1.0;
        c.rhs = std::sin(2 * pi * g.z(j)) * g.y(i);
        return c;
    };
    const SparseSystem sys = assemble(coeffs, BoundarySpec{}, g);
    const Eigen::MatrixXd dense(sys.matrix);
    const Eigen::VectorXd oracle = dense.partialPivLu().solve(sys.rhs);
    CHECK((solve(sys) - oracle).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("shifting the source by one column shifts the solution")
{
    const Grid2D g(8, 16);
    auto make = [&](int shift) {
        return [&, shift](int i, int j) {
            NodeCoefficients c;
            c.yy = c.zz = 1.0;
            c.yz = 0.1;
            c.c0 = -1.0;
            const int jj = (j + shift) % g.nz;
            c.rhs = -std::exp(-g.y(i)) * (1.0 + std::cos(2 * pi * g.z(jj)) + 0.3 * (jj == 3));
            return c;
        };
    };
    const Field2D a = to_field(g, solve(assemble(make(0), BoundarySpec{}, g)), BoundarySpec{});
    const Field2D b = to_field(g, solve(assemble(make(1), BoundarySpec{}, g)), BoundarySpec{});
    for (int i = 0; i <= g.ny; ++i)
        for (int j = 0; j < g.nz; ++j)
            CHECK(std::abs(b(i, j) - a(i, (j + 1) % g.nz)) < 1e-12);
    // The duplicated periodic column is reconstructed on output.
    for (int i = 0; i <= g.ny; ++i)
        CHECK(a(i, g.nz) == a(i, 0));
}

TEST_CASE("Dirichlet data enter through the boundary row")
{
    const Grid2D g(16, 8);
    BoundarySpec bc{std::vector<double>(8, 1.0)};
    auto coeffs = [](int, int) {
        NodeCoefficients c;
        c.yy = 1.0;
        c.zz = 1.0;
        c.c0 = -1.0;
        return c;
    };
    const Field2D u = to_field(g, solve(assemble(coeffs, bc, g)), bc);
    // u'' = u, u(0) = 1, u'(1) = 0 gives cosh(1 - y) / cosh(1).
    for (int i = 0; i <= g.ny; ++i)
        CHECK(u(i, 5) == doctest::Approx(std::cosh(1 - g.y(i)) / std::cosh(1.0)).epsilon(2e-3));
    CHECK(to_unknowns(u).size() == 16 * 8);
}

TEST_CASE("trapezoid rules")
{
    const Grid2D g(10, 12);
    CHECK(trapezoid_2d(sample_field(g, [](double, double) { return 1.0; })) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(trapezoid_2d(sample_field(g, [](double y, double) { return y; })) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(std::abs(trapezoid_2d(sample_field(g, [](double, double z) { return std::sin(2 * pi * z); }))) < 1e-15);
    CHECK(trapezoid_2d(sample_field(g, [](double, double) { return 1.0; }), [](double z) { return 2.0 * z; }) ==
          doctest::Approx(1.0).epsilon(1e-13));

    const std::vector<double> ones(11, 2.0);
    CHECK(trapezoid_1d(ones, 0.1) == doctest::Approx(2.0).epsilon(1e-14));
    std::vector<double> lin(11), sine(17);
    for (int i = 0; i <= 10; ++i)
        lin[std::size_t(i)] = 3.0 * i * 0.1;
    for (int i = 0; i <= 16; ++i)
        sine[std::size_t(i)] = std::sin(2 * pi * i / 16.0);
    CHECK(trapezoid_1d(lin, 0.1) == doctest::Approx(1.5).epsilon(1e-14));
    CHECK(std::abs(trapezoid_1d(sine, 1.0 / 16)) < 1e-15);
}

TEST_CASE("one-sided boundary derivative")
{
    const Grid2D g(8, 4);
    for (double v : one_sided_dx_at_boundary(sample_field(g, [](double y, double) { return y; })))
        CHECK(v == doctest::Approx(1.0).epsilon(1e-13));
    for (double v : one_sided_dx_at_boundary(sample_field(g, [](double y, double) { return y * y; })))
        CHECK(std::abs(v) < 1e-13);

    std::vector<double> errs;
    for (int n : {8, 16, 32, 64}) {
        const double h = 1.0 / n;
        std::vector<double> col(std::size_t(n) + 1);
        for (int i = 0; i <= n; ++i)
            col[std::size_t(i)] = std::sin(0.3 + i * h);
        errs.push_back(std::abs(one_sided_dx(col, h) - std::cos(0.3)));
    }
    const double slope = std::log2(errs.front() / errs.back()) / 3.0;
    CHECK(slope >= 1.9);
    CHECK(slope <= 2.1);
}

TEST_CASE("tridiagonal line solve")
{
    // u'' - u = 0, u(0) = 1, u'(1) = 0.
    auto coeffs = [](int) {
        LineCoefficients c;
        c.yy = 1.0;
        c.c0 = -1.0;
        return c;
    };
    std::vector<double> errs;
    for (int n : {32, 64, 128}) {
        const auto u = solve_line(coeffs, n, 1.0 / n, 1.0);
        double e = 0.0;
        for (int i = 0; i <= n; ++i)
            e = std::max(e, std::abs(u[std::size_t(i)] - std::cosh(1.0 - double(i) / n) / std::cosh(1.0)));
        errs.push_back(e);
    }
    CHECK(std::log2(errs[0] / errs[2]) / 2.0 == doctest::Approx(2.0).epsilon(0.05));
    CHECK_THROWS_AS(solve_line(coeffs, 1, 1.0), InputError);
}

TEST_CASE("field CSV export")
{
    Field2D f(Grid2D(4, 4), 1.5);
    std::ostringstream os;
    f.write_csv(os);
    CHECK(os.str().rfind("y,z,value\n", 0) == 0);
    CHECK(f.min() == 1.5);
    CHECK(f.max_abs() == 1.5);
}
