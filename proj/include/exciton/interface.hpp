#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace exciton {

/// Uniform law U(a, b) for the interface coefficients. a == b is a point mass.
struct UniformDist {
    double a = -1.0;
    double b = 1.0;

    double mean() const { return 0.5 * (a + b); }
    double second_moment() const { return (a * a + a * b + b * b) / 3.0; }
    double variance() const { return (b - a) * (b - a) / 12.0; }
    bool contains(double t) const { return t >= a && t <= b; }
};

struct Moments {
    double mean = 0.0;   // E[θ]
    double second = 0.0; // E[θ²]
    double cross = 0.0;  // E[θ_j θ_k], j != k
};

/// Closed-form moments of the i.i.d. coefficients. Cross moment is E[θ]² by independence.
Moments moments(const UniformDist& dist);

/// One realisation (or quadrature node) of the K coefficients θ_k.
struct InterfaceSample {
    std::vector<double> thetas;
};

/// Random interface h(z) = hbar * sum_k lambda_k theta_k sin(2 k pi z / L).
///
/// Only the sine basis is carried; every mode vanishes at z = 0 and z = L/2.
/// The model is immutable once built and all queries are pure.
class InterfaceModel {
public:
    InterfaceModel(double hbar, double period, std::vector<double> lambdas, UniformDist dist);

    /// λ_k = k^beta, k = 1..K.
    static InterfaceModel power_law(double hbar, double period, int modes, double beta,
                                    UniformDist dist);

    double hbar() const { return hbar_; }
    double period() const { return period_; }
    int modes() const { return static_cast<int>(lambdas_.size()); }
    const std::vector<double>& lambdas() const { return lambdas_; }
    const UniformDist& dist() const { return dist_; }

    /// Same spectrum and law with a different amplitude.
    InterfaceModel with_hbar(double hbar) const;

    /// φ_k(z) for k = 1..K.
    double basis(int k, double z) const;

    double evaluate(const InterfaceSample& s, double z) const;
    double evaluate_dz(const InterfaceSample& s, double z) const;
    double evaluate_dzz(const InterfaceSample& s, double z) const;

    /// The unit-amplitude shape sum_k lambda_k theta_k φ_k(z) (h divided by hbar).
    double shape(const InterfaceSample& s, double z) const;

    /// Cov(h(z1), h(z2)) = hbar² Var(θ) sum_k λ_k² φ_k(z1) φ_k(z2).
    double covariance(double z1, double z2) const;

    /// Upper bound on max_z h over all coefficient values in the support.
    double max_amplitude_bound() const;

    /// i.i.d. draws from dist, reproducible from (seed, stream).
    InterfaceSample sample(std::uint64_t seed, std::uint64_t stream = 0) const;

private:
    void check(const InterfaceSample& s) const;

    double hbar_;
    double period_;
    std::vector<double> lambdas_;
    UniformDist dist_;
};

/// Flat random offset ξ for the 1D reduction.
struct Interface1D {
    double xi = 0.0;
};

} // namespace exciton
