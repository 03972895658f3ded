#include "exciton/interface.hpp"

#include "exciton/errors.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace exciton {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

Moments moments(const UniformDist& dist)
{
    const double m = dist.mean();
    return {m, dist.second_moment(), m * m};
}

InterfaceModel::InterfaceModel(double hbar, double period, std::vector<double> lambdas,
                               UniformDist dist)
    : hbar_(hbar), period_(period), lambdas_(std::move(lambdas)), dist_(dist)
{
    if (!(hbar >= 0.0))
        throw InputError("interface: hbar must be non-negative");
    if (!(period > 0.0))
        throw InputError("interface: period L must be positive");
    if (lambdas_.empty())
        throw InputError("interface: need at least one mode");
    for (double l : lambdas_)
        if (!(l > 0.0))
            throw InputError("interface: eigenvalues lambda_k must be positive");
    if (!(dist.a <= dist.b))
        throw InputError("interface: uniform law needs a <= b");
}

InterfaceModel InterfaceModel::power_law(double hbar, double period, int modes, double beta,
                                         UniformDist dist)
{
    if (modes < 1)
        throw InputError("interface: mode count must be >= 1");
    std::vector<double> lambdas(modes);
    for (int k = 1; k <= modes; ++k)
        lambdas[k - 1] = std::pow(static_cast<double>(k), beta);
    return InterfaceModel(hbar, period, std::move(lambdas), dist);
}

InterfaceModel InterfaceModel::with_hbar(double hbar) const
{
    return InterfaceModel(hbar, period_, lambdas_, dist_);
}

double InterfaceModel::basis(int k, double z) const
{
    return std::sin(kTwoPi * k * z / period_);
}

void InterfaceModel::check(const InterfaceSample& s) const
{
    if (s.thetas.size() != lambdas_.size())
        throw InputError("interface: sample has " + std::to_string(s.thetas.size()) +
                         " coefficients, model has " + std::to_string(lambdas_.size()) + " modes");
}

double InterfaceModel::shape(const InterfaceSample& s, double z) const
{
    check(s);
    double sum = 0.0;
    for (std::size_t k = 0; k < lambdas_.size(); ++k)
        sum += lambdas_[k] * s.thetas[k] * basis(static_cast<int>(k) + 1, z);
    return sum;
}

double InterfaceModel::evaluate(const InterfaceSample& s, double z) const
{
    return hbar_ * shape(s, z);
}

double InterfaceModel::evaluate_dz(const InterfaceSample& s, double z) const
{
    check(s);
    double sum = 0.0;
    for (std::size_t k = 0; k < lambdas_.size(); ++k) {
        const double w = kTwoPi * static_cast<double>(k + 1) / period_;
        sum += lambdas_[k] * s.thetas[k] * w * std::cos(w * z);
    }
    return hbar_ * sum;
}

double InterfaceModel::evaluate_dzz(const InterfaceSample& s, double z) const
{
    check(s);
    double sum = 0.0;
    for (std::size_t k = 0; k < lambdas_.size(); ++k) {
        const double w = kTwoPi * static_cast<double>(k + 1) / period_;
        sum -= lambdas_[k] * s.thetas[k] * w * w * std::sin(w * z);
    }
    return hbar_ * sum;
}

double InterfaceModel::covariance(double z1, double z2) const
{
    double sum = 0.0;
    for (std::size_t k = 0; k < lambdas_.size(); ++k) {
        const int mode = static_cast<int>(k) + 1;
        sum += lambdas_[k] * lambdas_[k] * basis(mode, z1) * basis(mode, z2);
    }
    return hbar_ * hbar_ * dist_.variance() * sum;
}

double InterfaceModel::max_amplitude_bound() const
{
    const double tmax = std::max(std::abs(dist_.a), std::abs(dist_.b));
    double sum = 0.0;
    for (double l : lambdas_)
        sum += l;
    return hbar_ * tmax * sum;
}

InterfaceSample InterfaceModel::sample(std::uint64_t seed, std::uint64_t stream) const
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream),
                      static_cast<std::uint32_t>(stream >> 32)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> u(dist_.a, dist_.b);
    InterfaceSample s;
    s.thetas.resize(lambdas_.size());
    for (auto& t : s.thetas)
        t = dist_.a == dist_.b ? dist_.a : u(rng);
    return s;
}

} // namespace exciton
