#pragma once

#include "exciton/fd_core.hpp"
#include "exciton/interface.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace exciton {

enum class RuleKind { TensorGaussLegendre, Smolyak, MonteCarlo };

RuleKind parse_rule_kind(const std::string& name);
std::string to_string(RuleKind kind);

/// Quadrature over the coefficient box [a, b]^K against the uniform probability measure.
/// Weights sum to one; Smolyak weights may be negative.
struct QuadratureRule {
    RuleKind kind = RuleKind::TensorGaussLegendre;
    int dimension = 0;
    int level = 0; // points per dimension, Smolyak level, or sample count
    UniformDist support;
    std::vector<InterfaceSample> nodes;
    std::vector<double> weights;

    std::size_t size() const { return weights.size(); }
    std::string describe() const;
    /// Header: w,theta_1..theta_K
    void write_csv(std::ostream& out) const;
};

/// Gauss-Legendre nodes and weights on [-1, 1] (weights sum to 2).
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

/// Nested Clenshaw-Curtis rule with 1 point at level 1 and 2^(l-1)+1 points beyond (weights sum to 2).
void clenshaw_curtis(int level, std::vector<double>& nodes, std::vector<double>& weights);

/// TENSOR_GL: level_or_n points per dimension. SMOLYAK: level >= 1 (level 1 is the centre point).
/// MONTE_CARLO: level_or_n i.i.d. draws from seed.
QuadratureRule build_rule(RuleKind kind, int dimension, int level_or_n, UniformDist support,
                          std::uint64_t seed = 0);

struct ExpectationResult {
    double value = 0.0;
    std::size_t node_count = 0;
    std::vector<double> node_values;
    std::string rule;
};

using SampleFunctional = std::function<double(const InterfaceSample&)>;
using VectorFunctional = std::function<std::vector<double>(const InterfaceSample&)>;
using FieldFunctional = std::function<Field2D(const InterfaceSample&)>;

/// Number of worker threads used when the hint is 0.
int default_threads();

/// Σ_q f(s_q) w_q. Nodes may run concurrently; the sum is taken in node order.
ExpectationResult expect(const QuadratureRule& rule, const SampleFunctional& f, int threads = 0);

/// Component-wise expectation of a fixed-length vector functional.
std::vector<double> expect_vector(const QuadratureRule& rule, const VectorFunctional& f, int threads = 0);

Field2D expect_field(const QuadratureRule& rule, const FieldFunctional& f, int threads = 0);

} // namespace exciton
