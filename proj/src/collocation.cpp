#include "exciton/collocation.hpp"

#include "exciton/errors.hpp"

#include <boost/math/special_functions/binomial.hpp>
#include <boost/math/special_functions/legendre.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

namespace exciton {

RuleKind parse_rule_kind(const std::string& name)
{
    if (name == "tensor_gl" || name == "TENSOR_GL")
        return RuleKind::TensorGaussLegendre;
    if (name == "smolyak" || name == "SMOLYAK")
        return RuleKind::Smolyak;
    if (name == "monte_carlo" || name == "MONTE_CARLO")
        return RuleKind::MonteCarlo;
    throw InputError("unknown quadrature rule kind '" + name + "'");
}

std::string to_string(RuleKind kind)
{
    switch (kind) {
    case RuleKind::TensorGaussLegendre:
        return "tensor_gl";
    case RuleKind::Smolyak:
        return "smolyak";
    case RuleKind::MonteCarlo:
        return "monte_carlo";
    }
    return "?";
}

std::string QuadratureRule::describe() const
{
    std::ostringstream os;
    os << to_string(kind) << "(K=" << dimension << ", level=" << level << ", Q=" << size()
       << ", U(" << support.a << "," << support.b << "))";
    return os.str();
}

void QuadratureRule::write_csv(std::ostream& out) const
{
    out << "w";
    for (int k = 1; k <= dimension; ++k)
        out << ",theta_" << k;
    out << '\n';
    const auto prec = out.precision(17);
    for (std::size_t q = 0; q < size(); ++q) {
        out << weights[q];
        for (double t : nodes[q].thetas)
            out << ',' << t;
        out << '\n';
    }
    out.precision(prec);
}

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights)
{
    if (n < 1)
        throw InputError("Gauss-Legendre rule needs n >= 1");
    // boost returns the non-negative zeros in increasing order.
    const std::vector<double> half = boost::math::legendre_p_zeros<double>(n);
    nodes.clear();
    for (auto it = half.rbegin(); it != half.rend(); ++it)
        if (*it != 0.0)
            nodes.push_back(-*it);
    for (double x : half)
        nodes.push_back(x);
    weights.resize(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const double x = nodes[i];
        const double dp = boost::math::legendre_p_prime(n, x);
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
}

void clenshaw_curtis(int level, std::vector<double>& nodes, std::vector<double>& weights)
{
    if (level < 1)
        throw InputError("Clenshaw-Curtis level must be >= 1");
    if (level == 1) {
        nodes = {0.0};
        weights = {2.0};
        return;
    }
    const int n = 1 << (level - 1); // intervals; n + 1 points
    nodes.resize(std::size_t(n) + 1);
    weights.resize(std::size_t(n) + 1);
    for (int j = 0; j <= n; ++j) {
        const double theta = std::numbers::pi * j / n;
        nodes[std::size_t(j)] = -std::cos(theta);
        double s = 0.0;
        for (int k = 1; k <= n / 2; ++k) {
            const double b = (2 * k == n) ? 1.0 : 2.0;
            s += b / (4.0 * k * k - 1.0) * std::cos(2.0 * k * theta);
        }
        const double c = (j == 0 || j == n) ? 1.0 : 2.0;
        weights[std::size_t(j)] = c / n * (1.0 - s);
    }
    // Symmetric rule: pin the centre node to exactly zero.
    nodes[std::size_t(n / 2)] = 0.0;
}

namespace {

double to_support(double x, const UniformDist& s)
{
    return 0.5 * (s.a + s.b) + 0.5 * (s.b - s.a) * x;
}

QuadratureRule tensor_rule(int K, int n, UniformDist support)
{
    std::vector<double> x, w;
    gauss_legendre(n, x, w);
    QuadratureRule rule;
    rule.kind = RuleKind::TensorGaussLegendre;
    rule.dimension = K;
    rule.level = n;
    rule.support = support;
    std::size_t total = 1;
    for (int k = 0; k < K; ++k)
        total *= std::size_t(n);
    rule.nodes.reserve(total);
    rule.weights.reserve(total);
    std::vector<int> idx(std::size_t(K), 0);
    for (std::size_t q = 0; q < total; ++q) {
        InterfaceSample s;
        s.thetas.resize(std::size_t(K));
        double wq = 1.0;
        for (int k = 0; k < K; ++k) {
            s.thetas[std::size_t(k)] = to_support(x[std::size_t(idx[std::size_t(k)])], support);
            wq *= 0.5 * w[std::size_t(idx[std::size_t(k)])];
        }
        rule.nodes.push_back(std::move(s));
        rule.weights.push_back(wq);
        // Last dimension fastest.
        for (int k = K - 1; k >= 0; --k) {
            if (++idx[std::size_t(k)] < n)
                break;
            idx[std::size_t(k)] = 0;
        }
    }
    return rule;
}

QuadratureRule smolyak_rule(int K, int level, UniformDist support)
{
    if (level < 1)
        throw InputError("Smolyak level must be >= 1");
    const int q = K + level - 1;
    const int finest = (level == 1) ? 1 : (1 << (level - 1)) + 1;

    std::vector<std::vector<double>> x1(std::size_t(level) + 1), w1(std::size_t(level) + 1);
    for (int l = 1; l <= level; ++l)
        clenshaw_curtis(l, x1[std::size_t(l)], w1[std::size_t(l)]);

    auto key_of = [finest](int j, std::size_t m) {
        if (m == 1)
            return (finest - 1) / 2;
        return j * (finest - 1) / static_cast<int>(m - 1);
    };

    std::map<std::vector<int>, double> acc;
    std::vector<int> multi(std::size_t(K), 1);
    // Enumerate all multi-indices with entries >= 1 and |l| <= q.
    while (true) {
        int norm = 0;
        for (int l : multi)
            norm += l;
        if (norm >= std::max(K, q - K + 1) && norm <= q) {
            const int diff = q - norm;
            const double coeff = ((diff % 2) ? -1.0 : 1.0) *
                                 boost::math::binomial_coefficient<double>(unsigned(K - 1), unsigned(diff));
            std::vector<int> j(std::size_t(K), 0);
            while (true) {
                std::vector<int> key(static_cast<std::size_t>(K));
                double w = coeff;
                for (int k = 0; k < K; ++k) {
                    const int l = multi[std::size_t(k)];
                    const auto& xs = x1[std::size_t(l)];
                    key[std::size_t(k)] = key_of(j[std::size_t(k)], xs.size());
                    w *= 0.5 * w1[std::size_t(l)][std::size_t(j[std::size_t(k)])];
                }
                acc[key] += w;
                int k = K - 1;
                for (; k >= 0; --k) {
                    if (++j[std::size_t(k)] < static_cast<int>(x1[std::size_t(multi[std::size_t(k)])].size()))
                        break;
                    j[std::size_t(k)] = 0;
                }
                if (k < 0)
                    break;
            }
        }
        int k = K - 1;
        for (; k >= 0; --k) {
            if (++multi[std::size_t(k)] <= level)
                break;
            multi[std::size_t(k)] = 1;
        }
        if (k < 0)
            break;
    }

    const auto& xf = x1[std::size_t(level)];
    QuadratureRule rule;
    rule.kind = RuleKind::Smolyak;
    rule.dimension = K;
    rule.level = level;
    rule.support = support;
    for (const auto& [key, w] : acc) {
        if (w == 0.0)
            continue;
        InterfaceSample s;
        s.thetas.resize(std::size_t(K));
        for (int k = 0; k < K; ++k)
            s.thetas[std::size_t(k)] = to_support(xf[std::size_t(key[std::size_t(k)])], support);
        rule.nodes.push_back(std::move(s));
        rule.weights.push_back(w);
    }
    return rule;
}

QuadratureRule monte_carlo_rule(int K, int count, UniformDist support, std::uint64_t seed)
{
    if (count < 1)
        throw InputError("Monte Carlo rule needs at least one sample");
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x6d63u};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> u(support.a, support.b);
    QuadratureRule rule;
    rule.kind = RuleKind::MonteCarlo;
    rule.dimension = K;
    rule.level = count;
    rule.support = support;
    rule.nodes.resize(std::size_t(count));
    rule.weights.assign(std::size_t(count), 1.0 / count);
    for (auto& s : rule.nodes) {
        s.thetas.resize(std::size_t(K));
        for (auto& t : s.thetas)
            t = support.a == support.b ? support.a : u(rng);
    }
    return rule;
}

// Runs body(q) for q in [0, n) on up to `threads` workers; rethrows the first failure by node index.
void parallel_nodes(std::size_t n, int threads, const QuadratureRule& rule,
                    const std::function<void(std::size_t)>& body)
{
    std::vector<std::exception_ptr> errors(n);
    const int workers = std::max(1, std::min<int>(threads > 0 ? threads : default_threads(), int(n)));
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t q = next++; q < n; q = next++) {
            try {
                body(q);
            } catch (...) {
                errors[q] = std::current_exception();
            }
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < workers; ++t)
            pool.emplace_back(work);
    }

    std::size_t failed = 0;
    std::size_t first = n;
    for (std::size_t q = 0; q < n; ++q)
        if (errors[q]) {
            ++failed;
            first = std::min(first, q);
        }
    if (!failed)
        return;

    std::ostringstream os;
    os << failed << " of " << n << " quadrature nodes failed; first at node " << first << " (theta =";
    for (double t : rule.nodes[first].thetas)
        os << ' ' << t;
    os << "): ";
    try {
        std::rethrow_exception(errors[first]);
    } catch (const DomainError& e) {
        throw DomainError(os.str() + e.what());
    } catch (const InputError& e) {
        throw InputError(os.str() + e.what());
    } catch (const std::exception& e) {
        throw NumericalError(os.str() + e.what());
    }
}

} // namespace

QuadratureRule build_rule(RuleKind kind, int dimension, int level_or_n, UniformDist support,
                          std::uint64_t seed)
{
    if (dimension < 1)
        throw InputError("quadrature dimension must be >= 1");
    if (level_or_n < 1)
        throw InputError("quadrature level / point count must be >= 1");
    switch (kind) {
    case RuleKind::TensorGaussLegendre:
        return tensor_rule(dimension, level_or_n, support);
    case RuleKind::Smolyak:
        return smolyak_rule(dimension, level_or_n, support);
    case RuleKind::MonteCarlo:
        return monte_carlo_rule(dimension, level_or_n, support, seed);
    }
    throw InputError("unsupported quadrature rule kind");
}

int default_threads()
{
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

ExpectationResult expect(const QuadratureRule& rule, const SampleFunctional& f, int threads)
{
    ExpectationResult r;
    r.node_count = rule.size();
    r.rule = rule.describe();
    r.node_values.resize(rule.size());
    parallel_nodes(rule.size(), threads, rule, [&](std::size_t q) { r.node_values[q] = f(rule.nodes[q]); });
    for (std::size_t q = 0; q < rule.size(); ++q)
        r.value += rule.weights[q] * r.node_values[q];
    return r;
}

std::vector<double> expect_vector(const QuadratureRule& rule, const VectorFunctional& f, int threads)
{
    std::vector<std::vector<double>> values(rule.size());
    parallel_nodes(rule.size(), threads, rule, [&](std::size_t q) { values[q] = f(rule.nodes[q]); });
    std::vector<double> sum;
    for (std::size_t q = 0; q < rule.size(); ++q) {
        if (q == 0)
            sum.assign(values[0].size(), 0.0);
        if (values[q].size() != sum.size())
            throw InputError("expect_vector: functional returned vectors of different lengths");
        for (std::size_t c = 0; c < sum.size(); ++c)
            sum[c] += rule.weights[q] * values[q][c];
    }
    return sum;
}

Field2D expect_field(const QuadratureRule& rule, const FieldFunctional& f, int threads)
{
    std::vector<Field2D> fields(rule.size());
    parallel_nodes(rule.size(), threads, rule, [&](std::size_t q) { fields[q] = f(rule.nodes[q]); });
    if (fields.empty())
        return {};
    Field2D out(fields[0].grid());
    for (std::size_t q = 0; q < fields.size(); ++q) {
        if (!(fields[q].grid() == out.grid()))
            throw InputError("expect_field: node " + std::to_string(q) + " returned a field on a different grid");
        auto dst = out.values();
        auto src = fields[q].values();
        for (std::size_t n = 0; n < dst.size(); ++n)
            dst[n] += rule.weights[q] * src[n];
    }
    return out;
}

} // namespace exciton
