#ifndef RMF_EULER_HPP
#define RMF_EULER_HPP

// Truncated Euler products on the critical line and their L^2 integrals.
//
//   Rademacher:  S_x(1/2 + it) = prod_{p <= x} (1 + f(p) p^{-1/2-it})
//   Steinhaus:   S_x(1/2 + it) = prod_{p <= x} (1 - f(p) p^{-1/2-it})^{-1}
//
// parseval_integral returns the bare integral of |S_x(1/2+it) / (1/2+it)|^2
// over |t| <= T; the mass beyond T is bounded analytically in tail_bound and
// never added to the value.

#include "rmf/errors.hpp"
#include "rmf/quadrature.hpp"
#include "rmf/rmf.hpp"
#include "rmf/rng.hpp"
#include "rmf/sieve.hpp"
#include "rmf/stats.hpp"
#include "rmf/summation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rmf
{

struct EulerProductValue
{
    std::uint64_t x = 0;
    double t = 0.0;
    Complex value{1.0, 0.0};
    double log_modulus = 0.0;
};

struct QuadConfig
{
    double tcut = 0.0;          ///< truncation T; 0 selects 50 log x (at least 50)
    double rel_tol = 1e-6;
    double panel_width = 0.25;
    int max_depth = 30;
    std::size_t max_evaluations = 20'000'000;

    [[nodiscard]] double truncation_for(std::uint64_t x) const
    {
        if (tcut > 0.0)
            return tcut;
        return std::max(50.0, 50.0 * std::log(static_cast<double>(std::max<std::uint64_t>(x, 2))));
    }

    [[nodiscard]] QuadratureOptions options() const
    {
        QuadratureOptions o;
        o.rel_tol = rel_tol;
        o.panel_width = panel_width;
        o.max_depth = max_depth;
        o.max_evaluations = max_evaluations;
        return o;
    }
};

struct IntegralEstimate
{
    double value = 0.0;
    double truncation_T = 0.0;
    double quadrature_error_bound = 0.0;
    double tail_bound = 0.0;
    std::size_t evaluations = 0;
};

/// Adaptive refinement did not converge; carries the partial result.
class QuadratureFailure : public std::runtime_error
{
  public:
    QuadratureFailure(const std::string& what, IntegralEstimate partial)
        : std::runtime_error(what), partial_(partial)
    {
    }

    [[nodiscard]] const IntegralEstimate& partial() const noexcept { return partial_; }

  private:
    IntegralEstimate partial_;
};

/// Integral of 1/(1/4 + t^2) over t > T.
inline double critical_line_tail_mass(double T)
{
    return 2.0 * (std::numbers::pi / 2.0 - std::atan(2.0 * T));
}

/// S_x(1/2 + it) accumulated as log-modulus plus phase.
inline EulerProductValue euler_product(const SampledFunction& f, std::uint64_t x, double t)
{
    require(x <= f.tables().limit(), "euler_product: x exceeds table limit");
    require(std::isfinite(t), "euler_product: t must be finite");
    const auto& primes = f.tables().primes();
    const bool rademacher = f.model() == Model::Rademacher;
    CompensatedSum log_mod;
    CompensatedSum phase;
    for (std::size_t i = 0; i < primes.size() && primes[i] <= x; ++i) {
        const double p = primes[i];
        const double lp = std::log(p);
        const Complex z = f.prime_value(primes[i]) * std::polar(1.0 / std::sqrt(p), -t * lp);
        const Complex factor = rademacher ? 1.0 + z : 1.0 - z;
        // Steinhaus factor is the reciprocal of (1 - z).
        const double sign = rademacher ? 1.0 : -1.0;
        log_mod.add(sign * std::log(std::abs(factor)));
        phase.add(sign * std::arg(factor));
    }
    EulerProductValue r;
    r.x = x;
    r.t = t;
    r.log_modulus = log_mod.value();
    r.value = std::polar(std::exp(r.log_modulus), std::remainder(phase.value(), 2.0 * std::numbers::pi));
    return r;
}

/// |S_x(1/2+it)|^2 / |1/2+it|^2 at a set of nested truncation levels, for
/// one realization. Levels are given as prime counts (prefix lengths of the
/// prime list).
class EulerIntegrand
{
  public:
    EulerIntegrand(const SampledFunction& f, std::vector<std::size_t> level_counts)
        : rademacher_(f.model() == Model::Rademacher), levels_(std::move(level_counts))
    {
        require(!levels_.empty(), "EulerIntegrand: no levels");
        require(std::is_sorted(levels_.begin(), levels_.end()), "EulerIntegrand: levels must be ascending");
        const auto& primes = f.tables().primes();
        require(levels_.back() <= primes.size(), "EulerIntegrand: level beyond table");
        for (std::size_t i = 0; i < levels_.back(); ++i) {
            const double p = primes[i];
            const Complex c = f.prime_value(primes[i]) / std::sqrt(p);
            log_p_.push_back(std::log(p));
            c_re_.push_back(c.real());
            c_im_.push_back(c.imag());
            c_norm_.push_back(std::norm(c));
            if (c.imag() != 0.0)
                real_ = false;
        }
    }

    /// True when f is real on every prime, making the integrand even in t.
    [[nodiscard]] bool even() const noexcept { return real_; }
    [[nodiscard]] std::size_t dim() const noexcept { return levels_.size(); }

    void operator()(double t, std::span<double> out) const
    {
        const double w = 1.0 / (0.25 + t * t);
        double mant = 1.0;
        int expo = 0;
        std::size_t level = 0;
        std::size_t n = log_p_.size();
        for (std::size_t i = 0; i <= n; ++i) {
            while (level < levels_.size() && levels_[level] == i) {
                out[level] = std::ldexp(mant, expo) * w;
                ++level;
            }
            if (i == n)
                break;
            const double theta = t * log_p_[i];
            double re = c_re_[i] * std::cos(theta);
            if (c_im_[i] != 0.0)
                re += c_im_[i] * std::sin(theta);
            // |1 + c e^{-i theta}|^2 = 1 + 2 Re(c e^{-i theta}) + |c|^2
            if (rademacher_)
                mant *= 1.0 + 2.0 * re + c_norm_[i];
            else
                mant /= 1.0 - 2.0 * re + c_norm_[i];
            if ((i & 15) == 15) {
                int e = 0;
                mant = std::frexp(mant, &e);
                expo += e;
            }
        }
    }

    /// log of the sup bound for |S|^2 at each level, from |f(p)| only.
    [[nodiscard]] std::vector<double> log_sup_bound() const
    {
        std::vector<double> out(levels_.size());
        CompensatedSum s;
        std::size_t level = 0;
        for (std::size_t i = 0; i <= log_p_.size(); ++i) {
            while (level < levels_.size() && levels_[level] == i)
                out[level++] = s.value();
            if (i == log_p_.size())
                break;
            const double a = std::sqrt(c_norm_[i]);
            s.add(rademacher_ ? 2.0 * std::log1p(a) : -2.0 * std::log1p(-a));
        }
        return out;
    }

  private:
    bool rademacher_;
    bool real_ = true;
    std::vector<std::size_t> levels_;
    std::vector<double> log_p_;
    std::vector<double> c_re_;
    std::vector<double> c_im_;
    std::vector<double> c_norm_;
};

/// Bare integrals of |S_{x_j}(1/2+it)/(1/2+it)|^2 over |t| <= T for nested x_j,
/// sharing one quadrature and one truncation T (from the largest x unless
/// quad.tcut is set).
inline std::vector<IntegralEstimate> parseval_integrals(const SampledFunction& f, std::span<const std::uint64_t> xs,
                                                        const QuadConfig& quad)
{
    require(!xs.empty(), "parseval_integrals: no truncation levels");
    require(std::is_sorted(xs.begin(), xs.end()), "parseval_integrals: levels must be ascending");
    require(xs.back() <= f.tables().limit(), "parseval_integrals: x exceeds table limit");
    std::vector<std::size_t> counts;
    for (auto x : xs)
        counts.push_back(f.tables().prime_count(x));
    const EulerIntegrand integrand(f, counts);
    const double T = quad.truncation_for(xs.back());
    require(T > 0.0 && std::isfinite(T), "parseval_integrals: truncation must be positive");
    const auto opt = quad.options();

    std::vector<double> value(xs.size(), 0.0);
    std::vector<double> error(xs.size(), 0.0);
    std::size_t evals = 0;
    bool converged = true;
    auto accumulate = [&](const QuadratureResult& r, double scale) {
        for (std::size_t j = 0; j < xs.size(); ++j) {
            value[j] += scale * r.value[j];
            error[j] += scale * r.error[j];
        }
        evals += r.evaluations;
        converged = converged && r.converged;
    };
    if (integrand.even()) {
        accumulate(integrate_simpson(integrand, integrand.dim(), 0.0, T, opt), 2.0);
    }
    else {
        accumulate(integrate_simpson(integrand, integrand.dim(), -T, 0.0, opt), 1.0);
        accumulate(integrate_simpson(integrand, integrand.dim(), 0.0, T, opt), 1.0);
    }

    const auto log_sup = integrand.log_sup_bound();
    std::vector<IntegralEstimate> out(xs.size());
    for (std::size_t j = 0; j < xs.size(); ++j) {
        out[j].value = std::max(0.0, value[j]);
        out[j].truncation_T = T;
        out[j].quadrature_error_bound = error[j];
        out[j].tail_bound = std::exp(log_sup[j]) * 2.0 * critical_line_tail_mass(T);
        out[j].evaluations = evals;
    }
    if (!converged)
        throw QuadratureFailure("parseval_integral: adaptive refinement did not converge", out.back());
    return out;
}

inline IntegralEstimate parseval_integral(const SampledFunction& f, std::uint64_t x, const QuadConfig& quad = {})
{
    const std::uint64_t xs[] = {x};
    return parseval_integrals(f, xs, quad).front();
}

struct ParsevalCheck
{
    double lhs = 0.0;            ///< closed form of int_0^inf |sum_{n<=u} a_n|^2 u^{-1-2 sigma} du
    double rhs = 0.0;            ///< (1/2pi) int_{|t|<=T} |A(sigma+it)/(sigma+it)|^2 dt
    double quadrature_error = 0.0;
    double tail_bound = 0.0;     ///< bound on the omitted |t| > T part of rhs

    [[nodiscard]] double combined_bound() const noexcept { return quadrature_error + tail_bound; }
    [[nodiscard]] bool agrees() const noexcept { return std::abs(lhs - rhs) <= combined_bound(); }
};

/// Both sides of the Dirichlet-series Parseval identity for a finitely
/// supported sequence; coeffs[k] holds a_{k+1}.
inline ParsevalCheck parseval_identity_check(std::span<const Complex> coeffs, double sigma, double tcut = 2000.0,
                                             double rel_tol = 1e-9)
{
    require(sigma > 0.0 && std::isfinite(sigma), "parseval_identity_check: sigma must be positive");
    require(tcut > 0.0, "parseval_identity_check: tcut must be positive");
    ParsevalCheck r;
    const std::size_t N = coeffs.size();
    if (N == 0)
        return r;

    // Partial sums are constant on [k, k+1).
    CompensatedSum lhs;
    Complex a{};
    for (std::size_t k = 1; k <= N; ++k) {
        a += coeffs[k - 1];
        const double kk = static_cast<double>(k);
        if (k < N) {
            // k^{-2s} - (k+1)^{-2s}
            const double w = std::pow(kk, -2.0 * sigma) * -std::expm1(-2.0 * sigma * std::log1p(1.0 / kk));
            lhs.add(std::norm(a) * w / (2.0 * sigma));
        }
        else {
            lhs.add(std::norm(a) * std::pow(kk, -2.0 * sigma) / (2.0 * sigma));
        }
    }
    r.lhs = lhs.value();

    std::vector<double> mag(N), logn(N);
    double abs_sum = 0.0;
    for (std::size_t n = 1; n <= N; ++n) {
        logn[n - 1] = std::log(static_cast<double>(n));
        mag[n - 1] = std::pow(static_cast<double>(n), -sigma);
        abs_sum += std::abs(coeffs[n - 1]) * mag[n - 1];
    }
    auto integrand = [&](double t) {
        Complex s{};
        for (std::size_t n = 0; n < N; ++n)
            s += coeffs[n] * std::polar(mag[n], -t * logn[n]);
        return std::norm(s) / (sigma * sigma + t * t);
    };
    QuadratureOptions opt;
    opt.rel_tol = rel_tol;
    opt.panel_width = 0.5;
    const auto left = integrate_simpson_scalar(integrand, -tcut, 0.0, opt);
    const auto right = integrate_simpson_scalar(integrand, 0.0, tcut, opt);
    const double inv2pi = 1.0 / (2.0 * std::numbers::pi);
    r.rhs = inv2pi * (left.value[0] + right.value[0]);
    r.quadrature_error = inv2pi * (left.error[0] + right.error[0]);
    // 2 * int_T^inf dt / (sigma^2 + t^2) = 2 (pi/2 - atan(T/sigma)) / sigma
    r.tail_bound = inv2pi * abs_sum * abs_sum * 2.0 * (std::numbers::pi / 2.0 - std::atan(tcut / sigma)) / sigma;
    if (!left.converged || !right.converged) {
        IntegralEstimate partial{r.rhs, tcut, r.quadrature_error, r.tail_bound, left.evaluations + right.evaluations};
        throw QuadratureFailure("parseval_identity_check: quadrature did not converge", partial);
    }
    return r;
}

/// Local factor |1 + f(p) p^{-1/2-it}|^2 (Rademacher) or |1 - f(p) p^{-1/2-it}|^{-2} (Steinhaus).
inline double local_factor_norm(Model model, Complex fp, double p, double t)
{
    const Complex z = fp * std::polar(1.0 / std::sqrt(p), -t * std::log(p));
    return model == Model::Rademacher ? std::norm(1.0 + z) : 1.0 / std::norm(1.0 - z);
}

/// Exact value of E prod_{x < p <= y} of the local factors.
inline double expected_local_product(std::uint64_t x, std::uint64_t y, Model model, const PrimeTables& tables)
{
    require(x <= y && y <= tables.limit(), "expected_local_product: need x <= y <= limit");
    const auto& primes = tables.primes();
    CompensatedSum log_prod;
    for (std::size_t i = tables.prime_count(x); i < primes.size() && primes[i] <= y; ++i) {
        const double p = primes[i];
        log_prod.add(model == Model::Rademacher ? std::log1p(1.0 / p) : -std::log1p(-1.0 / p));
    }
    return std::exp(log_prod.value());
}

/// Monte Carlo estimate of E prod_{x < p <= y} (local factor) against its exact value.
/// x = 0 or 1 means "from the first prime".
inline MomentReport expected_product_identity_check(std::uint64_t x, std::uint64_t y, double t, Model model,
                                                    std::uint64_t trials, std::uint64_t seed_base,
                                                    const PrimeTables& tables)
{
    require(trials >= 100, "expected_product_identity_check: at least 100 trials required");
    require(x <= y && y <= tables.limit(), "expected_product_identity_check: need x <= y <= limit");
    const double exact = expected_local_product(x, y, model, tables);
    const auto& primes = tables.primes();
    const std::size_t lo = tables.prime_count(x);
    const std::size_t hi = tables.prime_count(y);
    MeanAccumulator acc;
    for (std::uint64_t j = 0; j < trials; ++j) {
        const SampledFunction f(model, derive_seed(seed_base, 0xE1, j), tables);
        double log_prod = 0.0;
        for (std::size_t i = lo; i < hi; ++i)
            log_prod += std::log(local_factor_norm(model, f.prime_value(primes[i]), primes[i], t));
        acc.add(std::exp(log_prod));
    }
    return MomentReport::equal(acc.mean(), acc.std_error(), exact, trials);
}

/// (1/log x_i) (log x_i / log X_prev)^{1/(ell-1)^K}.
inline double y_normalization(std::uint64_t x_i, std::uint64_t x_prev_block, int ell, double K)
{
    require(ell >= 2, "y_normalization: ell must be at least 2");
    require(x_prev_block >= 2 && x_prev_block <= x_i, "y_normalization: need 2 <= X_prev <= x_i");
    const double lx = std::log(static_cast<double>(x_i));
    const double lX = std::log(static_cast<double>(x_prev_block));
    return std::pow(lx / lX, 1.0 / std::pow(static_cast<double>(ell - 1), K)) / lx;
}

/// Y_{x_i}: the normalized Parseval integral at truncation x_i.
inline double y_statistic(const SampledFunction& f, std::uint64_t x_i, std::uint64_t x_prev_block, int ell, double K,
                          const QuadConfig& quad)
{
    const double norm = y_normalization(x_i, x_prev_block, ell, K);
    return norm * parseval_integral(f, x_i, quad).value;
}

} // namespace rmf

#endif // RMF_EULER_HPP
