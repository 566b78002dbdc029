#include "rmf/euler.hpp"

#include <gtest/gtest.h>

#include <numbers>

namespace
{

const rmf::PrimeTables& tables()
{
    static const rmf::PrimeTables t = rmf::build_tables(20'000);
    return t;
}

/// Plain complex product, no log accumulation.
rmf::Complex direct_product(const rmf::SampledFunction& f, std::uint64_t x, double t)
{
    rmf::Complex s{1.0, 0.0};
    for (std::uint64_t p = 2; p <= x; ++p) {
        if (!f.tables().is_prime(p))
            continue;
        const rmf::Complex z = f.prime_value(p) * std::exp(rmf::Complex(-0.5 * std::log(p), -t * std::log(p)));
        s *= f.model() == rmf::Model::Rademacher ? 1.0 + z : 1.0 / (1.0 - z);
    }
    return s;
}

/// Closed form of (1/2pi) int_R |A(s+it)/(s+it)|^2 dt = (1/2s) sum a_m conj(a_n) max(m,n)^{-2s}.
double parseval_rhs_closed_form(const std::vector<rmf::Complex>& a, double sigma)
{
    double s = 0.0;
    for (std::size_t m = 1; m <= a.size(); ++m)
        for (std::size_t n = 1; n <= a.size(); ++n)
            s += (a[m - 1] * std::conj(a[n - 1])).real() * std::pow(static_cast<double>(std::max(m, n)), -2.0 * sigma);
    return s / (2.0 * sigma);
}

TEST(Euler, ProductSmallCases)
{
    const auto& t = tables();
    const rmf::SampledFunction f(rmf::Model::Rademacher, 4, t);
    EXPECT_EQ(rmf::euler_product(f, 1, 0.3).value, rmf::Complex(1.0));
    const auto v = rmf::euler_product(f, 2, 0.0).value;
    EXPECT_NEAR(std::abs(v - (1.0 + f.prime_value(2) / std::sqrt(2.0))), 0.0, 1e-15);
}

TEST(Euler, ProductRoutesAgree)
{
    const auto& t = tables();
    for (auto model : {rmf::Model::Rademacher, rmf::Model::Steinhaus}) {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const rmf::SampledFunction f(model, seed, t);
            const std::vector<std::size_t> levels{t.prime_count(10), t.prime_count(1000)};
            const rmf::EulerIntegrand integrand(f, levels);
            for (double tt : {-7.5, -0.2, 0.0, 0.7, 3.1, 40.0}) {
                const auto lp = rmf::euler_product(f, 1000, tt);
                const auto dp = direct_product(f, 1000, tt);
                EXPECT_LT(std::abs(lp.value - dp) / std::abs(dp), 1e-10);
                double out[2];
                integrand(tt, out);
                const double w = 1.0 / (0.25 + tt * tt);
                EXPECT_NEAR(out[0] / (std::norm(direct_product(f, 10, tt)) * w), 1.0, 1e-12);
                EXPECT_NEAR(out[1] / (std::norm(dp) * w), 1.0, 1e-10);
            }
        }
    }
}

TEST(Euler, ZeroFunctionIntegralIsTwoPi)
{
    const auto& t = tables();
    const auto f = rmf::SampledFunction::from_prime_values(rmf::Model::Rademacher, {}, t);
    const auto r = rmf::parseval_integral(f, 1000);
    EXPECT_NEAR(r.value, 4.0 * std::atan(2.0 * r.truncation_T), r.quadrature_error_bound + 1e-12);
    EXPECT_LE(std::abs(r.value - 2.0 * std::numbers::pi), r.tail_bound + r.quadrature_error_bound);
    EXPECT_NEAR(r.value + r.tail_bound, 2.0 * std::numbers::pi, r.quadrature_error_bound + 1e-12);
}

TEST(Euler, IntegralSelfConvergence)
{
    const auto& t = tables();
    for (auto model : {rmf::Model::Rademacher, rmf::Model::Steinhaus}) {
        const rmf::SampledFunction f(model, 31, t);
        const auto r = rmf::parseval_integral(f, 10);
        // Independent composite trapezoid over the same window via the log-product route.
        auto trap = [&](double h) {
            const double T = r.truncation_T;
            const auto n = static_cast<std::size_t>(std::ceil(2 * T / h));
            const double step = 2 * T / static_cast<double>(n);
            double s = 0.0;
            for (std::size_t k = 0; k <= n; ++k) {
                const double tt = -T + step * static_cast<double>(k);
                const double v = std::exp(2.0 * rmf::euler_product(f, 10, tt).log_modulus) / (0.25 + tt * tt);
                s += (k == 0 || k == n ? 0.5 : 1.0) * v;
            }
            return s * step;
        };
        const double coarse = trap(0.02);
        const double fine = trap(0.01);
        const double trap_err = std::abs(fine - coarse);
        EXPECT_LE(std::abs(r.value - fine), r.quadrature_error_bound + trap_err + 1e-9);
        EXPECT_LT(std::abs(r.value - fine) / r.value, 1e-5);
    }
}

TEST(Euler, DoublingTruncationStaysWithinTailBound)
{
    const auto& t = tables();
    for (auto model : {rmf::Model::Rademacher, rmf::Model::Steinhaus}) {
        const rmf::SampledFunction f(model, 2, t);
        for (std::uint64_t x : {10u, 100u}) {
            rmf::QuadConfig q;
            const auto r1 = rmf::parseval_integral(f, x, q);
            q.tcut = 2.0 * r1.truncation_T;
            const auto r2 = rmf::parseval_integral(f, x, q);
            EXPECT_GE(r2.value, r1.value - r1.quadrature_error_bound - r2.quadrature_error_bound);
            EXPECT_LE(r2.value - r1.value, r1.tail_bound + r1.quadrature_error_bound + r2.quadrature_error_bound);
        }
    }
}

TEST(Euler, NestedLevelsMatchSingleIntegrals)
{
    const auto& t = tables();
    const rmf::SampledFunction f(rmf::Model::Steinhaus, 12, t);
    rmf::QuadConfig q;
    q.tcut = 60.0;
    const std::vector<std::uint64_t> xs{7, 30, 100};
    const auto all = rmf::parseval_integrals(f, xs, q);
    for (std::size_t j = 0; j < xs.size(); ++j) {
        const auto one = rmf::parseval_integral(f, xs[j], q);
        EXPECT_NEAR(all[j].value, one.value, 2e-6 * one.value);
        EXPECT_EQ(all[j].truncation_T, 60.0);
    }
}

TEST(Euler, TruncatedIntegralHasExactMean)
{
    // E int_{|t|<=T} |S_x|^2 / |1/2+it|^2 dt = prod(local means) * 4 atan(2T).
    const auto& t = tables();
    for (auto model : {rmf::Model::Rademacher, rmf::Model::Steinhaus}) {
        rmf::QuadConfig q;
        q.tcut = 40.0;
        rmf::MeanAccumulator acc;
        for (std::uint64_t j = 0; j < 300; ++j)
            acc.add(rmf::parseval_integral(rmf::SampledFunction(model, rmf::derive_seed(5, 5, j), t), 30, q).value);
        const double exact = rmf::expected_local_product(0, 30, model, t) * 4.0 * std::atan(80.0);
        EXPECT_LT(std::abs(acc.mean() - exact), 3.0 * acc.std_error()) << rmf::to_string(model);
    }
}

TEST(Euler, QuadratureFailureCarriesPartialResult)
{
    const auto& t = tables();
    const rmf::SampledFunction f(rmf::Model::Steinhaus, 3, t);
    rmf::QuadConfig q;
    q.max_depth = 2;
    q.rel_tol = 1e-14;
    q.panel_width = 5.0;
    try {
        (void)rmf::parseval_integral(f, 1000, q);
        FAIL() << "expected QuadratureFailure";
    }
    catch (const rmf::QuadratureFailure& e) {
        EXPECT_GT(e.partial().value, 0.0);
        EXPECT_GT(e.partial().evaluations, 0u);
    }
}

TEST(Euler, ParsevalIdentityExactCases)
{
    const std::vector<rmf::Complex> one{1.0};
    const auto r1 = rmf::parseval_identity_check(one, 0.5);
    EXPECT_DOUBLE_EQ(r1.lhs, 1.0);
    EXPECT_TRUE(r1.agrees());
    EXPECT_NEAR(r1.rhs, 1.0, r1.combined_bound());

    const std::vector<rmf::Complex> two{1.0, 1.0};
    const auto r2 = rmf::parseval_identity_check(two, 0.5);
    EXPECT_DOUBLE_EQ(r2.lhs, 2.5);
    EXPECT_TRUE(r2.agrees());
    EXPECT_NEAR(parseval_rhs_closed_form(two, 0.5), 2.5, 1e-15);

    EXPECT_THROW((void)rmf::parseval_identity_check(one, 0.0), rmf::InvalidArgument);
    EXPECT_THROW((void)rmf::parseval_identity_check(one, -1.0), rmf::InvalidArgument);
}

TEST(Euler, ParsevalIdentityRandomSequences)
{
    rmf::CounterEngine eng(77);
    for (int k = 0; k < 20; ++k) {
        std::vector<rmf::Complex> a(10);
        for (auto& c : a)
            c = {2.0 * rmf::to_unit(eng()) - 1.0, 2.0 * rmf::to_unit(eng()) - 1.0};
        const double sigma = 0.7;
        const auto r = rmf::parseval_identity_check(a, sigma);
        EXPECT_TRUE(r.agrees()) << r.lhs << " vs " << r.rhs << " bound " << r.combined_bound();
        // Three routes: partial-sum closed form, quadrature, and the frequency-domain closed form.
        const double exact = parseval_rhs_closed_form(a, sigma);
        EXPECT_NEAR(r.lhs, exact, 1e-12 * (1.0 + std::abs(exact)));
        EXPECT_LE(std::abs(r.rhs - exact), r.combined_bound());
    }
}

TEST(Euler, ExpectedProductIdentity)
{
    const auto& t = tables();
    const auto r = rmf::expected_product_identity_check(2, 3, 0.0, rmf::Model::Rademacher, 10'000, 1, t);
    EXPECT_DOUBLE_EQ(r.bound, 4.0 / 3.0);
    EXPECT_FALSE(r.violated);
    const auto e = rmf::expected_product_identity_check(50, 50, 1.0, rmf::Model::Steinhaus, 100, 1, t);
    EXPECT_EQ(e.estimate, 1.0);
    EXPECT_EQ(e.std_error, 0.0);
    EXPECT_FALSE(e.violated);
    double exact = 1.0;
    for (std::uint64_t p : t.primes())
        if (p > 2 && p <= 100)
            exact /= 1.0 - 1.0 / static_cast<double>(p);
    const auto s = rmf::expected_product_identity_check(2, 100, 1.3, rmf::Model::Steinhaus, 10'000, 2, t);
    EXPECT_NEAR(s.bound, exact, 1e-12 * exact);
    EXPECT_FALSE(s.violated);
    EXPECT_THROW((void)rmf::expected_product_identity_check(2, 3, 0.0, rmf::Model::Rademacher, 99, 1, t),
                 rmf::InvalidArgument);
}

TEST(Euler, YNormalization)
{
    EXPECT_DOUBLE_EQ(rmf::y_normalization(1000, 1000, 2, 2.5) * std::log(1000.0), 1.0);
    EXPECT_NEAR(rmf::y_normalization(1000, 100, 2, 2.5) * std::log(1000.0), 1.5, 1e-12);
    double prev = 0.0;
    for (std::uint64_t x = 100; x <= 100'000; x *= 2) {
        const double factor = rmf::y_normalization(x, 100, 3, 2.5) * std::log(static_cast<double>(x));
        EXPECT_GE(factor, 1.0 - 1e-15);
        EXPECT_GT(factor, prev);
        prev = factor;
    }
    EXPECT_THROW((void)rmf::y_normalization(10, 100, 2, 2.5), rmf::InvalidArgument);
    EXPECT_THROW((void)rmf::y_normalization(1000, 100, 1, 2.5), rmf::InvalidArgument);

    const auto& t = tables();
    const rmf::SampledFunction f(rmf::Model::Rademacher, 8, t);
    rmf::QuadConfig q;
    q.tcut = 50.0;
    const double bare = rmf::parseval_integral(f, 1000, q).value;
    EXPECT_NEAR(rmf::y_statistic(f, 1000, 100, 2, 2.5, q), 1.5 * bare / std::log(1000.0), 1e-12 * bare);
}

} // namespace
