#ifndef RMF_HARNESS_HPP
#define RMF_HARNESS_HPP

// Experiment driver: test-point grids, per-trial suprema, and the Monte Carlo
// inequality suites. Everything here is a pure function of its arguments;
// trials are keyed by index so parallel execution cannot change results.

#include "rmf/errors.hpp"
#include "rmf/euler.hpp"
#include "rmf/rmf.hpp"
#include "rmf/rng.hpp"
#include "rmf/sieve.hpp"
#include "rmf/stats.hpp"
#include "rmf/sums.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace rmf
{

// Seed streams, so that different experiments never share randomness.
inline constexpr std::uint64_t kTrialStream = 0x7121;
inline constexpr std::uint64_t kMomentStream = 0x4C;
inline constexpr std::uint64_t kResampleStream = 0x5E;
inline constexpr std::uint64_t kDoobStream = 0xD0;
inline constexpr std::uint64_t kSigmaStream = 0x51;

/// Threshold constant of the almost-sure bound, recorded with every trial.
inline constexpr double kSupConstant = 6.0;

struct ExperimentConfig
{
    double epsilon = 0.1;
    Model model = Model::Rademacher;
    std::uint64_t seed_base = 0;
    std::uint64_t trials = 100;
    std::uint64_t x_max = 1'000'000;
    QuadConfig quad;
    double T_param = 10.0;
    std::uint64_t oracle_cap = kBruteForceCap;
    unsigned threads = 1;       ///< 0 selects the hardware concurrency

    [[nodiscard]] double K() const { return 1.0 / (4.0 * epsilon); }

    void validate(const PrimeTables& tables) const
    {
        require(epsilon > 0.0 && epsilon < 0.25, "config: epsilon must lie in (0, 1/4)");
        require(trials >= 1, "config: trials must be positive");
        require(x_max >= 1, "config: x_max must be positive");
        require(x_max <= tables.limit(), "config: x_max exceeds the table limit");
        require(T_param >= 1.0, "config: T must be at least 1");
        require(oracle_cap >= 1, "config: oracle_cap must be positive");
        require(quad.rel_tol > 0.0, "config: quadrature tolerance must be positive");
    }
};

inline unsigned resolve_threads(unsigned threads)
{
    if (threads != 0)
        return threads;
    return std::max(1u, std::thread::hardware_concurrency());
}

/// out[i] = fn(i) for i < n, computed on up to `threads` workers. The first
/// exception by index is rethrown.
template <class R, class F>
std::vector<R> parallel_map(std::size_t n, unsigned threads, F&& fn)
{
    std::vector<R> out(n);
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(resolve_threads(threads), n));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            out[i] = fn(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::size_t failed_at = n;
    std::exception_ptr failure;
    auto work = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                out[i] = fn(i);
            }
            catch (...) {
                std::lock_guard lock(mu);
                if (i < failed_at) {
                    failed_at = i;
                    failure = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back(work);
    for (auto& t : pool)
        t.join();
    if (failure)
        std::rethrow_exception(failure);
    return out;
}

/// Like parallel_map, but hands results to `consume` in index order in
/// batches, bounding memory to a few results per worker.
template <class R, class Produce, class Consume>
void parallel_for_ordered(std::size_t n, unsigned threads, Produce&& produce, Consume&& consume)
{
    const std::size_t batch = 2 * static_cast<std::size_t>(resolve_threads(threads));
    for (std::size_t lo = 0; lo < n; lo += batch) {
        const std::size_t hi = std::min(n, lo + batch);
        auto chunk = parallel_map<R>(hi - lo, threads, [&](std::size_t k) { return produce(lo + k); });
        for (std::size_t k = 0; k < chunk.size(); ++k)
            consume(lo + k, std::move(chunk[k]));
    }
}

/// Runs a suite; when it reports a violation, reruns once with 4x trials.
template <class F>
MomentReport with_rerun(std::uint64_t trials, F&& suite)
{
    MomentReport r = suite(trials);
    if (r.violated)
        r = suite(4 * trials);
    return r;
}

// ---------------------------------------------------------------------------
// Grids

/// Distinct values of floor(exp(i^epsilon)), i >= 1, lying in [3, x_max].
inline std::vector<std::uint64_t> test_points(double epsilon, std::uint64_t x_max)
{
    require(epsilon > 0.0 && epsilon < 0.25, "test_points: epsilon must lie in (0, 1/4)");
    std::vector<std::uint64_t> out;
    if (x_max < 3)
        return out;
    auto value = [&](double i) { return std::floor(std::exp(std::pow(i, epsilon))); };
    double v = 2.0;
    while (true) {
        // Smallest i with exp(i^eps) >= v + 1, then repaired against rounding.
        double i = std::max(1.0, std::ceil(std::pow(std::log(v + 1.0), 1.0 / epsilon)));
        while (i > 1.0 && value(i - 1.0) >= v + 1.0)
            i -= 1.0;
        while (value(i) < v + 1.0)
            i += 1.0;
        const double x = value(i);
        if (x > static_cast<double>(x_max))
            break;
        out.push_back(static_cast<std::uint64_t>(x));
        v = x;
    }
    return out;
}

/// floor(X_l) for X_l = exp(2^{l^K}), K = 1/(4 epsilon), while X_l <= x_max.
inline std::vector<std::uint64_t> block_boundaries(double epsilon, std::uint64_t x_max)
{
    require(epsilon > 0.0 && epsilon < 0.25, "block_boundaries: epsilon must lie in (0, 1/4)");
    const double K = 1.0 / (4.0 * epsilon);
    const double log_cap = std::log(static_cast<double>(std::max<std::uint64_t>(x_max, 1)));
    std::vector<std::uint64_t> out;
    for (int l = 1;; ++l) {
        const double log_X = std::exp2(std::pow(static_cast<double>(l), K));
        if (log_X > log_cap)
            break;
        const auto X = static_cast<std::uint64_t>(std::floor(std::exp(log_X)));
        if (X > x_max)
            break;
        out.push_back(X);
    }
    return out;
}

/// R(x) = (loglog x)^{1/4 + epsilon}.
inline double r_of(double x, double epsilon)
{
    require(x >= 3.0, "r_of: x must be at least 3");
    return std::pow(std::log(std::log(x)), 0.25 + epsilon);
}

// ---------------------------------------------------------------------------
// Trials

struct TrialResult
{
    std::uint64_t index = 0;
    std::uint64_t seed = 0;
    std::shared_ptr<const std::vector<std::uint64_t>> grid;
    std::vector<Complex> m_values;
    std::vector<double> v_values;
    double normalized_sup = 0.0;     ///< max |M_f(x)| / (sqrt(x) R(x))
    std::uint64_t normalized_argmax = 0;
    double variance_sup = 0.0;       ///< max V(x) sqrt(loglog x) / x
    std::uint64_t variance_argmax = 0;
    double sup_constant = kSupConstant;
    bool exceeds_constant = false;   ///< normalized_sup > sup_constant
    bool degenerate = false;         ///< empty grid
};

inline double normalized_value(Complex m, std::uint64_t x, double epsilon)
{
    const double xd = static_cast<double>(x);
    return std::abs(m) / (std::sqrt(xd) * r_of(xd, epsilon));
}

inline double variance_ratio(double v, std::uint64_t x)
{
    const double xd = static_cast<double>(x);
    return v * std::sqrt(std::log(std::log(xd))) / xd;
}

inline std::uint64_t trial_seed(const ExperimentConfig& cfg, std::uint64_t index)
{
    return derive_seed(cfg.seed_base, kTrialStream, index);
}

/// Evaluates M_f and V on `grid` (ascending, duplicates allowed, all >= 3).
inline TrialResult run_trial(const ExperimentConfig& cfg, std::uint64_t seed, const PrimeTables& tables,
                             std::shared_ptr<const std::vector<std::uint64_t>> grid)
{
    require(grid != nullptr, "run_trial: no grid");
    require(std::is_sorted(grid->begin(), grid->end()), "run_trial: grid must be ascending");
    TrialResult r;
    r.seed = seed;
    r.grid = grid;
    if (grid->empty()) {
        r.degenerate = true;
        return r;
    }
    require(grid->front() >= 3, "run_trial: grid points must be at least 3");
    const SampledFunction f(cfg.model, seed, tables);
    const LargePrimeSweep sweep(f, grid->back());
    r.m_values.reserve(grid->size());
    r.v_values.reserve(grid->size());
    for (std::uint64_t x : *grid) {
        const Complex m = sweep.m_f(x);
        const double v = sweep.v(x);
        r.m_values.push_back(m);
        r.v_values.push_back(v);
        const double nv = normalized_value(m, x, cfg.epsilon);
        if (nv > r.normalized_sup) {
            r.normalized_sup = nv;
            r.normalized_argmax = x;
        }
        const double vr = variance_ratio(v, x);
        if (vr > r.variance_sup) {
            r.variance_sup = vr;
            r.variance_argmax = x;
        }
    }
    r.exceeds_constant = r.normalized_sup > r.sup_constant;
    return r;
}

inline TrialResult run_trial(const ExperimentConfig& cfg, std::uint64_t seed, const PrimeTables& tables)
{
    cfg.validate(tables);
    return run_trial(cfg, seed, tables,
                     std::make_shared<const std::vector<std::uint64_t>>(test_points(cfg.epsilon, cfg.x_max)));
}

struct QuantileSummary
{
    double q05 = 0, q25 = 0, q50 = 0, q75 = 0, q95 = 0;
    double mean = 0, std_error = 0;
};

inline QuantileSummary summarize(const std::vector<double>& v)
{
    QuantileSummary s;
    if (v.empty())
        return s;
    s.q05 = quantile(v, 0.05);
    s.q25 = quantile(v, 0.25);
    s.q50 = quantile(v, 0.5);
    s.q75 = quantile(v, 0.75);
    s.q95 = quantile(v, 0.95);
    MeanAccumulator acc;
    for (double x : v)
        acc.add(x);
    s.mean = acc.mean();
    s.std_error = acc.std_error();
    return s;
}

struct EnsembleSummary
{
    std::uint64_t trials = 0;
    std::size_t grid_size = 0;
    std::vector<double> normalized_sups;   ///< by trial index
    std::vector<double> variance_sups;
    QuantileSummary normalized;
    QuantileSummary variance;
    double median_std_error = 0.0;         ///< bootstrap SE of the normalized_sup median
    double exceed_fraction = 0.0;          ///< fraction of trials with normalized_sup > 6
    double exceed_two_fraction = 0.0;      ///< fraction with normalized_sup > 2
};

/// Runs cfg.trials trials; `each` (optional) sees every TrialResult in index order.
inline EnsembleSummary run_ensemble(const ExperimentConfig& cfg, const PrimeTables& tables,
                                    const std::function<void(const TrialResult&)>& each = {})
{
    cfg.validate(tables);
    const auto grid = std::make_shared<const std::vector<std::uint64_t>>(test_points(cfg.epsilon, cfg.x_max));
    EnsembleSummary s;
    s.trials = cfg.trials;
    s.grid_size = grid->size();
    std::uint64_t over6 = 0, over2 = 0;
    parallel_for_ordered<TrialResult>(
        cfg.trials, cfg.threads,
        [&](std::size_t j) {
            auto r = run_trial(cfg, trial_seed(cfg, j), tables, grid);
            r.index = j;
            return r;
        },
        [&](std::size_t, TrialResult&& r) {
            if (each)
                each(r);
            s.normalized_sups.push_back(r.normalized_sup);
            s.variance_sups.push_back(r.variance_sup);
            over6 += r.exceeds_constant;
            over2 += r.normalized_sup > 2.0;
        });
    s.normalized = summarize(s.normalized_sups);
    s.variance = summarize(s.variance_sups);
    s.median_std_error = median_std_error(s.normalized_sups, derive_seed(cfg.seed_base, 0xB0, 0));
    s.exceed_fraction = static_cast<double>(over6) / static_cast<double>(cfg.trials);
    s.exceed_two_fraction = static_cast<double>(over2) / static_cast<double>(cfg.trials);
    return s;
}

// ---------------------------------------------------------------------------
// Hypercontractive moments

/// Finitely supported coefficients (n, a_n), n >= 1.
struct WeightSpec
{
    std::string name;
    std::vector<std::pair<std::uint64_t, Complex>> terms;

    static WeightSpec ones(std::uint64_t n)
    {
        require(n >= 1, "WeightSpec::ones: n must be positive");
        WeightSpec w{"ones", {}};
        for (std::uint64_t k = 1; k <= n; ++k)
            w.terms.emplace_back(k, 1.0);
        return w;
    }

    static WeightSpec indicator(std::vector<std::uint64_t> support)
    {
        WeightSpec w{"indicator", {}};
        std::sort(support.begin(), support.end());
        support.erase(std::unique(support.begin(), support.end()), support.end());
        for (auto n : support) {
            require(n >= 1, "WeightSpec::indicator: support must be positive");
            w.terms.emplace_back(n, 1.0);
        }
        return w;
    }

    [[nodiscard]] std::uint64_t max_n() const
    {
        std::uint64_t m = 0;
        for (const auto& [n, a] : terms)
            m = std::max(m, n);
        return m;
    }
};

/// (sum |a_n|^2 d_{2m-1}(n))^m, exact divisor counts from the sieve.
inline double hypercontractive_bound(const WeightSpec& w, int m, const PrimeTables& tables)
{
    require(m >= 1, "hypercontractive_bound: m must be positive");
    CompensatedSum s;
    for (const auto& [n, a] : w.terms)
        s.add(std::norm(a) * static_cast<double>(divisor_m(n, 2 * static_cast<std::uint64_t>(m) - 1, tables)));
    const double b = std::pow(s.value(), m);
    if (!std::isfinite(b))
        throw OverflowError("hypercontractive_bound: bound overflows double");
    return b;
}

/// MC estimate of E|sum a_n f(n)|^{2m} against the divisor-function bound.
inline MomentReport hypercontractive_check(const WeightSpec& w, int m, Model model, std::uint64_t trials,
                                           std::uint64_t seed_base, const PrimeTables& tables,
                                           unsigned threads = 1)
{
    require(m >= 1 && m <= 3, "hypercontractive_check: m must lie in [1, 3]");
    require(trials >= 1000, "hypercontractive_check: at least 1000 trials required");
    require(!w.terms.empty(), "hypercontractive_check: empty weight");
    const std::uint64_t N = w.max_n();
    require(N <= tables.limit(), "hypercontractive_check: support exceeds table limit");
    const double bound = hypercontractive_bound(w, m, tables);
    const auto samples = parallel_map<double>(trials, threads, [&](std::size_t j) {
        const SampledFunction f(model, derive_seed(seed_base, kMomentStream, j), tables);
        const auto vals = f.dense_values(N);
        Complex s{};
        for (const auto& [n, a] : w.terms)
            s += a * vals[n];
        return std::pow(std::norm(s), m);
    });
    MeanAccumulator acc;
    for (double v : samples)
        acc.add(v);
    return upper_report(acc, bound);
}

// ---------------------------------------------------------------------------
// Conditional Hoeffding tails

struct TailPoint
{
    double t = 0.0;
    MomentReport report;            ///< estimate = P(|M_f(x)| >= t), bound = derived Hoeffding bound
};

struct HoeffdingReport
{
    std::uint64_t x = 0;
    double v0 = 0.0;                ///< conditional variance given the small primes
    double t_threshold = 0.0;       ///< 2 sqrt(x) R(x)
    MomentReport at_threshold;
    double sharp_bound = 0.0;       ///< exp(-4 x R^2 / V0), reported only
    std::vector<TailPoint> grid;    ///< t = c sqrt(V0) for several c, and t = 0
    bool degenerate = false;        ///< V0 = 0
};

/// Derived Hoeffding bound for P(|M| >= t) given the interval half-widths |B_p|.
/// Rademacher: 2 exp(-t^2 / (2 V0)); Steinhaus (Re and Im at t/sqrt 2): 4 exp(-t^2 / (4 V0)).
inline double hoeffding_bound(Model model, double t, double v0)
{
    if (v0 <= 0.0)
        return t > 0.0 ? 0.0 : (model == Model::Rademacher ? 2.0 : 4.0);
    return model == Model::Rademacher ? 2.0 * std::exp(-t * t / (2.0 * v0)) : 4.0 * std::exp(-t * t / (4.0 * v0));
}

/// Fixes f on primes <= sqrt(x) from small_prime_seed and resamples the primes
/// in (sqrt(x), x]; M_f(x) = sum_p f(p) B_p with B_p = A_f(floor(x/p)) fixed.
inline HoeffdingReport hoeffding_tail_check(const ExperimentConfig& cfg, std::uint64_t x,
                                            std::uint64_t small_prime_seed, std::uint64_t trials,
                                            const PrimeTables& tables)
{
    require(x >= 16, "hoeffding_tail_check: x must be at least 16");
    require(x <= tables.limit(), "hoeffding_tail_check: x exceeds table limit");
    require(trials >= 10'000, "hoeffding_tail_check: at least 10^4 resamples required");
    HoeffdingReport out;
    out.x = x;
    const std::uint64_t root = isqrt(x);
    const auto a = prefix_sums(SampledFunction(cfg.model, small_prime_seed, tables), root);
    std::vector<std::uint64_t> ps;
    std::vector<Complex> b;
    CompensatedSum v0;
    for (std::size_t i = tables.prime_count(root); i < tables.primes().size(); ++i) {
        const std::uint64_t p = tables.primes()[i];
        if (p > x)
            break;
        ps.push_back(p);
        b.push_back(a[x / p]);
        v0.add(std::norm(a[x / p]));
    }
    out.v0 = v0.value();
    out.degenerate = out.v0 == 0.0;
    const double xd = static_cast<double>(x);
    const double R = r_of(xd, cfg.epsilon);
    out.t_threshold = 2.0 * std::sqrt(xd) * R;
    out.sharp_bound = out.degenerate ? 0.0 : std::exp(-4.0 * xd * R * R / out.v0);

    const auto mags = parallel_map<double>(trials, cfg.threads, [&](std::size_t j) {
        const std::uint64_t key = derive_seed(small_prime_seed, kResampleStream, j);
        Complex m{};
        for (std::size_t k = 0; k < ps.size(); ++k)
            m += prime_value_from_bits(cfg.model, keyed_bits(key, ps[k])) * b[k];
        return std::abs(m);
    });
    auto tail = [&](double t) {
        MeanAccumulator acc;
        for (double v : mags)
            acc.add(v >= t ? 1.0 : 0.0);
        return upper_report(acc, hoeffding_bound(cfg.model, t, out.v0));
    };
    out.at_threshold = tail(out.t_threshold);
    const double sd = std::sqrt(out.v0);
    for (double c : {0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0})
        out.grid.push_back({c * sd, tail(c * sd)});
    return out;
}

// ---------------------------------------------------------------------------
// Submartingales

/// One step X_k -> X_{k+1} with the new randomness resampled: estimate is the
/// MC mean of X_{k+1}, bound is X_k, violated iff estimate + 3 SE < X_k.
struct StepReport
{
    std::uint64_t from = 0;
    std::uint64_t to = 0;
    std::uint64_t new_primes = 0;
    MomentReport report;
    double exact_mean = 0.0;        ///< E[X_{k+1} | F_k] in closed form
};

inline MomentReport lower_report(const MeanAccumulator& acc, double bound)
{
    return {acc.mean(), acc.std_error(), bound, acc.count(), acc.mean() + 3.0 * acc.std_error() < bound};
}

/// Sum over revealed primes sqrt(x_base) < q <= floor(sqrt(k)) of f(q) A(floor(x_base / q)).
inline Complex z_partial(const SampledFunction& f, const std::vector<Complex>& a_small, std::uint64_t x_base,
                         std::uint64_t k)
{
    const auto& t = f.tables();
    const std::uint64_t hi = std::min(isqrt(k), x_base);
    Complex s{};
    for (std::size_t i = t.prime_count(isqrt(x_base)); i < t.primes().size() && t.primes()[i] <= hi; ++i) {
        const std::uint64_t q = t.primes()[i];
        s += f.prime_value(q) * a_small[x_base / q];
    }
    return s;
}

/// Steps (k, k+1) for k_lo <= k < k_hi of Z_k = |sum_{n <= x_base, sqrt(x_base) < P(n) <= floor(sqrt k)} f(n)|^2.
inline std::vector<StepReport> submartingale_check_z(const ExperimentConfig& cfg, std::uint64_t x_base,
                                                     std::uint64_t k_lo, std::uint64_t k_hi,
                                                     std::uint64_t small_seed, std::uint64_t resamples,
                                                     const PrimeTables& tables)
{
    require(x_base >= 4 && x_base <= cfg.oracle_cap && x_base <= tables.limit(),
            "submartingale_check_z: x_base must lie in [4, oracle_cap]");
    require(k_lo < k_hi, "submartingale_check_z: empty window");
    require(resamples >= 2, "submartingale_check_z: need at least 2 resamples");
    require(isqrt(k_hi) <= tables.limit(), "submartingale_check_z: window exceeds table limit");
    const SampledFunction fixed(cfg.model, small_seed, tables);
    const auto a_small = prefix_sums(fixed, isqrt(x_base));
    std::vector<StepReport> out;
    for (std::uint64_t k = k_lo; k < k_hi; ++k) {
        StepReport s;
        s.from = k;
        s.to = k + 1;
        const Complex base = z_partial(fixed, a_small, x_base, k);
        const double z_k = std::norm(base);
        const std::uint64_t r0 = std::min(isqrt(k), x_base), r1 = std::min(isqrt(k + 1), x_base);
        if (r1 == r0 || !tables.is_prime(r1) || r1 <= isqrt(x_base)) {
            s.report = {z_k, 0.0, z_k, 1, false};
            s.exact_mean = z_k;
            out.push_back(s);
            continue;
        }
        s.new_primes = 1;
        const Complex bp = a_small[x_base / r1];
        s.exact_mean = z_k + std::norm(bp);
        MeanAccumulator acc;
        for (std::uint64_t j = 0; j < resamples; ++j) {
            const auto f = SampledFunction::split(cfg.model, small_seed, r0,
                                                  derive_seed(small_seed, kResampleStream ^ k, j), tables);
            acc.add(std::norm(base + f.prime_value(r1) * bp));
        }
        s.report = lower_report(acc, z_k);
        out.push_back(s);
    }
    return out;
}

/// The Y-sequence on test points in [X_prev, x_end] with one fixed truncation T.
struct YSequence
{
    std::uint64_t x_prev_block = 7;
    std::uint64_t x_end = 30;
    int ell = 2;
    double K = 2.5;
    double tcut = 50.0;              ///< 0 selects the quadrature default for x_end
};

inline std::vector<std::uint64_t> y_grid(const ExperimentConfig& cfg, const YSequence& y)
{
    std::vector<std::uint64_t> g{y.x_prev_block};
    for (auto x : test_points(cfg.epsilon, y.x_end))
        if (x > y.x_prev_block)
            g.push_back(x);
    return g;
}

inline QuadConfig y_quad(const ExperimentConfig& cfg, const YSequence& y)
{
    QuadConfig q = cfg.quad;
    q.tcut = y.tcut > 0.0 ? y.tcut : q.truncation_for(y.x_end);
    return q;
}

/// Y along the grid for one realization.
inline std::vector<double> y_path(const SampledFunction& f, const std::vector<std::uint64_t>& grid,
                                  const YSequence& y, const QuadConfig& quad)
{
    const auto integrals = parseval_integrals(f, grid, quad);
    std::vector<double> out(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
        out[i] = y_normalization(grid[i], y.x_prev_block, y.ell, y.K) * integrals[i].value;
    return out;
}

/// For each grid step, fixes f on primes <= x_{i-1} and resamples the primes in (x_{i-1}, x_i].
inline std::vector<StepReport> submartingale_check_y(const ExperimentConfig& cfg, const YSequence& y,
                                                     std::uint64_t small_seed, std::uint64_t resamples,
                                                     const PrimeTables& tables)
{
    require(y.x_prev_block >= 3 && y.x_prev_block < y.x_end && y.x_end <= tables.limit(),
            "submartingale_check_y: need 3 <= X_prev < x_end <= limit");
    require(resamples >= 2, "submartingale_check_y: need at least 2 resamples");
    const auto grid = y_grid(cfg, y);
    const auto quad = y_quad(cfg, y);
    const SampledFunction fixed(cfg.model, small_seed, tables);
    const auto base = y_path(fixed, grid, y, quad);
    std::vector<StepReport> out;
    for (std::size_t i = 1; i < grid.size(); ++i) {
        StepReport s;
        s.from = grid[i - 1];
        s.to = grid[i];
        s.new_primes = tables.prime_count(s.to) - tables.prime_count(s.from);
        const double y_prev = base[i - 1];
        const double scale = y_normalization(s.to, y.x_prev_block, y.ell, y.K) /
                             y_normalization(s.from, y.x_prev_block, y.ell, y.K);
        s.exact_mean = y_prev * scale * expected_local_product(s.from, s.to, cfg.model, tables);
        if (s.new_primes == 0) {
            // Nothing is resampled; compare up to rounding in the normalization.
            const double y_next = base[i];
            s.report = {y_next, 0.0, y_prev, 1, y_next < y_prev * (1.0 - 1e-12)};
            out.push_back(s);
            continue;
        }
        const auto vals = parallel_map<double>(resamples, cfg.threads, [&](std::size_t j) {
            const auto f = SampledFunction::split(cfg.model, small_seed, s.from,
                                                  derive_seed(small_seed, kResampleStream ^ s.to, j), tables);
            return y_normalization(s.to, y.x_prev_block, y.ell, y.K) * parseval_integral(f, s.to, quad).value;
        });
        MeanAccumulator acc;
        for (double v : vals)
            acc.add(v);
        s.report = lower_report(acc, y_prev);
        out.push_back(s);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Doob inequalities

enum class SequenceKind
{
    Z,
    Y
};

inline SequenceKind parse_sequence(std::string_view s)
{
    if (s == "z")
        return SequenceKind::Z;
    if (s == "y")
        return SequenceKind::Y;
    throw InvalidArgument("unknown sequence '" + std::string(s) + "' (expected z or y)");
}

struct SequenceSpec
{
    SequenceKind kind = SequenceKind::Z;
    std::uint64_t x_base = 1000;     ///< Z: n <= x_base
    std::uint64_t p_max = 100;       ///< Z: reveal primes in (sqrt(x_base), p_max]
    YSequence y;
};

/// One sample path of the named sequence, starting at its F_0 value.
inline std::vector<double> sample_sequence(const SequenceSpec& spec, const ExperimentConfig& cfg,
                                           const SampledFunction& f)
{
    if (spec.kind == SequenceKind::Z) {
        const auto& t = f.tables();
        const auto a_small = prefix_sums(f, isqrt(spec.x_base));
        std::vector<double> path{0.0};
        Complex s{};
        const std::uint64_t hi = std::min(spec.p_max, spec.x_base);
        for (std::size_t i = t.prime_count(isqrt(spec.x_base)); i < t.primes().size() && t.primes()[i] <= hi; ++i) {
            const std::uint64_t q = t.primes()[i];
            s += f.prime_value(q) * a_small[spec.x_base / q];
            path.push_back(std::norm(s));
        }
        return path;
    }
    return y_path(f, y_grid(cfg, spec.y), spec.y, y_quad(cfg, spec.y));
}

/// Exact E[X_n] for the terminal element of the sequence.
inline double sequence_terminal_mean(const SequenceSpec& spec, const ExperimentConfig& cfg, const PrimeTables& tables)
{
    if (spec.kind == SequenceKind::Z) {
        const auto q = squarefree_counts(isqrt(spec.x_base), tables);
        double s = 0.0;
        const std::uint64_t hi = std::min(spec.p_max, spec.x_base);
        for (std::size_t i = tables.prime_count(isqrt(spec.x_base)); i < tables.primes().size() && tables.primes()[i] <= hi; ++i) {
            const std::uint64_t m = spec.x_base / tables.primes()[i];
            s += cfg.model == Model::Rademacher ? static_cast<double>(q[m]) : static_cast<double>(m);
        }
        return s;
    }
    const auto quad = y_quad(cfg, spec.y);
    const double T = quad.tcut;
    return y_normalization(spec.y.x_end, spec.y.x_prev_block, spec.y.ell, spec.y.K) *
           expected_local_product(0, spec.y.x_end, cfg.model, tables) * 4.0 * std::atan(2.0 * T);
}

inline void validate_sequence(const SequenceSpec& spec, const ExperimentConfig& cfg, const PrimeTables& tables)
{
    if (spec.kind == SequenceKind::Z) {
        require(spec.x_base >= 4 && spec.x_base <= cfg.oracle_cap && spec.x_base <= tables.limit(),
                "sequence z: x_base must lie in [4, oracle_cap]");
        require(spec.p_max > isqrt(spec.x_base), "sequence z: p_max must exceed sqrt(x_base)");
    }
    else {
        require(spec.y.x_prev_block >= 3 && spec.y.x_prev_block < spec.y.x_end && spec.y.x_end <= tables.limit(),
                "sequence y: need 3 <= X_prev < x_end <= limit");
    }
}

/// Maximal form (p_exponent = 0): lambda P(max X > lambda) <= E X_n.
/// L^p form (p_exponent > 1): E (max X)^p <= (p/(p-1))^p max_k E X_k^p.
/// The standard error is that of the per-sample difference of the two sides.
inline MomentReport doob_from_paths(const std::vector<std::vector<double>>& paths, double lambda, double p_exponent)
{
    require(p_exponent == 0.0 || p_exponent > 1.0, "doob: p_exponent must be 0 (maximal form) or > 1");
    require(p_exponent != 0.0 || lambda > 0.0, "doob: lambda must be positive");
    require(paths.size() >= 2, "doob: need at least 2 sample paths");
    const std::size_t len = paths.front().size();
    for (const auto& path : paths)
        require(path.size() == len && len > 0, "doob: sample paths must share a positive length");
    MeanAccumulator lhs, rhs, diff;
    if (p_exponent == 0.0) {
        for (const auto& path : paths) {
            const double mx = *std::max_element(path.begin(), path.end());
            const double l = mx > lambda ? lambda : 0.0;
            lhs.add(l);
            rhs.add(path.back());
            diff.add(l - path.back());
        }
    }
    else {
        const double c = std::pow(p_exponent / (p_exponent - 1.0), p_exponent);
        std::vector<MeanAccumulator> moments(len);
        for (const auto& path : paths)
            for (std::size_t k = 0; k < len; ++k)
                moments[k].add(std::pow(path[k], p_exponent));
        std::size_t kstar = 0;
        for (std::size_t k = 1; k < len; ++k)
            if (moments[k].mean() > moments[kstar].mean())
                kstar = k;
        for (const auto& path : paths) {
            const double mx = std::pow(*std::max_element(path.begin(), path.end()), p_exponent);
            const double r = c * std::pow(path[kstar], p_exponent);
            lhs.add(mx);
            rhs.add(r);
            diff.add(mx - r);
        }
    }
    return MomentReport::upper(lhs.mean(), diff.std_error(), rhs.mean(), paths.size());
}

inline MomentReport doob_check(const SequenceSpec& spec, const ExperimentConfig& cfg, double lambda, double p_exponent,
                               std::uint64_t trials, const PrimeTables& tables)
{
    validate_sequence(spec, cfg, tables);
    const auto paths = parallel_map<std::vector<double>>(trials, cfg.threads, [&](std::size_t j) {
        return sample_sequence(spec, cfg, SampledFunction(cfg.model, derive_seed(cfg.seed_base, kDoobStream, j), tables));
    });
    return doob_from_paths(paths, lambda, p_exponent);
}

// ---------------------------------------------------------------------------
// Euler-product event and variance ensembles

struct SigmaEventSummary
{
    std::uint64_t x_prev = 0;
    double T_param = 0.0;
    double threshold = 0.0;          ///< sqrt(T) log X / sqrt(loglog X / log 2)
    std::uint64_t trials = 0;
    QuantileSummary integral;
    double exceed_fraction = 0.0;
    double exceed_std_error = 0.0;
    double budget = 0.0;             ///< T^{-1/4}
    double sqrt_ratio_mean = 0.0;    ///< E sqrt(I) / (log X / sqrt(loglog X))^{1/2}
    double sqrt_ratio_std_error = 0.0;
};

inline double sigma_threshold(std::uint64_t x_prev, double T)
{
    const double lx = std::log(static_cast<double>(x_prev));
    return std::sqrt(T) * lx / std::sqrt(std::log(lx) / std::numbers::ln2);
}

inline SigmaEventSummary sigma_event_statistic(const ExperimentConfig& cfg, std::uint64_t x_prev,
                                               std::uint64_t trials, const PrimeTables& tables)
{
    require(x_prev >= 3 && x_prev <= tables.limit(), "sigma_event_statistic: X_prev must lie in [3, limit]");
    require(trials >= 1, "sigma_event_statistic: trials must be positive");
    require(cfg.T_param >= 1.0, "sigma_event_statistic: T must be at least 1");
    SigmaEventSummary s;
    s.x_prev = x_prev;
    s.T_param = cfg.T_param;
    s.threshold = sigma_threshold(x_prev, cfg.T_param);
    s.trials = trials;
    s.budget = std::pow(cfg.T_param, -0.25);
    const auto values = parallel_map<double>(trials, cfg.threads, [&](std::size_t j) {
        const SampledFunction f(cfg.model, derive_seed(cfg.seed_base, kSigmaStream, j), tables);
        return parseval_integral(f, x_prev, cfg.quad).value;
    });
    s.integral = summarize(values);
    const double lx = std::log(static_cast<double>(x_prev));
    const double scale = std::sqrt(lx / std::sqrt(std::log(lx)));
    MeanAccumulator exceed, ratio;
    for (double v : values) {
        exceed.add(v > s.threshold ? 1.0 : 0.0);
        ratio.add(std::sqrt(v) / scale);
    }
    s.exceed_fraction = exceed.mean();
    s.exceed_std_error = exceed.std_error();
    s.sqrt_ratio_mean = ratio.mean();
    s.sqrt_ratio_std_error = ratio.std_error();
    return s;
}

struct VariancePoint
{
    std::uint64_t x = 0;
    QuantileSummary ratio;           ///< V(x) sqrt(loglog x) / x across trials
    MomentReport mean_check;         ///< MC mean of V(x) against exact E V(x)
};

/// Distribution of V(x) sqrt(loglog x)/x at each report point, and the MC mean
/// of V(x) against its exact expectation.
inline std::vector<VariancePoint> variance_ratio_ensemble(const ExperimentConfig& cfg,
                                                          const std::vector<std::uint64_t>& report_points,
                                                          const PrimeTables& tables)
{
    cfg.validate(tables);
    require(!report_points.empty(), "variance_ratio_ensemble: no report points");
    require(std::is_sorted(report_points.begin(), report_points.end()), "variance_ratio_ensemble: points must ascend");
    require(report_points.front() >= 3 && report_points.back() <= cfg.x_max,
            "variance_ratio_ensemble: report points must lie in [3, x_max]");
    const auto v = parallel_map<std::vector<double>>(cfg.trials, cfg.threads, [&](std::size_t j) {
        const SampledFunction f(cfg.model, trial_seed(cfg, j), tables);
        std::vector<double> row;
        for (auto x : report_points)
            row.push_back(conditional_variance(f, x));
        return row;
    });
    std::vector<VariancePoint> out;
    for (std::size_t i = 0; i < report_points.size(); ++i) {
        const std::uint64_t x = report_points[i];
        std::vector<double> ratios;
        MeanAccumulator acc;
        for (const auto& row : v) {
            ratios.push_back(variance_ratio(row[i], x));
            acc.add(row[i]);
        }
        const double exact = exact_expected_variance(x, cfg.model, tables);
        out.push_back({x, summarize(ratios), MomentReport::equal(acc.mean(), acc.std_error(), exact, acc.count())});
    }
    return out;
}

} // namespace rmf

#endif // RMF_HARNESS_HPP
