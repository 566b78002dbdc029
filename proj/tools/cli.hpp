#ifndef RMFLAB_CLI_HPP
#define RMFLAB_CLI_HPP

// rmflab command line: argument handling, experiment dispatch and row output.
// run_cli is callable in-process; it never touches std::cout or std::cerr.

#include "rmf/errors.hpp"
#include "rmf/euler.hpp"
#include "rmf/harness.hpp"
#include "rmf/rmf.hpp"
#include "rmf/sieve.hpp"
#include "rmf/stats.hpp"
#include "rmf/sums.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace rmflab
{

using rmf::require;

enum ExitCode : int
{
    kOk = 0,
    kViolation = 1,
    kUsage = 2,
    kResource = 3
};

// ---------------------------------------------------------------------------
// Rows

/// One output record. Unset optionals are written as empty CSV fields / JSON null.
struct Row
{
    std::string experiment;
    std::string model;
    std::optional<std::uint64_t> trial;
    std::optional<std::uint64_t> x;
    std::optional<int> ell;
    std::optional<int> m;
    std::optional<double> t;
    std::string stat;
    double estimate = 0.0;
    std::optional<double> std_error;
    std::optional<double> bound;
    std::optional<bool> violated;
};

inline const std::vector<std::string>& columns()
{
    static const std::vector<std::string> c{"experiment", "model", "trial", "x", "ell", "m", "t",
                                            "stat", "estimate", "std_error", "bound", "violated"};
    return c;
}

inline std::string format_double(double v)
{
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// RFC 4180: quote fields holding a comma, quote or line break; double inner quotes.
inline std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\r\n") == std::string::npos)
        return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"')
            q += '"';
        q += c;
    }
    return q + '"';
}

class RowWriter
{
  public:
    RowWriter(std::ostream& os, bool json) : os_(os), json_(json) {}

    void write(const Row& r)
    {
        if (r.violated.value_or(false))
            any_violated_ = true;
        begin();
        ++rows_;
        if (json_)
            write_json(r);
        else
            write_csv(r);
    }

    void finish()
    {
        begin();
        if (json_)
            os_ << (rows_ ? "\n]\n" : "]\n");
        os_.flush();
    }

    [[nodiscard]] bool any_violated() const noexcept { return any_violated_; }

  private:
    // Header goes out with the first row, so a run that fails during setup writes nothing.
    void begin()
    {
        if (started_)
            return;
        started_ = true;
        if (json_) {
            os_ << "[";
        }
        else {
            for (std::size_t i = 0; i < columns().size(); ++i)
                os_ << (i ? "," : "") << columns()[i];
            os_ << "\r\n";
        }
    }

    template <class T>
    static std::string opt(const std::optional<T>& v)
    {
        if (!v)
            return "";
        if constexpr (std::is_same_v<T, double>)
            return format_double(*v);
        else if constexpr (std::is_same_v<T, bool>)
            return *v ? "true" : "false";
        else
            return std::to_string(*v);
    }

    void write_csv(const Row& r)
    {
        os_ << csv_field(r.experiment) << ',' << csv_field(r.model) << ',' << opt(r.trial) << ',' << opt(r.x) << ','
            << opt(r.ell) << ',' << opt(r.m) << ',' << opt(r.t) << ',' << csv_field(r.stat) << ','
            << format_double(r.estimate) << ',' << opt(r.std_error) << ',' << opt(r.bound) << ','
            << opt(r.violated) << "\r\n";
    }

    template <class T>
    static nlohmann::json jopt(const std::optional<T>& v)
    {
        return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
    }

    void write_json(const Row& r)
    {
        nlohmann::ordered_json j;
        j["experiment"] = r.experiment;
        j["model"] = r.model;
        j["trial"] = jopt(r.trial);
        j["x"] = jopt(r.x);
        j["ell"] = jopt(r.ell);
        j["m"] = jopt(r.m);
        j["t"] = jopt(r.t);
        j["stat"] = r.stat;
        j["estimate"] = r.estimate;
        j["std_error"] = jopt(r.std_error);
        j["bound"] = jopt(r.bound);
        j["violated"] = jopt(r.violated);
        os_ << (rows_ > 1 ? ",\n" : "\n") << j.dump();
    }

    std::ostream& os_;
    bool json_;
    bool started_ = false;
    bool any_violated_ = false;
    std::uint64_t rows_ = 0;
};

inline Row report_row(std::string experiment, rmf::Model model, std::string stat, const rmf::MomentReport& r)
{
    Row row;
    row.experiment = std::move(experiment);
    row.model = std::string(rmf::to_string(model));
    row.stat = std::move(stat);
    row.estimate = r.estimate;
    row.std_error = r.std_error;
    row.bound = r.bound;
    row.violated = r.violated;
    return row;
}

inline Row value_row(std::string experiment, rmf::Model model, std::string stat, double value)
{
    Row row;
    row.experiment = std::move(experiment);
    row.model = std::string(rmf::to_string(model));
    row.stat = std::move(stat);
    row.estimate = value;
    return row;
}

// ---------------------------------------------------------------------------
// Options

struct Options
{
    std::string model = "rademacher";
    std::uint64_t seed = 0;
    std::optional<std::uint64_t> trials;
    std::string threads = "1";
    double epsilon = 0.1;
    std::optional<std::uint64_t> x_max;
    double t_param = 10.0;
    std::optional<double> tcut;
    std::optional<double> quad_tol;
    std::string out;
    std::string format = "csv";
    std::string table_cache;
    bool progress = false;

    // simulate
    std::string rows = "point";
    // oracle-check / hoeffding / submartingale-y
    std::optional<std::uint64_t> seeds;
    // moments
    std::string suite;
    std::vector<int> m_values;
    std::vector<std::uint64_t> n_values;
    std::vector<std::uint64_t> x_values;
    std::string sequence;
    std::vector<double> lambda_mult;
    std::optional<double> p_exponent;
    std::uint64_t x_base = 1000;
    std::uint64_t p_max = 100;
    std::uint64_t x_prev_block = 7;
    std::uint64_t x_end = 30;
    std::uint64_t windows = 20;
    // euler
    std::string check;
    std::vector<double> t_values;
    std::uint64_t sequences = 100;
    std::uint64_t x_prev = 1000;
    // variance
    std::vector<std::uint64_t> points;
    // report
    std::vector<std::string> inputs;
};

inline std::vector<rmf::Model> models_of(const Options& o)
{
    if (o.model == "both")
        return {rmf::Model::Rademacher, rmf::Model::Steinhaus};
    return {rmf::parse_model(o.model)};
}

inline unsigned threads_of(const Options& o)
{
    if (o.threads == "auto")
        return 0;
    try {
        std::size_t used = 0;
        const unsigned long v = std::stoul(o.threads, &used);
        if (used == o.threads.size() && v >= 1 && v <= 1024)
            return static_cast<unsigned>(v);
    }
    catch (const std::exception&) {
    }
    throw rmf::InvalidArgument("--threads must be a positive integer or 'auto'");
}

inline rmf::ExperimentConfig config_of(const Options& o, rmf::Model model, std::uint64_t default_trials,
                                       std::uint64_t default_x_max)
{
    rmf::ExperimentConfig c;
    c.epsilon = o.epsilon;
    c.model = model;
    c.seed_base = o.seed;
    c.trials = o.trials.value_or(default_trials);
    c.x_max = o.x_max.value_or(default_x_max);
    c.T_param = o.t_param;
    if (o.tcut)
        c.quad.tcut = *o.tcut;
    if (o.quad_tol)
        c.quad.rel_tol = *o.quad_tol;
    c.threads = threads_of(o);
    require(c.epsilon > 0.0 && c.epsilon < 0.25, "--epsilon must lie in (0, 1/4)");
    require(c.T_param >= 1.0, "--t-param must be at least 1");
    require(c.quad.tcut >= 0.0, "--tcut must be positive");
    require(c.quad.rel_tol > 0.0, "--quad-tol must be positive");
    require(c.trials >= 1, "--trials must be positive");
    return c;
}

/// Sieve tables of exactly `limit`, through the cache file when one is configured.
inline rmf::PrimeTables tables_for(const Options& o, std::uint64_t limit, std::ostream& err)
{
    limit = std::max<std::uint64_t>(limit, 100);
    if (limit > rmf::kMaxTableLimit)
        throw rmf::InvalidArgument("requested range " + std::to_string(limit) + " exceeds the table limit " +
                                   std::to_string(rmf::kMaxTableLimit));
    std::string path = o.table_cache;
    if (path.empty())
        if (const char* env = std::getenv("RMF_TABLE_CACHE"))
            path = env;
    if (path.empty())
        return rmf::build_tables(limit);
    if (std::filesystem::exists(path)) {
        try {
            return rmf::load_tables(path, limit);
        }
        catch (const rmf::InvalidArgument& e) {
            err << "rmflab: note: table cache not used (" << e.what() << "); building in memory\n";
            return rmf::build_tables(limit);
        }
    }
    auto t = rmf::build_tables(limit);
    try {
        rmf::save_tables(path, t);
    }
    catch (const std::exception& e) {
        err << "rmflab: note: could not write table cache (" << e.what() << ")\n";
    }
    return t;
}

// ---------------------------------------------------------------------------
// Subcommands

inline void run_simulate(const Options& o, RowWriter& w, std::ostream& err)
{
    require(o.rows == "point" || o.rows == "trial", "--rows must be 'point' or 'trial'");
    const auto models = models_of(o);
    const std::uint64_t x_max = o.x_max.value_or(100'000);
    const auto tables = tables_for(o, x_max, err);
    for (auto model : models) {
        const auto cfg = config_of(o, model, 100, 100'000);
        const std::string ms(rmf::to_string(model));
        const std::string tag = "simulate";
        for (auto [l, X] = std::pair{1, rmf::block_boundaries(cfg.epsilon, cfg.x_max)}; auto b : X) {
            Row r = value_row(tag, model, "block_boundary", static_cast<double>(b));
            r.ell = l++;
            r.x = b;
            w.write(r);
        }
        const auto summary = rmf::run_ensemble(cfg, tables, [&](const rmf::TrialResult& tr) {
            if (o.progress && (tr.index + 1) % std::max<std::uint64_t>(1, cfg.trials / 10) == 0)
                err << "simulate[" << ms << "]: " << tr.index + 1 << "/" << cfg.trials << " trials\n";
            if (o.rows == "point") {
                for (std::size_t i = 0; i < tr.grid->size(); ++i) {
                    const auto x = (*tr.grid)[i];
                    Row r = value_row(tag, model, "normalized", rmf::normalized_value(tr.m_values[i], x, cfg.epsilon));
                    r.trial = tr.index;
                    r.x = x;
                    r.bound = tr.sup_constant;
                    w.write(r);
                }
            }
            Row ns = value_row(tag, model, "normalized_sup", tr.normalized_sup);
            ns.trial = tr.index;
            ns.x = tr.normalized_argmax;
            ns.bound = tr.sup_constant;
            w.write(ns);
            Row vs = value_row(tag, model, "variance_sup", tr.variance_sup);
            vs.trial = tr.index;
            vs.x = tr.variance_argmax;
            vs.bound = cfg.T_param;
            w.write(vs);
        });
        auto sum = [&](const std::string& stat, double v, std::optional<double> se = {},
                       std::optional<double> bound = {}) {
            Row r = value_row(tag, model, stat, v);
            r.x = cfg.x_max;
            r.std_error = se;
            r.bound = bound;
            w.write(r);
        };
        sum("grid_size", static_cast<double>(summary.grid_size));
        sum("normalized_sup_median", summary.normalized.q50, summary.median_std_error);
        sum("normalized_sup_mean", summary.normalized.mean, summary.normalized.std_error);
        sum("normalized_sup_q05", summary.normalized.q05);
        sum("normalized_sup_q25", summary.normalized.q25);
        sum("normalized_sup_q75", summary.normalized.q75);
        sum("normalized_sup_q95", summary.normalized.q95);
        sum("exceed_fraction", summary.exceed_fraction, {}, rmf::kSupConstant);
        sum("exceed_fraction", summary.exceed_two_fraction, {}, 2.0);
        sum("variance_sup_median", summary.variance.q50);
        sum("variance_sup_q95", summary.variance.q95);
    }
}

inline void run_oracle_check(const Options& o, RowWriter& w, std::ostream& err)
{
    const std::uint64_t x_max = o.x_max.value_or(3000);
    require(x_max >= 1, "--x-max must be positive");
    require(x_max <= rmf::kBruteForceCap, "oracle-check: --x-max exceeds the brute-force cap");
    const std::uint64_t seeds = o.seeds.value_or(20);
    require(seeds >= 1, "--seeds must be positive");
    const auto tables = tables_for(o, x_max, err);
    for (auto model : models_of(o)) {
        const auto cfg = config_of(o, model, 1, x_max);
        const double tol = model == rmf::Model::Rademacher ? 0.0 : 1e-9;
        const auto diffs = rmf::parallel_map<std::pair<double, std::uint64_t>>(seeds, cfg.threads, [&](std::size_t j) {
            const rmf::SampledFunction f(model, rmf::trial_seed(cfg, j), tables);
            double worst = 0.0;
            std::uint64_t bad = 0;
            for (std::uint64_t x = 1; x <= x_max; ++x) {
                const double d = std::abs(rmf::large_prime_sum(f, x) - rmf::large_prime_sum_bruteforce(f, x));
                worst = std::max(worst, d);
                bad += d > tol;
            }
            return std::pair{worst, bad};
        });
        for (std::uint64_t j = 0; j < seeds; ++j) {
            Row r = value_row("oracle-check", model, "max_abs_diff", diffs[j].first);
            r.trial = j;
            r.x = x_max;
            r.bound = tol;
            r.violated = diffs[j].first > tol;
            w.write(r);
            Row c = value_row("oracle-check", model, "mismatches", static_cast<double>(diffs[j].second));
            c.trial = j;
            c.x = x_max;
            c.bound = 0.0;
            c.violated = diffs[j].second > 0;
            w.write(c);
        }
    }
}

inline void run_hypercontractive(const Options& o, RowWriter& w, std::ostream& err)
{
    const auto ms = o.m_values.empty() ? std::vector<int>{1, 2, 3} : o.m_values;
    const auto ns = o.n_values.empty() ? std::vector<std::uint64_t>{10, 100, 1000} : o.n_values;
    for (int m : ms)
        require(m >= 1 && m <= 3, "--m must lie in [1, 3]");
    const auto tables = tables_for(o, *std::max_element(ns.begin(), ns.end()), err);
    for (auto model : models_of(o)) {
        const auto cfg = config_of(o, model, 20'000, 1);
        for (auto n : ns) {
            const auto weight = rmf::WeightSpec::ones(n);
            for (int m : ms) {
                const auto rep = rmf::with_rerun(cfg.trials, [&](std::uint64_t trials) {
                    return rmf::hypercontractive_check(weight, m, model, trials,
                                                       rmf::derive_seed(cfg.seed_base, n, m), tables, cfg.threads);
                });
                Row r = report_row("hypercontractive", model, "moment", rep);
                r.x = n;
                r.m = m;
                w.write(r);
            }
        }
    }
}

inline void run_hoeffding(const Options& o, RowWriter& w, std::ostream& err)
{
    const auto xs = o.x_values.empty() ? std::vector<std::uint64_t>{1000, 10'000} : o.x_values;
    const std::uint64_t seeds = o.seeds.value_or(10);
    const auto tables = tables_for(o, *std::max_element(xs.begin(), xs.end()), err);
    for (auto model : models_of(o)) {
        const auto cfg = config_of(o, model, 10'000, 1);
        for (auto x : xs) {
            for (std::uint64_t s = 0; s < seeds; ++s) {
                const std::uint64_t small = rmf::derive_seed(cfg.seed_base, 0x40, s);
                auto h = rmf::hoeffding_tail_check(cfg, x, small, cfg.trials, tables);
                if (h.at_threshold.violated || std::any_of(h.grid.begin(), h.grid.end(),
                                                           [](const auto& p) { return p.report.violated; }))
                    h = rmf::hoeffding_tail_check(cfg, x, small, 4 * cfg.trials, tables);
                auto put = [&](const std::string& stat, const rmf::MomentReport& rep, double t) {
                    Row r = report_row("hoeffding", model, stat, rep);
                    r.trial = s;
                    r.x = x;
                    r.t = t;
                    w.write(r);
                };
                put("tail_at_threshold", h.at_threshold, h.t_threshold);
                for (const auto& p : h.grid)
                    put("tail", p.report, p.t);
                Row v = value_row("hoeffding", model, "v0", h.v0);
                v.trial = s;
                v.x = x;
                w.write(v);
                Row pb = value_row("hoeffding", model, "sharp_form_bound", h.sharp_bound);
                pb.trial = s;
                pb.x = x;
                pb.t = h.t_threshold;
                w.write(pb);
            }
        }
    }
}

inline rmf::SequenceSpec sequence_of(const Options& o, rmf::SequenceKind kind)
{
    rmf::SequenceSpec s;
    s.kind = kind;
    s.x_base = o.x_base;
    s.p_max = o.p_max;
    s.y.x_prev_block = o.x_prev_block;
    s.y.x_end = o.x_end;
    if (o.tcut)
        s.y.tcut = *o.tcut;
    return s;
}

inline void run_doob(const Options& o, RowWriter& w, std::ostream& err)
{
    std::vector<rmf::SequenceKind> kinds;
    if (o.sequence.empty())
        kinds = {rmf::SequenceKind::Z, rmf::SequenceKind::Y};
    else
        kinds = {rmf::parse_sequence(o.sequence)};
    const auto mults = o.lambda_mult.empty() ? std::vector<double>{1.0, 2.0, 4.0} : o.lambda_mult;
    for (double l : mults)
        require(l > 0.0, "--lambda must be positive");
    const double p = o.p_exponent.value_or(2.0);
    require(p > 1.0, "--p must exceed 1");
    const auto tables = tables_for(o, std::max({o.x_base, o.p_max, o.x_end}), err);
    for (auto model : models_of(o)) {
        const auto cfg = config_of(o, model, 10'000, 1);
        for (auto kind : kinds) {
            const auto spec = sequence_of(o, kind);
            const std::string seq = kind == rmf::SequenceKind::Z ? "doob-z" : "doob-y";
            const double mean = rmf::sequence_terminal_mean(spec, cfg, tables);
            Row e = value_row(seq, model, "terminal_mean_exact", mean);
            e.x = kind == rmf::SequenceKind::Z ? spec.x_base : spec.y.x_end;
            w.write(e);
            for (double mult : mults) {
                const auto rep = rmf::with_rerun(cfg.trials, [&](std::uint64_t trials) {
                    return rmf::doob_check(spec, cfg, mult * mean, 0.0, trials, tables);
                });
                Row r = report_row(seq, model, "maximal", rep);
                r.x = e.x;
                r.t = mult * mean;
                w.write(r);
            }
            const auto rep = rmf::with_rerun(cfg.trials, [&](std::uint64_t trials) {
                return rmf::doob_check(spec, cfg, 0.0, p, trials, tables);
            });
            Row r = report_row(seq, model, "lp", rep);
            r.x = e.x;
            r.t = p;
            w.write(r);
        }
    }
}

inline void write_steps(RowWriter& w, const std::string& tag, rmf::Model model, std::uint64_t trial,
                        const std::vector<rmf::StepReport>& steps)
{
    for (const auto& s : steps) {
        Row r = report_row(tag, model, s.new_primes ? "step" : "step_fixed", s.report);
        r.trial = trial;
        r.x = s.to;
        w.write(r);
        if (s.new_primes) {
            Row e = value_row(tag, model, "step_exact_mean", s.exact_mean);
            e.trial = trial;
            e.x = s.to;
            w.write(e);
        }
    }
}

inline void run_submartingale_z(const Options& o, RowWriter& w, std::ostream& err)
{
    for (auto model : models_of(o)) {
        const auto cfg = config_of(o, model, 2000, 1);
        const std::uint64_t cap = std::min<std::uint64_t>(10'000, cfg.oracle_cap);
        const auto tables = tables_for(o, cap, err);
        rmf::CounterEngine eng(rmf::derive_seed(cfg.seed_base, 0x2A, 0));
        for (std::uint64_t k = 0; k < o.windows; ++k) {
            // A random x_base, a prime p in (sqrt(x_base), x_base], and a window around p^2.
            const std::uint64_t x_base = 100 + eng() % (cap - 99);
            const std::uint64_t root = rmf::isqrt(x_base);
            std::uint64_t p = root + 1 + eng() % (x_base - root);
            while (p <= x_base && !tables.is_prime(p))
                ++p;
            if (p > x_base)
                p = tables.primes()[tables.prime_count(root)];
            const auto seed = rmf::derive_seed(cfg.seed_base, 0x2B, k);
            auto steps = rmf::submartingale_check_z(cfg, x_base, p * p - 3, p * p + 2, seed, cfg.trials, tables);
            if (std::any_of(steps.begin(), steps.end(), [](const auto& s) { return s.report.violated; }))
                steps = rmf::submartingale_check_z(cfg, x_base, p * p - 3, p * p + 2, seed, 4 * cfg.trials, tables);
            for (auto& s : steps) {
                Row r = report_row("submartingale-z", model, s.new_primes ? "step" : "step_fixed", s.report);
                r.trial = k;
                r.x = x_base;
                r.t = static_cast<double>(s.to);
                w.write(r);
                if (s.new_primes) {
                    Row e = value_row("submartingale-z", model, "step_exact_mean", s.exact_mean);
                    e.trial = k;
                    e.x = x_base;
                    e.t = static_cast<double>(s.to);
                    w.write(e);
                }
            }
        }
    }
}

inline void run_submartingale_y(const Options& o, RowWriter& w, std::ostream& err)
{
    const std::uint64_t seeds = o.seeds.value_or(10);
    const auto tables = tables_for(o, o.x_end, err);
    for (auto model : models_of(o)) {
        const auto cfg = config_of(o, model, 2000, 1);
        const auto spec = sequence_of(o, rmf::SequenceKind::Y).y;
        for (std::uint64_t s = 0; s < seeds; ++s) {
            const auto seed = rmf::derive_seed(cfg.seed_base, 0x59, s);
            auto steps = rmf::submartingale_check_y(cfg, spec, seed, cfg.trials, tables);
            if (std::any_of(steps.begin(), steps.end(), [](const auto& st) { return st.report.violated; }))
                steps = rmf::submartingale_check_y(cfg, spec, seed, 4 * cfg.trials, tables);
            for (auto& st : steps) {
                Row r = report_row("submartingale-y", model, st.new_primes ? "step" : "step_fixed", st.report);
                r.trial = s;
                r.x = st.to;
                r.ell = spec.ell;
                w.write(r);
                if (st.new_primes) {
                    Row e = value_row("submartingale-y", model, "step_exact_mean", st.exact_mean);
                    e.trial = s;
                    e.x = st.to;
                    e.ell = spec.ell;
                    w.write(e);
                }
            }
        }
    }
}

inline void run_moments(const Options& o, RowWriter& w, std::ostream& err)
{
    if (o.suite == "hypercontractive")
        run_hypercontractive(o, w, err);
    else if (o.suite == "hoeffding")
        run_hoeffding(o, w, err);
    else if (o.suite == "doob")
        run_doob(o, w, err);
    else if (o.suite == "submartingale-z")
        run_submartingale_z(o, w, err);
    else if (o.suite == "submartingale-y")
        run_submartingale_y(o, w, err);
    else
        throw rmf::InvalidArgument("unknown suite '" + o.suite + "'");
}

inline void run_parseval(const Options& o, RowWriter& w)
{
    const double tcut = o.tcut.value_or(2000.0);
    const double tol = o.quad_tol.value_or(1e-9);
    rmf::CounterEngine eng(rmf::derive_seed(o.seed, 0xA0, 0));
    for (std::uint64_t k = 0; k <= o.sequences; ++k) {
        // Sequence 0 is a = (1) at sigma = 1/2, where both sides equal 1.
        std::vector<rmf::Complex> a{1.0};
        double sigma = 0.5;
        if (k > 0) {
            a.resize(1 + eng() % 20);
            for (auto& c : a)
                c = {2.0 * rmf::to_unit(eng()) - 1.0, 2.0 * rmf::to_unit(eng()) - 1.0};
            sigma = 0.3 + 1.7 * rmf::to_unit(eng());
        }
        const auto r = rmf::parseval_identity_check(a, sigma, tcut, tol);
        auto put = [&](const std::string& stat, double v, std::optional<double> bound, std::optional<bool> bad) {
            Row row;
            row.experiment = "parseval";
            row.trial = k;
            row.x = a.size();
            row.t = sigma;
            row.stat = stat;
            row.estimate = v;
            row.bound = bound;
            row.violated = bad;
            w.write(row);
        };
        put("lhs", r.lhs, {}, {});
        put("rhs", r.rhs, {}, {});
        put("abs_diff", std::abs(r.lhs - r.rhs), r.combined_bound(), !r.agrees());
    }
}

inline void run_product_expectation(const Options& o, RowWriter& w, std::ostream& err)
{
    const auto xs = o.x_values.empty() ? std::vector<std::uint64_t>{10, 100, 1000} : o.x_values;
    const auto ts = o.t_values.empty() ? std::vector<double>{0.0, 0.5, 2.0} : o.t_values;
    const auto tables = tables_for(o, *std::max_element(xs.begin(), xs.end()), err);
    for (auto model : models_of(o)) {
        const auto cfg = config_of(o, model, 10'000, 1);
        for (auto x : xs) {
            std::vector<rmf::MomentReport> reps;
            for (double t : ts) {
                auto rep = rmf::expected_product_identity_check(0, x, t, model, cfg.trials, cfg.seed_base, tables);
                if (rep.violated)
                    rep = rmf::expected_product_identity_check(0, x, t, model, 4 * cfg.trials, cfg.seed_base, tables);
                Row r = report_row("product-expectation", model, "mean", rep);
                r.x = x;
                r.t = t;
                w.write(r);
                reps.push_back(rep);
            }
            // t-independence: pairwise differences against their joint standard error.
            for (std::size_t i = 1; i < reps.size(); ++i) {
                const double d = reps[i].estimate - reps[0].estimate;
                const double se = std::hypot(reps[i].std_error, reps[0].std_error);
                Row r = value_row("product-expectation", model, "t_difference", d);
                r.x = x;
                r.t = ts[i];
                r.std_error = se;
                r.bound = 0.0;
                r.violated = std::abs(d) > 3.0 * se;
                w.write(r);
            }
        }
    }
}

inline void run_sigma_event(const Options& o, RowWriter& w, std::ostream& err)
{
    const auto tables = tables_for(o, o.x_prev, err);
    for (auto model : models_of(o)) {
        const auto cfg = config_of(o, model, 200, 1);
        const auto s = rmf::sigma_event_statistic(cfg, o.x_prev, cfg.trials, tables);
        auto put = [&](const std::string& stat, double v, std::optional<double> se = {},
                       std::optional<double> bound = {}) {
            Row r = value_row("sigma-event", model, stat, v);
            r.x = o.x_prev;
            r.t = cfg.T_param;
            r.std_error = se;
            r.bound = bound;
            w.write(r);
        };
        put("threshold", s.threshold);
        put("integral_q05", s.integral.q05);
        put("integral_q25", s.integral.q25);
        put("integral_median", s.integral.q50);
        put("integral_q75", s.integral.q75);
        put("integral_q95", s.integral.q95);
        put("integral_mean", s.integral.mean, s.integral.std_error);
        put("exceed_fraction", s.exceed_fraction, s.exceed_std_error, s.budget);
        put("sqrt_ratio_mean", s.sqrt_ratio_mean, s.sqrt_ratio_std_error);
    }
}

inline void run_euler(const Options& o, RowWriter& w, std::ostream& err)
{
    if (o.check == "parseval")
        run_parseval(o, w);
    else if (o.check == "product-expectation")
        run_product_expectation(o, w, err);
    else if (o.check == "sigma-event")
        run_sigma_event(o, w, err);
    else
        throw rmf::InvalidArgument("unknown check '" + o.check + "'");
}

inline void run_variance(const Options& o, RowWriter& w, std::ostream& err)
{
    const std::uint64_t x_max = o.x_max.value_or(100'000);
    std::vector<std::uint64_t> pts = o.points;
    if (pts.empty()) {
        pts.push_back(10);
        for (std::uint64_t x = 1000; x <= x_max; x *= 10)
            pts.push_back(x);
    }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    const auto tables = tables_for(o, x_max, err);
    for (auto model : models_of(o)) {
        const auto cfg = config_of(o, model, 2000, 100'000);
        const auto res = rmf::variance_ratio_ensemble(cfg, pts, tables);
        for (const auto& p : res) {
            Row r = report_row("variance", model, "mean_v", p.mean_check);
            r.x = p.x;
            w.write(r);
            auto put = [&](const std::string& stat, double v) {
                Row q = value_row("variance", model, stat, v);
                q.x = p.x;
                q.bound = cfg.T_param;
                w.write(q);
            };
            put("ratio_q05", p.ratio.q05);
            put("ratio_median", p.ratio.q50);
            put("ratio_q95", p.ratio.q95);
        }
        // Direction of the median ratio from the first to the last report point.
        Row t = value_row("variance", model, "ratio_median_trend", res.back().ratio.q50 - res.front().ratio.q50);
        t.x = res.back().x;
        w.write(t);
    }
}

// ---------------------------------------------------------------------------
// report

/// Splits RFC 4180 CSV text into records.
inline std::vector<std::vector<std::string>> parse_csv(std::istream& is)
{
    std::vector<std::vector<std::string>> out;
    std::vector<std::string> rec;
    std::string field;
    bool quoted = false, any = false;
    char c;
    while (is.get(c)) {
        any = true;
        if (quoted) {
            if (c == '"') {
                if (is.peek() == '"') {
                    field += '"';
                    is.get();
                }
                else {
                    quoted = false;
                }
            }
            else {
                field += c;
            }
        }
        else if (c == '"') {
            quoted = true;
        }
        else if (c == ',') {
            rec.push_back(std::move(field));
            field.clear();
        }
        else if (c == '\r' || c == '\n') {
            if (c == '\r' && is.peek() == '\n')
                is.get();
            rec.push_back(std::move(field));
            field.clear();
            out.push_back(std::move(rec));
            rec.clear();
            any = false;
        }
        else {
            field += c;
        }
    }
    if (any) {
        rec.push_back(std::move(field));
        out.push_back(std::move(rec));
    }
    return out;
}

inline std::string title_of(const std::string& experiment)
{
    static const std::map<std::string, std::string> names{
        {"simulate", "Large-prime partial sums, supremum trend"},
        {"oracle-check", "Large-prime decomposition oracle"},
        {"hypercontractive", "Hypercontractive moment inequality"},
        {"hoeffding", "Conditional Hoeffding tail"},
        {"doob-z", "Doob inequalities, Z sequence"},
        {"doob-y", "Doob inequalities, Y sequence"},
        {"submartingale-z", "Z_k submartingale"},
        {"submartingale-y", "Y submartingale"},
        {"parseval", "Parseval identity"},
        {"product-expectation", "Euler product expectation"},
        {"sigma-event", "Low-moment event"},
        {"variance", "Conditional variance"},
    };
    const auto it = names.find(experiment);
    return it == names.end() ? experiment : it->second;
}

inline bool run_report(const Options& o, std::ostream& out)
{
    require(!o.inputs.empty(), "report: no input files");
    struct Group
    {
        std::uint64_t rows = 0, asserted = 0, violated = 0;
        std::vector<double> values;
    };
    std::map<std::tuple<std::string, std::string, std::string>, Group> groups;
    for (const auto& path : o.inputs) {
        std::ifstream is(path, std::ios::binary);
        if (!is)
            throw rmf::ResourceError("report: cannot open " + path);
        const auto recs = parse_csv(is);
        if (recs.empty() || recs.front() != columns())
            throw rmf::InvalidArgument("report: " + path + " does not carry the rmflab CSV header");
        for (std::size_t i = 1; i < recs.size(); ++i) {
            const auto& r = recs[i];
            if (r.size() == 1 && r[0].empty())
                continue;
            if (r.size() != columns().size())
                throw rmf::InvalidArgument("report: malformed record " + std::to_string(i) + " in " + path);
            auto& g = groups[{r[0], r[1], r[7]}];
            ++g.rows;
            g.values.push_back(std::strtod(r[8].c_str(), nullptr));
            if (!r[11].empty()) {
                ++g.asserted;
                g.violated += r[11] == "true";
            }
        }
    }
    bool bad = false;
    std::string last;
    char line[256];
    std::snprintf(line, sizeof line, "%-12s %-26s %8s %8s %8s %14s %14s %14s\n", "model", "stat", "rows", "checked",
                  "violated", "min", "median", "max");
    for (const auto& [key, g] : groups) {
        const auto& [exp, model, stat] = key;
        if (exp != last) {
            out << "\n== " << title_of(exp) << " [" << exp << "]\n" << line;
            last = exp;
        }
        const auto [lo, hi] = std::minmax_element(g.values.begin(), g.values.end());
        char buf[256];
        std::snprintf(buf, sizeof buf, "%-12s %-26s %8" PRIu64 " %8" PRIu64 " %8" PRIu64 " %14.6g %14.6g %14.6g\n",
                      model.c_str(), stat.c_str(), g.rows, g.asserted, g.violated, *lo, rmf::median(g.values), *hi);
        out << buf;
        bad = bad || g.violated > 0;
    }
    out << "\n" << (bad ? "VIOLATIONS PRESENT" : "no violations") << "\n";
    return bad;
}

// ---------------------------------------------------------------------------
// Entry point

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    Options o;
    CLI::App app{"rmflab: experiments on random multiplicative functions", "rmflab"};
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("--model", o.model, "rademacher | steinhaus | both")
        ->check(CLI::IsMember({"rademacher", "steinhaus", "both"}));
    app.add_option("--seed", o.seed, "base seed");
    app.add_option("--trials", o.trials, "trials or resamples (per-experiment default when omitted)");
    app.add_option("--threads", o.threads, "worker threads, or 'auto'");
    app.add_option("--epsilon", o.epsilon, "grid exponent, in (0, 1/4)");
    app.add_option("--x-max", o.x_max, "largest x");
    app.add_option("--t-param", o.t_param, "event parameter T >= 1");
    app.add_option("--tcut", o.tcut, "quadrature truncation |t| <= tcut");
    app.add_option("--quad-tol", o.quad_tol, "quadrature relative tolerance");
    app.add_option("--out", o.out, "output file (default: standard output)");
    app.add_option("--format", o.format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--table-cache", o.table_cache, "sieve table cache file (env RMF_TABLE_CACHE)");

    auto* sim = app.add_subcommand("simulate", "per-trial suprema on the test-point grid");
    sim->add_option("--rows", o.rows, "point | trial")->check(CLI::IsMember({"point", "trial"}));
    sim->add_flag("--progress", o.progress, "report progress on standard error");

    auto* orc = app.add_subcommand("oracle-check", "decomposition against brute force for every x <= x-max");
    orc->add_option("--seeds", o.seeds, "number of realizations");

    auto* mom = app.add_subcommand("moments", "Monte Carlo inequality suites");
    mom->add_option("--suite", o.suite, "hypercontractive | hoeffding | doob | submartingale-z | submartingale-y")
        ->required()
        ->check(CLI::IsMember({"hypercontractive", "hoeffding", "doob", "submartingale-z", "submartingale-y"}));
    mom->add_option("--m", o.m_values, "moment orders (hypercontractive)");
    mom->add_option("--n", o.n_values, "support lengths N, a_n = 1 on n <= N (hypercontractive)");
    mom->add_option("--x", o.x_values, "x values (hoeffding)");
    mom->add_option("--seeds", o.seeds, "conditioning seeds (hoeffding, submartingale-y)");
    mom->add_option("--sequence", o.sequence, "z | y (doob)")->check(CLI::IsMember({"z", "y"}));
    mom->add_option("--lambda", o.lambda_mult, "lambda as multiples of E X_n (doob)");
    mom->add_option("--p", o.p_exponent, "L^p exponent (doob)");
    mom->add_option("--x-base", o.x_base, "Z sequence: n <= x_base");
    mom->add_option("--p-max", o.p_max, "Z sequence: largest revealed prime");
    mom->add_option("--x-prev", o.x_prev_block, "Y sequence: block start X_prev");
    mom->add_option("--x-end", o.x_end, "Y sequence: last grid point");
    mom->add_option("--windows", o.windows, "random windows (submartingale-z)");

    auto* eul = app.add_subcommand("euler", "Euler product and Parseval checks");
    eul->add_option("--check", o.check, "parseval | product-expectation | sigma-event")
        ->required()
        ->check(CLI::IsMember({"parseval", "product-expectation", "sigma-event"}));
    eul->add_option("--x", o.x_values, "truncations x (product-expectation)");
    eul->add_option("--t", o.t_values, "heights t (product-expectation)");
    eul->add_option("--sequences", o.sequences, "random sequences (parseval)");
    eul->add_option("--x-prev", o.x_prev, "truncation X_prev (sigma-event)");

    auto* var = app.add_subcommand("variance", "V(x) sqrt(loglog x)/x distribution and E V(x) oracle");
    var->add_option("--points", o.points, "report points (default 10 and powers of ten from 1000)");

    auto* rep = app.add_subcommand("report", "summarize rmflab CSV files");
    rep->add_option("inputs", o.inputs, "CSV files")->required();

    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    }
    catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    }
    catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    }
    catch (const CLI::ParseError& e) {
        err << "rmflab: error: code=" << kUsage << " kind=usage message=" << e.what() << "\n";
        return kUsage;
    }

    std::ofstream file;
    std::ostream* sink = &out;
    try {
        if (rep->parsed()) {
            std::ostringstream text;
            const bool bad = run_report(o, text);
            if (!o.out.empty()) {
                file.open(o.out, std::ios::binary);
                if (!file)
                    throw rmf::ResourceError("cannot open output file " + o.out);
                sink = &file;
            }
            *sink << text.str();
            return bad ? kViolation : kOk;
        }
        // Validate shared settings before any output is produced.
        (void)models_of(o);
        (void)threads_of(o);
        if (!o.out.empty()) {
            file.open(o.out, std::ios::binary);
            if (!file)
                throw rmf::ResourceError("cannot open output file " + o.out);
            sink = &file;
        }
        // Rows go straight to the sink; a failure mid-run leaves a truncated file and a non-zero exit.
        RowWriter w(*sink, o.format == "json");
        if (sim->parsed())
            run_simulate(o, w, err);
        else if (orc->parsed())
            run_oracle_check(o, w, err);
        else if (mom->parsed())
            run_moments(o, w, err);
        else if (eul->parsed())
            run_euler(o, w, err);
        else if (var->parsed())
            run_variance(o, w, err);
        w.finish();
        if (!*sink)
            throw rmf::ResourceError("write failed");
        return w.any_violated() ? kViolation : kOk;
    }
    catch (const rmf::InvalidArgument& e) {
        err << "rmflab: error: code=" << kUsage << " kind=invalid-argument message=" << e.what() << "\n";
        return kUsage;
    }
    catch (const rmf::QuadratureFailure& e) {
        err << "rmflab: error: code=" << kResource << " kind=quadrature message=" << e.what() << "\n";
        return kResource;
    }
    catch (const rmf::OverflowError& e) {
        err << "rmflab: error: code=" << kResource << " kind=overflow message=" << e.what() << "\n";
        return kResource;
    }
    catch (const rmf::ResourceError& e) {
        err << "rmflab: error: code=" << kResource << " kind=resource message=" << e.what() << "\n";
        return kResource;
    }
    catch (const std::bad_alloc&) {
        err << "rmflab: error: code=" << kResource << " kind=resource message=out of memory\n";
        return kResource;
    }
}

} // namespace rmflab

#endif // RMFLAB_CLI_HPP
