#ifndef RMF_QUADRATURE_HPP
#define RMF_QUADRATURE_HPP

// Panelled adaptive Simpson quadrature for vector-valued integrands.
//
// The interval is cut into panels of fixed width; each panel is refined
// recursively until every component meets its share of the absolute
// tolerance. Error estimates are the usual |S2 - S1| / 15 Richardson terms.

#include "rmf/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <type_traits>
#include <vector>

namespace rmf
{

struct QuadratureOptions
{
    double rel_tol = 1e-6;
    double abs_tol = 1e-12;
    double panel_width = 0.25;
    int max_depth = 30;
    std::size_t max_evaluations = 20'000'000;
};

struct QuadratureResult
{
    std::vector<double> value;
    std::vector<double> error;
    std::size_t evaluations = 0;
    bool converged = true;
};

namespace detail
{

template <class F>
class SimpsonRunner
{
  public:
    SimpsonRunner(F& f, std::size_t dim, const QuadratureOptions& opt) : f_(f), dim_(dim), opt_(opt)
    {
        result_.value.assign(dim, 0.0);
        result_.error.assign(dim, 0.0);
    }

    std::vector<double> eval(double t)
    {
        std::vector<double> out(dim_, 0.0);
        f_(t, std::span<double>(out));
        ++result_.evaluations;
        return out;
    }

    static std::vector<double> simpson(double a, double b, const std::vector<double>& fa,
                                       const std::vector<double>& fm, const std::vector<double>& fb)
    {
        std::vector<double> s(fa.size());
        const double h = (b - a) / 6.0;
        for (std::size_t j = 0; j < s.size(); ++j)
            s[j] = h * (fa[j] + 4.0 * fm[j] + fb[j]);
        return s;
    }

    void refine(double a, double b, const std::vector<double>& fa, const std::vector<double>& fm,
                const std::vector<double>& fb, const std::vector<double>& whole, const std::vector<double>& tol,
                int depth)
    {
        const double m = 0.5 * (a + b);
        const auto flm = eval(0.5 * (a + m));
        const auto frm = eval(0.5 * (m + b));
        const auto left = simpson(a, m, fa, flm, fm);
        const auto right = simpson(m, b, fm, frm, fb);
        bool ok = true;
        for (std::size_t j = 0; j < dim_; ++j)
            if (std::abs(left[j] + right[j] - whole[j]) > 15.0 * tol[j])
                ok = false;
        const bool exhausted = depth >= opt_.max_depth || result_.evaluations >= opt_.max_evaluations;
        if (ok || exhausted) {
            if (!ok)
                result_.converged = false;
            for (std::size_t j = 0; j < dim_; ++j) {
                const double delta = left[j] + right[j] - whole[j];
                result_.value[j] += left[j] + right[j] + delta / 15.0;
                result_.error[j] += std::abs(delta) / 15.0;
            }
            return;
        }
        std::vector<double> half(tol);
        for (auto& h : half)
            h *= 0.5;
        refine(a, m, fa, flm, fm, left, half, depth + 1);
        refine(m, b, fm, frm, fb, right, half, depth + 1);
    }

    QuadratureResult run(double a, double b)
    {
        const double len = b - a;
        const auto panels = static_cast<std::size_t>(std::max(1.0, std::ceil(len / opt_.panel_width)));
        const double w = len / static_cast<double>(panels);

        // Coarse pass fixes the tolerance scale of every component.
        std::vector<std::vector<double>> nodes(2 * panels + 1);
        for (std::size_t k = 0; k <= 2 * panels; ++k)
            nodes[k] = eval(a + 0.5 * w * static_cast<double>(k));
        std::vector<double> scale(dim_, 0.0);
        for (std::size_t i = 0; i < panels; ++i) {
            const auto s = simpson(a + w * i, a + w * (i + 1), nodes[2 * i], nodes[2 * i + 1], nodes[2 * i + 2]);
            for (std::size_t j = 0; j < dim_; ++j)
                scale[j] += std::abs(s[j]);
        }
        std::vector<double> tol(dim_);
        for (std::size_t j = 0; j < dim_; ++j)
            tol[j] = std::max(opt_.rel_tol * scale[j], opt_.abs_tol) / static_cast<double>(panels);

        for (std::size_t i = 0; i < panels; ++i) {
            const double pa = a + w * static_cast<double>(i);
            const double pb = i + 1 == panels ? b : pa + w;
            const auto whole = simpson(pa, pb, nodes[2 * i], nodes[2 * i + 1], nodes[2 * i + 2]);
            refine(pa, pb, nodes[2 * i], nodes[2 * i + 1], nodes[2 * i + 2], whole, tol, 1);
        }
        return std::move(result_);
    }

  private:
    F& f_;
    std::size_t dim_;
    const QuadratureOptions& opt_;
    QuadratureResult result_;
};

} // namespace detail

/// Integrates f over [a, b]; f(t, out) writes dim values into out.
template <class F>
QuadratureResult integrate_simpson(F&& f, std::size_t dim, double a, double b, const QuadratureOptions& opt = {})
{
    require(dim >= 1, "integrate_simpson: dim must be positive");
    require(std::isfinite(a) && std::isfinite(b) && a <= b, "integrate_simpson: need finite a <= b");
    require(opt.rel_tol > 0.0 && opt.panel_width > 0.0, "integrate_simpson: tolerances must be positive");
    if (a == b)
        return {std::vector<double>(dim, 0.0), std::vector<double>(dim, 0.0), 0, true};
    detail::SimpsonRunner<std::remove_reference_t<F>> runner(f, dim, opt);
    return runner.run(a, b);
}

/// Scalar convenience wrapper.
template <class F>
QuadratureResult integrate_simpson_scalar(F&& f, double a, double b, const QuadratureOptions& opt = {})
{
    auto g = [&f](double t, std::span<double> out) { out[0] = f(t); };
    return integrate_simpson(g, 1, a, b, opt);
}

} // namespace rmf

#endif // RMF_QUADRATURE_HPP
