#ifndef RMF_SUMMATION_HPP
#define RMF_SUMMATION_HPP

#include <cmath>
#include <complex>

namespace rmf
{

using Complex = std::complex<double>;

/// Neumaier-compensated running sum. Integer-valued inputs stay exact below 2^53.
class CompensatedSum
{
  public:
    void add(double v) noexcept
    {
        const double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v))
            comp_ += (sum_ - t) + v;
        else
            comp_ += (v - t) + sum_;
        sum_ = t;
    }

    CompensatedSum& operator+=(double v) noexcept
    {
        add(v);
        return *this;
    }

    [[nodiscard]] double value() const noexcept { return sum_ + comp_; }

  private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

class CompensatedComplexSum
{
  public:
    void add(Complex v) noexcept
    {
        re_.add(v.real());
        im_.add(v.imag());
    }

    CompensatedComplexSum& operator+=(Complex v) noexcept
    {
        add(v);
        return *this;
    }

    [[nodiscard]] Complex value() const noexcept { return {re_.value(), im_.value()}; }

  private:
    CompensatedSum re_;
    CompensatedSum im_;
};

} // namespace rmf

#endif // RMF_SUMMATION_HPP
