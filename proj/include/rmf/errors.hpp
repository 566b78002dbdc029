#ifndef RMF_ERRORS_HPP
#define RMF_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace rmf
{

struct InvalidArgument : std::invalid_argument
{
    using std::invalid_argument::invalid_argument;
};

/// Arithmetic result does not fit its integer type.
struct OverflowError : std::overflow_error
{
    using std::overflow_error::overflow_error;
};

/// Allocation failure or a request above the memory budget.
struct ResourceError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what)
{
    if (!cond)
        throw InvalidArgument(what);
}

} // namespace rmf

#endif // RMF_ERRORS_HPP
