#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace sparsist {

using Index = Eigen::Index;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using VectorXd = Vector<double>;
using MatrixXd = Matrix<double>;

/// Sorted, duplicate-free set of coordinates.
using Support = std::vector<Index>;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "Error"; }
};

#define SPARSIST_DEFINE_ERROR(Name)                                            \
    class Name : public Error {                                                \
    public:                                                                    \
        explicit Name(const std::string& what) : Error(#Name ": " + what) {}   \
        const char* kind() const noexcept override { return #Name; }           \
    }

/// Parameter is outside the loss domain; callers shrink their step.
SPARSIST_DEFINE_ERROR(DomainViolation);
SPARSIST_DEFINE_ERROR(InvalidArgument);
SPARSIST_DEFINE_ERROR(DegenerateSpectrum);
SPARSIST_DEFINE_ERROR(IncompatibleCenters);
SPARSIST_DEFINE_ERROR(EmptySupport);
SPARSIST_DEFINE_ERROR(SingularRestrictedHessian);
SPARSIST_DEFINE_ERROR(NoFeasibleStart);
SPARSIST_DEFINE_ERROR(PredictorFloorViolation);
SPARSIST_DEFINE_ERROR(NotPD);
SPARSIST_DEFINE_ERROR(TOutOfRange);

#undef SPARSIST_DEFINE_ERROR

// ---------------------------------------------------------------------------
// Index-set helpers
// ---------------------------------------------------------------------------

template <typename Derived>
Support support_of(const Eigen::MatrixBase<Derived>& v)
{
    Support s;
    for (Index i = 0; i < v.size(); ++i)
        if (v(i) != 0) s.push_back(i);
    return s;
}

inline Support complement(const Support& s, Index p)
{
    Support c;
    c.reserve(static_cast<std::size_t>(std::max<Index>(0, p - Index(s.size()))));
    std::size_t k = 0;
    for (Index i = 0; i < p; ++i) {
        if (k < s.size() && s[k] == i) {
            ++k;
            continue;
        }
        c.push_back(i);
    }
    return c;
}

/// Elementwise sign in {-1, 0, 1}.
template <typename Derived>
Vector<typename Derived::Scalar> sign_of(const Eigen::MatrixBase<Derived>& v)
{
    using Scalar = typename Derived::Scalar;
    return v.unaryExpr([](Scalar x) {
        return x > 0 ? Scalar(1) : (x < 0 ? Scalar(-1) : Scalar(0));
    });
}

/// Zero-padding map: places `v_s` on the coordinates `s` of a length-`p` vector.
template <typename Derived>
Vector<typename Derived::Scalar> zero_pad(const Eigen::MatrixBase<Derived>& v_s, const Support& s, Index p)
{
    Vector<typename Derived::Scalar> out = Vector<typename Derived::Scalar>::Zero(p);
    for (std::size_t k = 0; k < s.size(); ++k) out(s[k]) = v_s(Index(k));
    return out;
}

template <typename Scalar>
inline Scalar soft_threshold(Scalar x, Scalar t)
{
    using std::abs;
    const Scalar m = abs(x) - t;
    if (m <= Scalar(0)) return Scalar(0);
    return x > 0 ? m : -m;
}

template <typename Scalar>
constexpr Scalar infinity() { return std::numeric_limits<Scalar>::infinity(); }

/// Counter-based seed mixing (splitmix64 finalizer applied over the inputs).
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b)
{
    std::uint64_t z = a + 0x9E3779B97F4A7C15ull * (b + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

} // namespace sparsist
