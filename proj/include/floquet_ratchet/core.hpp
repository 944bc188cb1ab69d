#pragma once

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#if defined(__SSE__) || defined(_M_X64)
#include <xmmintrin.h>
#define RATCHET_HAS_MXCSR 1
#endif

namespace ratchet {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

inline constexpr double two_pi = 2.0 * std::numbers::pi;
inline constexpr cplx I_unit{0.0, 1.0};

/* Error hierarchy. ValidationError is a caller mistake, everything derived
   from NumericalError is a failure of the computation itself. */
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class SizeMismatch : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

class NonFinite : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class EigenFailure : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class BracketFailure : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class ZeroNorm : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class TooShort : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class DegenerateIntermediate : public NumericalError {
public:
    using NumericalError::NumericalError;
};

inline void require(bool cond, const std::string& what)
{
    if (!cond) throw ValidationError(what);
}

// Scoped flush-to-zero / denormals-are-zero on the calling thread.
class DenormalGuard {
public:
    DenormalGuard()
    {
#ifdef RATCHET_HAS_MXCSR
        saved_ = _mm_getcsr();
        _mm_setcsr(saved_ | 0x8040u);
#endif
    }
    ~DenormalGuard()
    {
#ifdef RATCHET_HAS_MXCSR
        _mm_setcsr(saved_);
#endif
    }
    DenormalGuard(const DenormalGuard&) = delete;
    DenormalGuard& operator=(const DenormalGuard&) = delete;

private:
    unsigned saved_ = 0;
};

template <class Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m)
{
    return m.allFinite();
}

}  // namespace ratchet
