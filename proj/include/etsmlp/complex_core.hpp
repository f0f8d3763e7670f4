#ifndef ETSMLP_COMPLEX_CORE_HPP
#define ETSMLP_COMPLEX_CORE_HPP

// Complex scalar helpers for the smoothing-factor parameterization.
//
// The trained quantity is lp = log(log(lambda)); the smoothing factor is
// recovered forward as lambda = exp(exp(lp)). All routines here are pure and
// operate in double precision.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <stdexcept>

namespace etsmlp {

using Complex = std::complex<double>;

/// Random source used everywhere randomness is consumed.
using RandomSource = std::mt19937_64;

inline Complex cexp(Complex z) {
    const double m = std::exp(z.real());
    return {m * std::cos(z.imag()), m * std::sin(z.imag())};
}

/// Principal-branch logarithm, imaginary part in (-pi, pi].
inline Complex clog(Complex z) {
    if (z.real() == 0.0 && z.imag() == 0.0) {
        throw std::domain_error("clog: logarithm of zero");
    }
    return {std::log(std::abs(z)), std::atan2(z.imag(), z.real())};
}

inline Complex lambda_from_prime(Complex lp) { return cexp(cexp(lp)); }

inline Complex prime_from_lambda(Complex lambda) {
    const double r = std::abs(lambda);
    if (r == 0.0) {
        throw std::domain_error("prime_from_lambda: lambda is zero");
    }
    if (r >= 1.0) {
        throw std::domain_error("prime_from_lambda: |lambda| must be < 1");
    }
    return clog(clog(lambda));
}

/// Radial projection onto the disc of radius max_lambda.
inline Complex constrain(Complex lambda, double max_lambda) {
    const double r = std::abs(lambda);
    if (r < max_lambda) return lambda;
    return lambda * (max_lambda / r);
}

/// Pulls a gradient (encoded as re + i*im) back through constrain().
/// On the identity branch the map is the identity; on the scaling branch the
/// Jacobian is (m/r)(I - u u^T) with u = lambda/|lambda|.
inline Complex constrain_backward(Complex lambda, double max_lambda, Complex grad_out) {
    const double r = std::abs(lambda);
    if (r < max_lambda) return grad_out;
    const Complex u = lambda / r;
    const double along = u.real() * grad_out.real() + u.imag() * grad_out.imag();
    return (max_lambda / r) * (grad_out - along * u);
}

struct RingSpec {
    double r_min = 0.1;
    double r_max = 0.9;

    void validate() const {
        if (!(r_min > 0.0 && r_min < 1.0 && r_max > 0.0 && r_max < 1.0 && r_min <= r_max)) {
            throw std::invalid_argument("RingSpec: need 0 < r_min <= r_max < 1");
        }
    }
};

/// Area-uniform sample from the annulus r_min <= |z| <= r_max.
inline Complex sample_ring(const RingSpec& spec, RandomSource& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double a = spec.r_min * spec.r_min;
    const double b = spec.r_max * spec.r_max;
    const double radius = std::clamp(std::sqrt(a + (b - a) * unit(rng)), spec.r_min, spec.r_max);
    const double theta = 2.0 * std::numbers::pi * unit(rng);
    return std::polar(radius, theta);
}

}  // namespace etsmlp

#endif  // ETSMLP_COMPLEX_CORE_HPP
