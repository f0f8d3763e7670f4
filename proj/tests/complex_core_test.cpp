#include "etsmlp/complex_core.hpp"

#include <gtest/gtest.h>

#include <array>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cmath>
#include <numbers>

namespace {

using etsmlp::Complex;
using HiFloat = boost::multiprecision::cpp_bin_float_50;

// Independent 50-digit evaluators.
std::pair<double, double> hi_exp(double re, double im) {
    const HiFloat m = boost::multiprecision::exp(HiFloat(re));
    return {static_cast<double>(m * boost::multiprecision::cos(HiFloat(im))),
            static_cast<double>(m * boost::multiprecision::sin(HiFloat(im)))};
}

std::pair<HiFloat, HiFloat> hi_log(const HiFloat& re, const HiFloat& im) {
    const HiFloat mag = boost::multiprecision::sqrt(re * re + im * im);
    return {boost::multiprecision::log(mag), boost::multiprecision::atan2(im, re)};
}

TEST(ComplexCore, ExpTrivialPoints) {
    const Complex one = etsmlp::cexp({0.0, 0.0});
    EXPECT_DOUBLE_EQ(one.real(), 1.0);
    EXPECT_DOUBLE_EQ(one.imag(), 0.0);
    const Complex minus_one = etsmlp::cexp({0.0, std::numbers::pi});
    EXPECT_NEAR(minus_one.real(), -1.0, 1e-15);
    EXPECT_NEAR(minus_one.imag(), 0.0, 1e-15);
}

TEST(ComplexCore, ExpMatchesHighPrecision) {
    const auto [re, im] = hi_exp(-0.3665, 3.1416);
    const Complex z = etsmlp::cexp({-0.3665, 3.1416});
    EXPECT_NEAR(z.real(), re, 1e-15);
    EXPECT_NEAR(z.imag(), im, 1e-15);
}

TEST(ComplexCore, LogPrincipalBranch) {
    EXPECT_EQ(etsmlp::clog({1.0, 0.0}), Complex(0.0, 0.0));
    const Complex l = etsmlp::clog({-1.0, 0.0});
    EXPECT_DOUBLE_EQ(l.real(), 0.0);
    EXPECT_DOUBLE_EQ(l.imag(), std::numbers::pi);
    const auto [re, im] = hi_log(HiFloat("0.5"), HiFloat(0));
    const Complex h = etsmlp::clog({0.5, 0.0});
    EXPECT_NEAR(h.real(), static_cast<double>(re), 1e-16);
    EXPECT_NEAR(h.real(), -0.6931471805599453, 1e-16);
    EXPECT_EQ(h.imag(), static_cast<double>(im));
    EXPECT_THROW(etsmlp::clog({0.0, 0.0}), std::domain_error);
}

TEST(ComplexCore, PrimeOfHalf) {
    const auto [l1re, l1im] = hi_log(HiFloat("0.5"), HiFloat(0));
    const auto [re, im] = hi_log(l1re, l1im);
    const Complex lp = etsmlp::prime_from_lambda({0.5, 0.0});
    EXPECT_NEAR(lp.real(), static_cast<double>(re), 1e-15);
    EXPECT_NEAR(lp.real(), -0.3665129205816643, 1e-15);
    EXPECT_NEAR(lp.imag(), static_cast<double>(im), 1e-15);
    EXPECT_NEAR(lp.imag(), std::numbers::pi, 1e-15);
    const Complex back = etsmlp::lambda_from_prime(lp);
    EXPECT_NEAR(back.real(), 0.5, 1e-15);
    EXPECT_NEAR(back.imag(), 0.0, 1e-15);
}

TEST(ComplexCore, PrimeAtOriginLeavesUnitDisc) {
    const Complex l = etsmlp::lambda_from_prime({0.0, 0.0});
    EXPECT_NEAR(l.real(), std::numbers::e, 1e-15);
    EXPECT_GT(std::abs(l), 1.0);
}

TEST(ComplexCore, PrimeDomainErrors) {
    EXPECT_THROW(etsmlp::prime_from_lambda({0.0, 0.0}), std::domain_error);
    EXPECT_THROW(etsmlp::prime_from_lambda({1.0, 0.0}), std::domain_error);
    EXPECT_THROW(etsmlp::prime_from_lambda({0.6, 0.9}), std::domain_error);
}

TEST(ComplexCore, RoundTripProperty) {
    etsmlp::RandomSource rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    int checked = 0;
    while (checked < 20000) {
        const Complex lambda{u(rng), u(rng)};
        const double r = std::abs(lambda);
        if (r >= 0.999 || r < 1e-3) continue;
        const Complex back = etsmlp::lambda_from_prime(etsmlp::prime_from_lambda(lambda));
        ASSERT_LT(std::abs(back - lambda), 1e-10) << lambda;
        ++checked;
    }
    for (int i = 0; i < 1000; ++i) {
        const Complex lambda = std::polar(0.5, 2.0 * std::numbers::pi * i / 1000.0 - std::numbers::pi + 1e-9);
        const Complex back = etsmlp::lambda_from_prime(etsmlp::prime_from_lambda(lambda));
        ASSERT_LT(std::abs(back - lambda), 1e-12);
    }
}

TEST(ComplexCore, ConstrainExamples) {
    EXPECT_EQ(etsmlp::constrain({0.5, 0.0}, 0.9999), Complex(0.5, 0.0));
    const Complex c = etsmlp::constrain({3.0, 4.0}, 0.9999);
    EXPECT_NEAR(c.real(), 0.59994, 1e-12);
    EXPECT_NEAR(c.imag(), 0.79992, 1e-12);
}

TEST(ComplexCore, ConstrainProperties) {
    etsmlp::RandomSource rng(11);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    std::uniform_real_distribution<double> m(0.05, 0.9999);
    for (int i = 0; i < 20000; ++i) {
        const Complex z{u(rng), u(rng)};
        const double max_lambda = m(rng);
        const Complex c = etsmlp::constrain(z, max_lambda);
        ASSERT_LE(std::abs(c), max_lambda * (1.0 + 1e-15));
        ASSERT_NEAR(std::arg(c), std::arg(z), 1e-12);
        const Complex cc = etsmlp::constrain(c, max_lambda);
        ASSERT_LT(std::abs(cc - c), 1e-15);
    }
}

TEST(ComplexCore, ConstrainBackwardMatchesFiniteDifferences) {
    // Loss = Re(w * conj(constrain(z))) for a fixed w; gradient w.r.t. (re, im).
    const double max_lambda = 0.9;
    const Complex w{0.3, -1.7};
    auto loss = [&](Complex z) {
        const Complex c = etsmlp::constrain(z, max_lambda);
        return w.real() * c.real() + w.imag() * c.imag();
    };
    for (const Complex z : {Complex(0.2, 0.4), Complex(1.5, -0.8), Complex(-0.3, 2.0)}) {
        const Complex g = etsmlp::constrain_backward(z, max_lambda, w);
        const double h = 1e-6;
        const double gre = (loss(z + Complex(h, 0)) - loss(z - Complex(h, 0))) / (2 * h);
        const double gim = (loss(z + Complex(0, h)) - loss(z - Complex(0, h))) / (2 * h);
        EXPECT_NEAR(g.real(), gre, 1e-8);
        EXPECT_NEAR(g.imag(), gim, 1e-8);
    }
}

TEST(ComplexCore, RingRejectsBadSpec) {
    EXPECT_THROW((etsmlp::RingSpec{0.5, 0.2}.validate()), std::invalid_argument);
    EXPECT_THROW((etsmlp::RingSpec{0.0, 0.2}.validate()), std::invalid_argument);
    EXPECT_THROW((etsmlp::RingSpec{0.2, 1.0}.validate()), std::invalid_argument);
    EXPECT_NO_THROW((etsmlp::RingSpec{0.1, 0.9}.validate()));
}

TEST(ComplexCore, RingSamplesAreAreaUniform) {
    const etsmlp::RingSpec spec{0.1, 0.9};
    etsmlp::RandomSource rng(2024);
    constexpr int kSamples = 100000;
    constexpr int kBins = 10;
    std::array<int, kBins> counts{};
    int inner = 0;
    double lo = 1.0, hi = 0.0;
    const double a = spec.r_min * spec.r_min, b = spec.r_max * spec.r_max;
    for (int i = 0; i < kSamples; ++i) {
        const double r = std::abs(etsmlp::sample_ring(spec, rng));
        lo = std::min(lo, r);
        hi = std::max(hi, r);
        if (r <= 0.5) ++inner;
        // Equal-area radial bins.
        const int bin = std::min(kBins - 1, static_cast<int>((r * r - a) / (b - a) * kBins));
        ++counts[bin];
    }
    EXPECT_GE(lo, 0.1 - 1e-12);
    EXPECT_LE(hi, 0.9 + 1e-12);
    EXPECT_NEAR(static_cast<double>(inner) / kSamples, 0.30, 0.01);
    double chi2 = 0.0;
    const double expected = static_cast<double>(kSamples) / kBins;
    for (const int c : counts) chi2 += (c - expected) * (c - expected) / expected;
    // 9 degrees of freedom, p = 0.001 critical value.
    EXPECT_LT(chi2, 27.88);
}

}  // namespace
