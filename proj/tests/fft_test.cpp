#include "etsmlp/fft.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "test_util.hpp"

namespace {

using etsmlp::test::max_rel_error;
using etsmlp::test::random_vector;
using C = std::complex<double>;

std::vector<C> naive_dft(const std::vector<C>& v) {
    const std::size_t n = v.size();
    std::vector<C> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        C acc{};
        for (std::size_t t = 0; t < n; ++t) {
            acc += v[t] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * t % n) / n);
        }
        out[k] = acc;
    }
    return out;
}

// Backward smoothing y_t = (1 - l) x_t + l y_{t+1}, independent of any kernel code.
std::vector<double> backward_recursion(const std::vector<double>& x, double l) {
    std::vector<double> y(x.size());
    double next = 0.0;
    for (std::size_t i = x.size(); i-- > 0;) {
        next = (1.0 - l) * x[i] + l * next;
        y[i] = next;
    }
    return y;
}

TEST(Fft, ImpulseAndConstant) {
    const std::vector<C> impulse{1, 0, 0, 0};
    for (const C v : etsmlp::fft<double>(impulse)) {
        EXPECT_NEAR(v.real(), 1.0, 1e-15);
        EXPECT_NEAR(v.imag(), 0.0, 1e-15);
    }
    const std::vector<C> constant(8, C(2.5, 0));
    const auto s = etsmlp::fft<double>(constant);
    EXPECT_NEAR(s[0].real(), 20.0, 1e-13);
    for (std::size_t k = 1; k < s.size(); ++k) EXPECT_NEAR(std::abs(s[k]), 0.0, 1e-13);
}

TEST(Fft, RejectsNonPowerOfTwo) {
    const std::vector<C> v(6);
    EXPECT_THROW(etsmlp::fft<double>(v), std::invalid_argument);
    EXPECT_THROW(etsmlp::FftPlan<float>(12), std::invalid_argument);
}

TEST(Fft, MatchesNaiveDftAndRoundTrips) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    for (const std::size_t n : {1u, 2u, 8u, 64u, 256u}) {
        std::vector<C> v(n);
        for (auto& c : v) c = {nd(rng), nd(rng)};
        const auto fast = etsmlp::fft<double>(v);
        const auto slow = naive_dft(v);
        for (std::size_t k = 0; k < n; ++k) EXPECT_LT(std::abs(fast[k] - slow[k]), 1e-10 * n);
        const auto back = etsmlp::ifft<double>(fast);
        double err = 0.0;
        for (std::size_t k = 0; k < n; ++k) err = std::max(err, std::abs(back[k] - v[k]));
        EXPECT_LT(err, 1e-10);
    }
}

TEST(ConvCausal, IdentityAndDelayKernels) {
    const auto x = random_vector<double>(16, 1);
    std::vector<double> id(16, 0.0), delay(16, 0.0);
    id[0] = 1.0;
    delay[1] = 1.0;
    const auto y = etsmlp::conv_causal<double>(x, id);
    for (std::size_t t = 0; t < x.size(); ++t) EXPECT_NEAR(y[t], x[t], 1e-14);
    const auto d = etsmlp::conv_causal<double>(x, delay);
    EXPECT_NEAR(d[0], 0.0, 1e-14);
    for (std::size_t t = 1; t < x.size(); ++t) EXPECT_NEAR(d[t], x[t - 1], 1e-14);
}

TEST(ConvCausal, LengthMismatchThrows) {
    const std::vector<double> x(4), k(5);
    EXPECT_THROW(etsmlp::conv_causal<double>(x, k), std::invalid_argument);
    EXPECT_THROW(etsmlp::conv_circular_2L<double>(x, k), std::invalid_argument);
}

TEST(ConvCausal, MatchesDirectSumAcrossLengths) {
    for (std::size_t len = 1; len <= 256; len *= 2) {
        for (const std::size_t l : {len, len + 3}) {
            const auto xd = random_vector<double>(l, 10 + l);
            const auto kd = random_vector<double>(l, 20 + l);
            EXPECT_LT(max_rel_error(etsmlp::conv_causal<double>(xd, kd), etsmlp::direct_conv_causal<double>(xd, kd)),
                      1e-12);
            const auto xf = random_vector<float>(l, 30 + l);
            const auto kf = random_vector<float>(l, 40 + l);
            // Reference accumulated in double.
            const std::vector<double> xr(xf.begin(), xf.end()), kr(kf.begin(), kf.end());
            const auto yf = etsmlp::conv_causal<float>(xf, kf);
            EXPECT_LT(max_rel_error(std::vector<double>(yf.begin(), yf.end()),
                                    etsmlp::direct_conv_causal<double>(xr, kr)),
                      1e-6)
                << "L=" << l;
        }
    }
}

TEST(ConvCausal, Linearity) {
    const std::size_t l = 100;
    const auto x1 = random_vector<double>(l, 1), x2 = random_vector<double>(l, 2), k = random_vector<double>(l, 3);
    std::vector<double> mix(l);
    for (std::size_t i = 0; i < l; ++i) mix[i] = 2.0 * x1[i] - 0.5 * x2[i];
    const auto lhs = etsmlp::conv_causal<double>(mix, k);
    const auto y1 = etsmlp::conv_causal<double>(x1, k), y2 = etsmlp::conv_causal<double>(x2, k);
    for (std::size_t i = 0; i < l; ++i) EXPECT_NEAR(lhs[i], 2.0 * y1[i] - 0.5 * y2[i], 1e-12);
}

TEST(ConvTwoSided, ZeroBackwardReducesToCausal) {
    const std::size_t l = 37;
    const auto x = random_vector<double>(l, 5);
    const auto k = random_vector<double>(l, 6);
    std::vector<double> k2(2 * l, 0.0);
    std::copy(k.begin(), k.end(), k2.begin());
    EXPECT_LT(max_rel_error(etsmlp::conv_circular_2L<double>(x, k2), etsmlp::conv_causal<double>(x, k)), 1e-12);
}

TEST(ConvTwoSided, BackwardOnlyMatchesBackwardRecursion) {
    const std::size_t l = 4;
    const double lam = 0.5;
    const std::vector<double> x{1.0, -2.0, 0.5, 3.0};
    std::vector<double> k2(2 * l, 0.0);
    for (std::size_t o = 0; o < l; ++o) k2[2 * l - 1 - o] = std::pow(lam, static_cast<double>(o)) * (1.0 - lam);
    const auto y = etsmlp::conv_circular_2L<double>(x, k2);
    const auto ref = backward_recursion(x, lam);
    for (std::size_t t = 0; t < l; ++t) EXPECT_NEAR(y[t], ref[t], 1e-14);
    // y_3 = 0.5 * 3, y_0 = 0.5*1 + 0.25*(-2) + 0.125*0.5 + 0.0625*3
    EXPECT_NEAR(y[3], 1.5, 1e-14);
    EXPECT_NEAR(y[0], 0.25, 1e-14);
}

TEST(ConvTwoSided, SymmetricKernelPreservesPalindromes) {
    const std::size_t l = 9;
    std::vector<double> x(l);
    const auto half = random_vector<double>(5, 8);
    for (std::size_t i = 0; i < l; ++i) x[i] = half[std::min(i, l - 1 - i)];
    std::vector<double> k2(2 * l);
    for (std::size_t j = 0; j < l; ++j) {
        const double tap = std::pow(0.7, static_cast<double>(j)) * 0.3;
        k2[j] = tap;
        k2[2 * l - 1 - j] = tap;
    }
    const auto y = etsmlp::conv_circular_2L<double>(x, k2);
    for (std::size_t i = 0; i < l; ++i) EXPECT_NEAR(y[i], y[l - 1 - i], 1e-13);
}

double time_conv(std::size_t l, int reps) {
    const auto x = random_vector<float>(l, 1);
    const auto k = random_vector<float>(l, 2);
    double best = 1e300;
    for (int trial = 0; trial < 5; ++trial) {
        const auto start = std::chrono::steady_clock::now();
        float sink = 0.0f;
        for (int r = 0; r < reps; ++r) sink += etsmlp::conv_causal<float>(x, k)[l / 2];
        const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        best = std::min(best, dt / reps);
        EXPECT_TRUE(std::isfinite(sink));
    }
    return best;
}

TEST(ConvCausal, ScalesNearLinearithmically) {
    (void)time_conv(1024, 20);
    const double small = time_conv(1024, 200);
    const double large = time_conv(8192, 25);
    RecordProperty("ratio", std::to_string(large / small));
    EXPECT_LT(large / small, 12.0) << "t(8192)=" << large << " t(1024)=" << small;
}

}  // namespace
