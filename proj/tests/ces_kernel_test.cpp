#include "etsmlp/ces.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "test_util.hpp"

namespace {

using etsmlp::CesChannelParams;
using etsmlp::CesOptions;
using etsmlp::Complex;
using etsmlp::test::max_rel_error;
using etsmlp::test::random_vector;
using etsmlp::test::rel_diff;

// --- Oracles: direct recursions, no kernels or FFTs involved. ---

Complex oracle_decay(Complex lambda_prime, Complex alpha, double max_lambda) {
    const Complex lambda = std::exp(std::exp(lambda_prime));
    return etsmlp::constrain(std::pow(lambda, alpha), max_lambda);
}

// s_t = (1 - mu) beta x_t + mu s_{t-1}, output Re(s_t) per channel; optional
// anticausal pass with its own mu; plus sigmoid(omega) x_t.
std::vector<double> oracle_ces(const std::vector<double>& x, std::size_t length, const std::vector<CesChannelParams>& ps,
                               bool bidirectional, double max_lambda = 0.9999) {
    const std::size_t ch = ps.size();
    std::vector<double> out(x.size());
    for (std::size_t c = 0; c < ch; ++c) {
        const auto& p = ps[c];
        const Complex mu = oracle_decay(p.lambda_prime_fwd, p.alpha, max_lambda);
        std::complex<long double> s{};
        const std::complex<long double> muq(mu.real(), mu.imag());
        const std::complex<long double> in = (1.0L - muq) * std::complex<long double>(p.beta.real(), p.beta.imag());
        for (std::size_t t = 0; t < length; ++t) {
            s = in * static_cast<long double>(x[t * ch + c]) + muq * s;
            out[t * ch + c] = static_cast<double>(s.real());
        }
        if (bidirectional) {
            const Complex mb = oracle_decay(p.lambda_prime_bwd, p.alpha, max_lambda);
            const std::complex<long double> mbq(mb.real(), mb.imag());
            const std::complex<long double> inb =
                (1.0L - mbq) * std::complex<long double>(p.beta.real(), p.beta.imag());
            std::complex<long double> r{};
            for (std::size_t t = length; t-- > 0;) {
                r = inb * static_cast<long double>(x[t * ch + c]) + mbq * r;
                out[t * ch + c] += static_cast<double>(r.real());
            }
        }
        const double gate = 1.0 / (1.0 + std::exp(-p.omega));
        for (std::size_t t = 0; t < length; ++t) out[t * ch + c] += gate * x[t * ch + c];
    }
    return out;
}

CesChannelParams random_params(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> box(-1.0, 1.0);
    const etsmlp::RingSpec ring{0.1, 0.9};
    CesChannelParams p;
    p.lambda_prime_fwd = etsmlp::prime_from_lambda(etsmlp::sample_ring(ring, rng));
    p.lambda_prime_bwd = etsmlp::prime_from_lambda(etsmlp::sample_ring(ring, rng));
    p.alpha = {0.5 + 0.5 * (box(rng) + 1.0), box(rng)};
    p.beta = {box(rng), box(rng)};
    p.omega = box(rng);
    return p;
}

double& coord(CesChannelParams& p, int i) {
    auto* parts = [&]() -> double* {
        switch (i / 2) {
            case 0: return reinterpret_cast<double*>(&p.lambda_prime_fwd);
            case 1: return reinterpret_cast<double*>(&p.lambda_prime_bwd);
            case 2: return reinterpret_cast<double*>(&p.alpha);
            case 3: return reinterpret_cast<double*>(&p.beta);
            default: return &p.omega;
        }
    }();
    return i / 2 == 4 ? *parts : parts[i % 2];
}

double gcoord(const etsmlp::CesParamGrad& g, int i) { return coord(const_cast<etsmlp::CesParamGrad&>(g), i); }

constexpr int kCoords = 9;

// --- build_kernel ---

TEST(BuildKernel, RealNeutralClosedForm) {
    CesChannelParams p;
    p.lambda_prime_fwd = etsmlp::prime_from_lambda({0.5, 0.0});
    const auto k = etsmlp::build_kernel(p, 4, CesOptions{});
    ASSERT_EQ(k.taps.size(), 4u);
    const double expected[] = {0.5, 0.25, 0.125, 0.0625};
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(k.taps[j], expected[j], 1e-15);
}

TEST(BuildKernel, ComplexLambdaMatchesImpulseRecursion) {
    CesChannelParams p;
    p.lambda_prime_fwd = etsmlp::prime_from_lambda(std::polar(0.8, std::numbers::pi / 4));
    const auto k = etsmlp::build_kernel(p, 8, CesOptions{});
    std::vector<double> impulse(8, 0.0);
    impulse[0] = 1.0;
    p.omega = -1e9;
    const auto ref = oracle_ces(impulse, 8, {p}, false);
    for (int j = 0; j < 8; ++j) EXPECT_NEAR(k.taps[j], ref[j], 1e-14);
    // First tap: Re(1 - lambda).
    EXPECT_NEAR(k.taps[0], 1.0 - 0.8 * std::cos(std::numbers::pi / 4), 1e-14);
}

TEST(BuildKernel, RealFieldFlagGivesRealEtsKernel) {
    CesChannelParams p;
    p.lambda_prime_fwd = {-0.4, 2.5};
    p.alpha = {1.3, 0.7};
    p.beta = {0.9, -0.6};
    CesOptions opt;
    opt.flags.complex_field = false;
    const auto k = etsmlp::build_kernel(p, 32, opt);
    const double lambda = std::exp(-std::exp(-0.4));
    const double mu = std::pow(lambda, 1.3);
    for (std::size_t j = 0; j < 32; ++j) {
        EXPECT_NEAR(k.taps[j], std::pow(mu, static_cast<double>(j)) * (1.0 - mu) * 0.9, 1e-14);
    }
    EXPECT_EQ(k.fwd.value.imag(), 0.0);
}

TEST(BuildKernel, AblationFlagsPinNeutralValues) {
    CesChannelParams p;
    p.lambda_prime_fwd = etsmlp::prime_from_lambda({0.6, 0.2});
    p.alpha = {2.0, 0.3};
    p.beta = {-0.5, 0.4};
    CesOptions no_alpha;
    no_alpha.flags.use_alpha = false;
    CesOptions no_beta;
    no_beta.flags.use_beta = false;
    CesChannelParams neutral_alpha = p;
    neutral_alpha.alpha = {1.0, 0.0};
    CesChannelParams neutral_beta = p;
    neutral_beta.beta = {1.0, 0.0};
    EXPECT_EQ(etsmlp::build_kernel(p, 16, no_alpha).taps, etsmlp::build_kernel(neutral_alpha, 16, {}).taps);
    EXPECT_EQ(etsmlp::build_kernel(p, 16, no_beta).taps, etsmlp::build_kernel(neutral_beta, 16, {}).taps);
    CesOptions off;
    off.flags.mixing = false;
    const auto id = etsmlp::build_kernel(p, 5, off);
    EXPECT_EQ(id.taps, (std::vector<double>{1, 0, 0, 0, 0}));
}

TEST(BuildKernel, ConstraintBoundsDecayAndEnvelope) {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int i = 0; i < 200; ++i) {
        CesChannelParams p;
        p.lambda_prime_fwd = {u(rng), u(rng)};
        p.lambda_prime_bwd = {u(rng), u(rng)};
        p.alpha = {u(rng), u(rng)};
        p.beta = {u(rng), u(rng)};
        CesOptions opt;
        opt.bidirectional = true;
        const auto k = etsmlp::build_kernel(p, 64, opt);
        ASSERT_LE(std::abs(k.fwd.value), opt.max_lambda * (1 + 1e-15));
        ASSERT_LE(std::abs(k.bwd.value), opt.max_lambda * (1 + 1e-15));
        const double r = std::abs(k.fwd.value);
        const double head = std::abs(p.beta) * std::abs(1.0 - k.fwd.value);
        for (std::size_t j = 0; j < 64; ++j) {
            ASSERT_LE(std::abs(k.taps[j]), head * std::pow(r, static_cast<double>(j)) * (1 + 1e-12) + 1e-300);
        }
    }
}

TEST(BuildKernel, BidirectionalLayout) {
    CesChannelParams p;
    p.lambda_prime_fwd = etsmlp::prime_from_lambda({0.5, 0.0});
    p.lambda_prime_bwd = etsmlp::prime_from_lambda({0.25, 0.0});
    CesOptions opt;
    opt.bidirectional = true;
    const auto k = etsmlp::build_kernel(p, 3, opt);
    const std::vector<double> expected{0.5, 0.25, 0.125, 0.75 * 0.0625, 0.75 * 0.25, 0.75};
    ASSERT_EQ(k.taps.size(), 6u);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(k.taps[i], expected[i], 1e-15);
    EXPECT_THROW(etsmlp::build_kernel(p, 0, opt), std::invalid_argument);
}

// --- ces_forward ---

TEST(CesForward, DegenerateKernelIsIdentity) {
    CesChannelParams p;
    p.lambda_prime_fwd = etsmlp::prime_from_lambda({1e-8, 0.0});
    p.omega = -1e4;
    const auto x = random_vector<double>(32, 4);
    const auto o = etsmlp::ces_forward<double>(x, 32, std::vector<CesChannelParams>{p}, CesOptions{});
    for (std::size_t t = 0; t < 32; ++t) EXPECT_NEAR(o[t], x[t], 1e-7 * (1 + std::abs(x[t])));
}

TEST(CesForward, ZeroOmegaHalvesShortcut) {
    std::mt19937_64 rng(5);
    auto p = random_params(rng);
    p.omega = 0.0;
    const auto x = random_vector<double>(20, 6);
    const auto o = etsmlp::ces_forward<double>(x, 20, std::vector<CesChannelParams>{p}, CesOptions{});
    const auto k = etsmlp::build_kernel(p, 20, CesOptions{});
    const auto y = etsmlp::direct_conv_causal<double>(x, k.taps);
    for (std::size_t t = 0; t < 20; ++t) EXPECT_NEAR(o[t], 0.5 * x[t] + y[t], 1e-12);
}

TEST(CesForward, NoOmegaRemovesShortcut) {
    std::mt19937_64 rng(15);
    auto p = random_params(rng);
    CesOptions opt;
    opt.flags.use_omega = false;
    const auto x = random_vector<double>(20, 16);
    const auto o = etsmlp::ces_forward<double>(x, 20, std::vector<CesChannelParams>{p}, opt);
    const auto y = etsmlp::direct_conv_causal<double>(x, etsmlp::build_kernel(p, 20, opt).taps);
    for (std::size_t t = 0; t < 20; ++t) EXPECT_NEAR(o[t], y[t], 1e-12);
}

TEST(CesForward, ShapeMismatchThrows) {
    const std::vector<double> x(12);
    const std::vector<CesChannelParams> ps(2);
    EXPECT_THROW(etsmlp::ces_forward<double>(x, 4, ps, CesOptions{}), std::invalid_argument);
}

TEST(CesForward, MatchesRecursionOracle) {
    std::mt19937_64 rng(17);
    for (const bool bidir : {false, true}) {
        for (int trial = 0; trial < 10; ++trial) {
            const std::size_t len = 64, ch = 3;
            std::vector<CesChannelParams> ps;
            for (std::size_t c = 0; c < ch; ++c) ps.push_back(random_params(rng));
            CesOptions opt;
            opt.bidirectional = bidir;
            const auto x = random_vector<double>(len * ch, 100 + trial);
            const auto ref = oracle_ces(x, len, ps, bidir);
            EXPECT_LT(max_rel_error(etsmlp::ces_forward<double>(x, len, ps, opt), ref), 1e-10);
            const std::vector<float> xf(x.begin(), x.end());
            const auto of = etsmlp::ces_forward<float>(xf, len, ps, opt);
            const std::vector<double> xr(xf.begin(), xf.end());
            EXPECT_LT(max_rel_error(of, oracle_ces(xr, len, ps, bidir)), 1e-5);
        }
    }
}

TEST(CesForward, Causality) {
    std::mt19937_64 rng(21);
    const std::size_t len = 128, ch = 2;
    std::vector<CesChannelParams> ps{random_params(rng), random_params(rng)};
    auto x = random_vector<float>(len * ch, 22);
    const auto base = etsmlp::ces_forward<float>(x, len, ps, CesOptions{});
    const std::size_t t0 = 70;
    x[t0 * ch + 1] += 5.0f;
    const auto moved = etsmlp::ces_forward<float>(x, len, ps, CesOptions{});
    for (std::size_t t = 0; t < t0; ++t) {
        for (std::size_t c = 0; c < ch; ++c) EXPECT_LT(std::abs(moved[t * ch + c] - base[t * ch + c]), 1e-6);
    }
    EXPECT_GT(std::abs(moved[t0 * ch + 1] - base[t0 * ch + 1]), 1e-3);
}

TEST(CesForward, BidirectionalReversalSymmetry) {
    std::mt19937_64 rng(23);
    const std::size_t len = 50, ch = 3;
    std::vector<CesChannelParams> ps, swapped;
    for (std::size_t c = 0; c < ch; ++c) {
        ps.push_back(random_params(rng));
        auto s = ps.back();
        std::swap(s.lambda_prime_fwd, s.lambda_prime_bwd);
        swapped.push_back(s);
    }
    CesOptions opt;
    opt.bidirectional = true;
    const auto x = random_vector<double>(len * ch, 24);
    std::vector<double> xr(x.size());
    for (std::size_t t = 0; t < len; ++t) {
        for (std::size_t c = 0; c < ch; ++c) xr[(len - 1 - t) * ch + c] = x[t * ch + c];
    }
    const auto o = etsmlp::ces_forward<double>(x, len, ps, opt);
    const auto orv = etsmlp::ces_forward<double>(xr, len, swapped, opt);
    std::vector<double> back(o.size());
    for (std::size_t t = 0; t < len; ++t) {
        for (std::size_t c = 0; c < ch; ++c) back[(len - 1 - t) * ch + c] = orv[t * ch + c];
    }
    EXPECT_LT(max_rel_error(back, o), 1e-6);
}

TEST(CesForward, ChannelPermutationEquivariance) {
    std::mt19937_64 rng(25);
    const std::size_t len = 40, ch = 5;
    std::vector<CesChannelParams> ps;
    for (std::size_t c = 0; c < ch; ++c) ps.push_back(random_params(rng));
    const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
    const auto x = random_vector<double>(len * ch, 26);
    std::vector<double> xp(x.size());
    std::vector<CesChannelParams> pp(ch);
    for (std::size_t c = 0; c < ch; ++c) {
        pp[c] = ps[perm[c]];
        for (std::size_t t = 0; t < len; ++t) xp[t * ch + c] = x[t * ch + perm[c]];
    }
    for (const bool bidir : {false, true}) {
        CesOptions opt;
        opt.bidirectional = bidir;
        const auto o = etsmlp::ces_forward<double>(x, len, ps, opt);
        const auto op = etsmlp::ces_forward<double>(xp, len, pp, opt);
        for (std::size_t c = 0; c < ch; ++c) {
            for (std::size_t t = 0; t < len; ++t) EXPECT_NEAR(op[t * ch + c], o[t * ch + perm[c]], 1e-12);
        }
    }
}

TEST(CesForward, ConstrainedLongSequencesStayFinite) {
    // Parameters pushed far outside the disc; the constraint keeps |mu| <= 0.9999.
    std::vector<CesChannelParams> ps(4);
    ps[0].lambda_prime_fwd = {3.0, 0.1};
    ps[1].lambda_prime_fwd = {-8.0, 0.0};
    ps[1].alpha = {-5.0, 2.0};
    ps[2].lambda_prime_fwd = {1.0, 3.1};
    ps[2].beta = {30.0, -10.0};
    ps[3].lambda_prime_fwd = etsmlp::prime_from_lambda({0.99995, 0.0});
    for (auto& p : ps) p.lambda_prime_bwd = p.lambda_prime_fwd;
    const std::size_t len = 16384, ch = 4;
    const auto x = random_vector<float>(len * ch, 31);
    const auto up = random_vector<float>(len * ch, 32);
    for (const bool bidir : {false, true}) {
        CesOptions opt;
        opt.bidirectional = bidir;
        const auto o = etsmlp::ces_forward<float>(x, len, ps, opt);
        EXPECT_TRUE(std::all_of(o.begin(), o.end(), [](float v) { return std::isfinite(v); }));
        const auto g = etsmlp::ces_backward<float>(x, len, ps, up, opt);
        EXPECT_TRUE(std::all_of(g.input_grad.begin(), g.input_grad.end(), [](float v) { return std::isfinite(v); }));
        for (const auto& pg : g.param_grads) {
            for (int i = 0; i < kCoords; ++i) EXPECT_TRUE(std::isfinite(gcoord(pg, i)));
        }
    }
}

// --- ces_backward ---

TEST(CesBackward, ZeroUpstreamGivesZeroGradients) {
    std::mt19937_64 rng(41);
    std::vector<CesChannelParams> ps{random_params(rng), random_params(rng), random_params(rng)};
    const auto x = random_vector<double>(16 * 3, 42);
    const std::vector<double> up(x.size(), 0.0);
    CesOptions opt;
    opt.bidirectional = true;
    const auto g = etsmlp::ces_backward<double>(x, 16, ps, up, opt);
    for (const double v : g.input_grad) EXPECT_EQ(v, 0.0);
    for (const auto& pg : g.param_grads) {
        for (int i = 0; i < kCoords; ++i) EXPECT_EQ(gcoord(pg, i), 0.0);
    }
}

TEST(CesBackward, OmegaGradientClosedForm) {
    std::mt19937_64 rng(43);
    std::vector<CesChannelParams> ps{random_params(rng)};
    const auto x = random_vector<double>(30, 44);
    const auto up = random_vector<double>(30, 45);
    const auto g = etsmlp::ces_backward<double>(x, 30, ps, up, CesOptions{});
    const double s = 1.0 / (1.0 + std::exp(-ps[0].omega));
    double expected = 0.0;
    for (std::size_t t = 0; t < 30; ++t) expected += up[t] * s * (1 - s) * x[t];
    EXPECT_NEAR(g.param_grads[0].omega, expected, 1e-12);
}

struct GradcheckCase {
    bool bidirectional;
    bool kernel_norm;
    bool complex_field;
    bool use_alpha;
    double max_lambda;
};

class CesGradcheck : public ::testing::TestWithParam<GradcheckCase> {};

TEST_P(CesGradcheck, MatchesCentralDifferences) {
    const auto tc = GetParam();
    std::mt19937_64 rng(51);
    const std::size_t len = 32, ch = 4;
    std::vector<CesChannelParams> ps;
    for (std::size_t c = 0; c < ch; ++c) ps.push_back(random_params(rng));
    CesOptions opt;
    opt.bidirectional = tc.bidirectional;
    opt.kernel_norm = tc.kernel_norm;
    opt.flags.complex_field = tc.complex_field;
    opt.flags.use_alpha = tc.use_alpha;
    opt.max_lambda = tc.max_lambda;
    const auto x = random_vector<double>(len * ch, 52);
    const auto w = random_vector<double>(len * ch, 53);
    auto loss = [&](const std::vector<CesChannelParams>& q, const std::vector<double>& xin) {
        const auto o = etsmlp::ces_forward<double>(xin, len, q, opt);
        double acc = 0.0;
        for (std::size_t i = 0; i < o.size(); ++i) acc += w[i] * o[i];
        return acc;
    };
    const auto g = etsmlp::ces_backward<double>(x, len, ps, w, opt);
    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t c = 0; c < ch; ++c) {
        for (int i = 0; i < kCoords; ++i) {
            auto plus = ps, minus = ps;
            coord(plus[c], i) += h;
            coord(minus[c], i) -= h;
            const double fd = (loss(plus, x) - loss(minus, x)) / (2 * h);
            worst = std::max(worst, rel_diff(gcoord(g.param_grads[c], i), fd, 1e-6));
        }
    }
    for (std::size_t i = 0; i < x.size(); i += 7) {
        auto plus = x, minus = x;
        plus[i] += h;
        minus[i] -= h;
        const double fd = (loss(ps, plus) - loss(ps, minus)) / (2 * h);
        worst = std::max(worst, rel_diff(g.input_grad[i], fd, 1e-6));
    }
    EXPECT_LT(worst, 1e-4);
}

INSTANTIATE_TEST_SUITE_P(Variants, CesGradcheck,
                         ::testing::Values(GradcheckCase{false, false, true, true, 0.9999},
                                           GradcheckCase{true, false, true, true, 0.9999},
                                           GradcheckCase{false, true, true, true, 0.9999},
                                           GradcheckCase{true, false, false, true, 0.9999},
                                           GradcheckCase{false, false, true, false, 0.9999},
                                           // Small max_lambda puts most channels on the projected branch.
                                           GradcheckCase{true, true, true, true, 0.3}));

TEST(CesBackward, AgreesWithHolomorphicClosedForm) {
    // dy'_t/dlambda' = sum_j beta x_{t-j} alpha lambda^{alpha j} (j - (j+1) lambda^alpha) log(lambda)
    // dL/da = sum_t g_t Re(.), dL/db = -sum_t g_t Im(.)
    const std::size_t len = 40;
    CesChannelParams p;
    p.lambda_prime_fwd = std::log(Complex(std::log(0.7), 0.5));
    p.alpha = {1.1, 0.2};
    p.beta = {0.8, -0.3};
    p.omega = 0.3;
    const auto x = random_vector<double>(len, 62);
    const auto gup = random_vector<double>(len, 63);
    const Complex log_lambda = std::exp(p.lambda_prime_fwd);
    const Complex mu = std::exp(p.alpha * log_lambda);
    ASSERT_LT(std::abs(mu), 0.9999);
    double da = 0.0, db = 0.0;
    for (std::size_t t = 0; t < len; ++t) {
        Complex acc{};
        for (std::size_t j = 0; j <= t; ++j) {
            const double jd = static_cast<double>(j);
            acc += p.beta * x[t - j] * p.alpha * std::pow(mu, jd) * (jd - (jd + 1.0) * mu) * log_lambda;
        }
        da += gup[t] * acc.real();
        db -= gup[t] * acc.imag();
    }
    const auto g = etsmlp::ces_backward<double>(x, len, std::vector<CesChannelParams>{p}, gup, CesOptions{});
    EXPECT_LT(rel_diff(g.param_grads[0].lambda_prime_fwd.real(), da), 1e-10);
    EXPECT_LT(rel_diff(g.param_grads[0].lambda_prime_fwd.imag(), db), 1e-10);
}

// --- gradient explosion probe ---

TEST(ExplosionProbe, InteriorPointIsFinite) {
    const auto r = etsmlp::gradient_explosion_probe(0.5, 4096);
    EXPECT_TRUE(std::isfinite(r.grad_naive));
    EXPECT_TRUE(std::isfinite(r.grad_prime));
    EXPECT_THROW(etsmlp::gradient_explosion_probe(1.0, 16), std::invalid_argument);
}

TEST(ExplosionProbe, NaiveGradientMatchesFiniteDifferences) {
    const auto x = etsmlp::explosion_probe_input(1 << 16);
    auto loss = [&](double lam) {
        double y = 0.0, acc = 0.0;
        for (const double xt : x) {
            y = (1.0 - lam) * xt + lam * y;
            acc += xt * y;
        }
        return acc / static_cast<double>(x.size());
    };
    for (const double lam : {0.5, 0.9, 0.99}) {
        const double h = 1e-6;
        const double fd = (loss(lam + h) - loss(lam - h)) / (2 * h);
        const auto r = etsmlp::gradient_explosion_probe(lam, x);
        EXPECT_LT(rel_diff(r.grad_naive, std::abs(fd)), 1e-6) << lam;
        // Real part of lambda' = log(log(lambda)): lambda = exp(-e^a).
        const double a = std::log(-std::log(lam));
        const double fa = (loss(std::exp(-std::exp(a + h))) - loss(std::exp(-std::exp(a - h)))) / (2 * h);
        EXPECT_LT(rel_diff(r.grad_prime, std::abs(fa)), 1e-6) << lam;
    }
}

TEST(ExplosionProbe, PrimeGradientAgreesWithCesBackward) {
    const std::size_t len = 4096;
    const auto x = etsmlp::explosion_probe_input(len);
    const double lam = 0.95;
    std::vector<double> up(len);
    for (std::size_t t = 0; t < len; ++t) up[t] = x[t] / static_cast<double>(len);
    CesChannelParams p;
    p.lambda_prime_fwd = etsmlp::prime_from_lambda({lam, 0.0});
    CesOptions opt;
    opt.flags.use_omega = false;
    const auto g = etsmlp::ces_backward<double>(x, len, std::vector<CesChannelParams>{p}, up, opt);
    const auto r = etsmlp::gradient_explosion_probe(lam, x);
    EXPECT_LT(rel_diff(std::abs(g.param_grads[0].lambda_prime_fwd.real()), r.grad_prime), 1e-8);
}

TEST(ExplosionProbe, NaiveExplodesPrimeStaysBounded) {
    const auto x = etsmlp::explosion_probe_input(1 << 22);
    std::vector<etsmlp::ExplosionProbe> rs;
    for (const double lam : {0.9, 0.99, 0.999, 0.9999}) rs.push_back(etsmlp::gradient_explosion_probe(lam, x));
    double lo = 1e300, hi = 0.0;
    for (std::size_t i = 0; i < rs.size(); ++i) {
        lo = std::min(lo, rs[i].grad_prime);
        hi = std::max(hi, rs[i].grad_prime);
        EXPECT_LT(std::abs(rs[i].output_dot), 20.0);
        if (i == 0) continue;
        const double growth = rs[i].grad_naive / rs[i - 1].grad_naive;
        EXPECT_GE(growth, 5.0);
        EXPECT_LE(growth, 20.0);
    }
    EXPECT_LT(hi / lo, 3.0);
}

}  // namespace
