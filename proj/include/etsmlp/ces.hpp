#ifndef ETSMLP_CES_HPP
#define ETSMLP_CES_HPP

// Complex exponential smoothing (CES) token mixing.
//
// Per channel the module smooths its input with the damped recursion
//   s_t = (1 - mu) beta x_t + mu s_{t-1},   mu = constrain(lambda^alpha)
// keeping only Re(s_t), then adds a sigmoid-gated shortcut:
//   o_t = sigmoid(omega) x_t + Re(s_t).
// The recursion is never run here; it is unrolled into kernel taps
//   k_j = Re(mu^j (1 - mu) beta)
// and applied by FFT convolution. The bidirectional variant adds an
// anticausal kernel with its own lambda and the shared alpha, beta.
//
// Gradients flow back through the taps: dL/dtheta = sum_j dL/dk_j dk_j/dtheta.
// Complex gradients are encoded as (dL/dre) + i (dL/dim).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "etsmlp/complex_core.hpp"
#include "etsmlp/fft.hpp"
#include "etsmlp/memory.hpp"

namespace etsmlp {

inline constexpr double kDefaultMaxLambda = 0.9999;

struct CesAblationFlags {
    bool use_alpha = true;
    bool use_beta = true;
    bool use_omega = true;
    bool complex_field = true;
    /// false disables token mixing entirely: o = x.
    bool mixing = true;
};

struct CesOptions {
    double max_lambda = kDefaultMaxLambda;
    bool bidirectional = false;
    /// Scales each direction's taps by sqrt(1 - |mu|^2).
    bool kernel_norm = false;
    CesAblationFlags flags{};
};

struct CesChannelParams {
    Complex lambda_prime_fwd{};
    Complex lambda_prime_bwd{};
    Complex alpha{1.0, 0.0};
    Complex beta{1.0, 0.0};
    double omega = 0.0;
};

/// Same layout as CesChannelParams; each complex entry holds (d/dre) + i (d/dim).
using CesParamGrad = CesChannelParams;

/// Pins ablated parameters to their neutral values.
inline CesChannelParams effective_params(CesChannelParams p, const CesAblationFlags& flags) {
    if (!flags.use_alpha) p.alpha = {1.0, 0.0};
    if (!flags.use_beta) p.beta = {1.0, 0.0};
    if (!flags.complex_field) {
        p.alpha.imag(0.0);
        p.beta.imag(0.0);
        p.lambda_prime_fwd.imag(std::numbers::pi);
        p.lambda_prime_bwd.imag(std::numbers::pi);
    }
    if (!flags.use_omega) p.omega = 0.0;
    return p;
}

/// Zeroes gradient coordinates that effective_params() pins.
inline void mask_pinned(CesParamGrad& g, const CesOptions& opt) {
    const auto& f = opt.flags;
    if (!f.mixing) {
        g = CesParamGrad{{}, {}, {}, {}, 0.0};
        return;
    }
    if (!opt.bidirectional) g.lambda_prime_bwd = {};
    if (!f.use_alpha) g.alpha = {};
    if (!f.use_beta) g.beta = {};
    if (!f.use_omega) g.omega = 0.0;
    if (!f.complex_field) {
        g.alpha.imag(0.0);
        g.beta.imag(0.0);
        g.lambda_prime_fwd.imag(0.0);
        g.lambda_prime_bwd.imag(0.0);
    }
}

/// mu = constrain(lambda^alpha) together with the intermediates its gradient needs.
struct DecayFactor {
    Complex log_lambda{};
    Complex raw{};
    Complex value{};
    double scale = 1.0;
};

inline DecayFactor decay_factor(Complex lambda_prime, Complex alpha, const CesOptions& opt) {
    DecayFactor d;
    if (opt.flags.complex_field) {
        d.log_lambda = cexp(lambda_prime);
    } else {
        // lambda' = a + i*pi, so log(lambda) = -e^a exactly.
        d.log_lambda = {-std::exp(lambda_prime.real()), 0.0};
    }
    d.raw = cexp(alpha * d.log_lambda);
    d.value = constrain(d.raw, opt.max_lambda);
    if (opt.kernel_norm) d.scale = std::sqrt(std::max(0.0, 1.0 - std::norm(d.value)));
    return d;
}

struct CesKernel {
    /// Length L (unidirectional) or 2L: forward taps, then backward taps reversed.
    std::vector<double> taps;
    bool bidirectional = false;
    CesChannelParams params{};
    DecayFactor fwd{};
    DecayFactor bwd{};

    std::size_t length() const { return bidirectional ? taps.size() / 2 : taps.size(); }
};

namespace detail {

/// Below this magnitude a power of mu contributes nothing; stopping early also
/// keeps the loops out of subnormal arithmetic.
inline constexpr double kNegligiblePower = 1e-280;

inline bool negligible(Complex z) { return std::abs(z.real()) + std::abs(z.imag()) < kNegligiblePower; }

inline void fill_direction(const DecayFactor& d, Complex beta, std::span<double> out) {
    const Complex head = (1.0 - d.value) * beta;
    Complex power{1.0, 0.0};
    for (double& tap : out) {
        if (negligible(power)) {
            tap = 0.0;
            continue;
        }
        tap = d.scale * (power * head).real();
        power *= d.value;
    }
}

/// Gradient of one direction's taps w.r.t. (mu, beta, scale) folded back onto
/// (lambda', alpha, beta). `tap_grad` is indexed by offset j.
template <class Getter>
void direction_backward(const DecayFactor& d, Complex alpha, Complex beta, std::size_t length, Getter tap_grad,
                        const CesOptions& opt, Complex& g_lambda_prime, Complex& g_alpha, Complex& g_beta) {
    const Complex mu = d.value;
    Complex power{1.0, 0.0};   // mu^j
    Complex dpower{0.0, 0.0};  // j mu^{j-1}
    Complex sum_pow{0.0, 0.0};
    Complex sum_dpow{0.0, 0.0};
    for (std::size_t j = 0; j < length; ++j) {
        if (j > 0 && negligible(power) && negligible(dpower)) break;
        const double g = tap_grad(j);
        sum_pow += g * power;
        sum_dpow += g * dpower;
        dpower = mu * dpower + power;
        power *= mu;
    }
    const Complex one_minus = 1.0 - mu;
    Complex g_mu = std::conj(d.scale * beta * (one_minus * sum_dpow - sum_pow));
    g_beta += std::conj(d.scale * one_minus * sum_pow);
    if (opt.kernel_norm && d.scale > 0.0) {
        const double g_scale = (one_minus * beta * sum_pow).real();
        g_mu += g_scale * (-mu / d.scale);
    }
    const Complex g_raw = constrain_backward(d.raw, opt.max_lambda, g_mu);
    g_alpha += g_raw * std::conj(d.raw * d.log_lambda);
    const Complex g_log = g_raw * std::conj(d.raw * alpha);
    if (opt.flags.complex_field) {
        g_lambda_prime += g_log * std::conj(d.log_lambda);
    } else {
        g_lambda_prime += Complex(g_log.real() * d.log_lambda.real(), 0.0);
    }
}

}  // namespace detail

inline CesKernel build_kernel(const CesChannelParams& raw, std::size_t length, const CesOptions& opt) {
    if (length == 0) throw std::invalid_argument("build_kernel: length must be >= 1");
    CesKernel k;
    k.bidirectional = opt.bidirectional;
    k.params = effective_params(raw, opt.flags);
    k.taps.assign(opt.bidirectional ? 2 * length : length, 0.0);
    if (!opt.flags.mixing) {
        k.taps[0] = 1.0;
        return k;
    }
    k.fwd = decay_factor(k.params.lambda_prime_fwd, k.params.alpha, opt);
    detail::fill_direction(k.fwd, k.params.beta, std::span<double>(k.taps).first(length));
    if (opt.bidirectional) {
        k.bwd = decay_factor(k.params.lambda_prime_bwd, k.params.alpha, opt);
        std::vector<double> back(length);
        detail::fill_direction(k.bwd, k.params.beta, back);
        for (std::size_t o = 0; o < length; ++o) k.taps[2 * length - 1 - o] = back[o];
    }
    return k;
}

/// Pulls dL/dtaps back to the channel parameters (omega excluded).
inline CesParamGrad kernel_backward(const CesKernel& k, std::span<const double> tap_grads, const CesOptions& opt) {
    if (tap_grads.size() != k.taps.size()) {
        throw std::invalid_argument("kernel_backward: gradient length does not match kernel");
    }
    CesParamGrad g{{}, {}, {}, {}, 0.0};
    if (!opt.flags.mixing) return g;
    const std::size_t len = k.length();
    detail::direction_backward(
        k.fwd, k.params.alpha, k.params.beta, len, [&](std::size_t j) { return tap_grads[j]; }, opt,
        g.lambda_prime_fwd, g.alpha, g.beta);
    if (k.bidirectional) {
        detail::direction_backward(
            k.bwd, k.params.alpha, k.params.beta, len, [&](std::size_t o) { return tap_grads[2 * len - 1 - o]; },
            opt, g.lambda_prime_bwd, g.alpha, g.beta);
    }
    mask_pinned(g, opt);
    return g;
}

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// Activations kept from the batched forward pass for the backward pass.
template <class T>
struct CesCache {
    std::size_t batch = 0;
    std::size_t length = 0;
    std::size_t channels = 0;
    std::size_t transform = 0;
    /// Spectrum slots are padded to keep every slot 64-byte aligned.
    std::size_t stride = 0;
    std::vector<CesKernel> kernels;
    std::vector<double> gate;
    /// Per channel, the kernel spectrum scaled by 1/transform (channels x stride).
    Buffer<std::complex<T>> kernel_spec;
    /// Per (batch, channel), the input spectrum.
    Buffer<std::complex<T>> input_spec;
};

namespace detail {

template <class T>
void circular_taps(const CesKernel& k, std::size_t n, std::span<T> out) {
    std::fill(out.begin(), out.end(), T(0));
    const std::size_t len = k.length();
    for (std::size_t j = 0; j < len; ++j) out[j] = static_cast<T>(k.taps[j]);
    if (k.bidirectional) {
        for (std::size_t o = 0; o < len; ++o) out[(n - o) & (n - 1)] += static_cast<T>(k.taps[2 * len - 1 - o]);
    }
}

template <class T>
std::size_t spectrum_stride(std::size_t bins) {
    constexpr std::size_t per_line = 64 / sizeof(std::complex<T>);
    return (bins + per_line - 1) / per_line * per_line;
}

inline constexpr std::size_t kChannelTile = 16;

template <class T>
std::size_t real_slot(std::size_t n) {
    constexpr std::size_t per_line = 64 / sizeof(T);
    return (n + per_line - 1) / per_line * per_line;
}

/// Copies channels [c0, c0 + w) of a (length, channels) block into zero-padded rows of `tile`.
template <class T>
void gather_tile(const T* src, std::size_t length, std::size_t channels, std::size_t c0, std::size_t w,
                 std::size_t n, std::size_t slot, T* tile) {
    for (std::size_t t = 0; t < length; ++t) {
        const T* row = src + t * channels + c0;
        for (std::size_t k = 0; k < w; ++k) tile[k * slot + t] = row[k];
    }
    for (std::size_t k = 0; k < w; ++k) std::fill(tile + k * slot + length, tile + k * slot + n, T(0));
}

/// out = gate * shortcut + tile, for channels [c0, c0 + w).
template <class T>
void scatter_tile(const T* tile, const T* shortcut, const double* gate, std::size_t length, std::size_t channels,
                  std::size_t c0, std::size_t w, std::size_t slot, T* out) {
    T g[kChannelTile];
    for (std::size_t k = 0; k < w; ++k) g[k] = static_cast<T>(gate[c0 + k]);
    for (std::size_t t = 0; t < length; ++t) {
        const std::size_t base = t * channels + c0;
        for (std::size_t k = 0; k < w; ++k) out[base + k] = g[k] * shortcut[base + k] + tile[k * slot + t];
    }
}

}  // namespace detail

/// Batched CES over x of shape (batch, length, channels), row-major.
template <class T>
void ces_forward_batch(std::span<const T> x, std::size_t batch, std::size_t length, std::size_t channels,
                       std::span<const CesChannelParams> params, const CesOptions& opt, std::span<T> out,
                       CesCache<T>& cache) {
    if (params.size() != channels) {
        throw std::invalid_argument("ces_forward: one parameter set per channel required");
    }
    if (x.size() != batch * length * channels || out.size() != x.size()) {
        throw std::invalid_argument("ces_forward: tensor shape mismatch");
    }
    cache.batch = batch;
    cache.length = length;
    cache.channels = channels;
    cache.kernels.clear();
    cache.gate.assign(channels, 0.0);
    if (length == 0 || channels == 0) return;
    if (!opt.flags.mixing) {
        std::copy(x.begin(), x.end(), out.begin());
        cache.kernel_spec.clear();
        cache.input_spec.clear();
        return;
    }

    const std::size_t n = conv_transform_size(length);
    const auto& plan = real_fft_plan<T>(n);
    const std::size_t bins = plan.bins();
    const std::size_t stride = detail::spectrum_stride<T>(bins);
    cache.transform = n;
    cache.stride = stride;

    cache.kernels.reserve(channels);
    for (std::size_t c = 0; c < channels; ++c) {
        cache.kernels.push_back(build_kernel(params[c], length, opt));
        const auto& p = cache.kernels.back().params;
        cache.gate[c] = opt.flags.use_omega ? sigmoid(p.omega) : 0.0;
    }

    // Kernel spectra are always taken in double precision.
    cache.kernel_spec.assign(channels * stride, {});
    {
        const auto& dplan = real_fft_plan<double>(n);
        Buffer<double> taps(n);
        Buffer<std::complex<double>> spec(bins);
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t c = 0; c < channels; ++c) {
            detail::circular_taps<double>(cache.kernels[c], n, taps);
            dplan.forward(taps.data(), spec.data());
            for (std::size_t k = 0; k < bins; ++k) {
                cache.kernel_spec[c * stride + k] = std::complex<T>(spec[k] * inv_n);
            }
        }
    }

    cache.input_spec.assign(batch * channels * stride, {});
    const std::size_t slot = detail::real_slot<T>(n);
    Buffer<T> tile(detail::kChannelTile * slot);
    Buffer<std::complex<T>> prod(bins);
    for (std::size_t b = 0; b < batch; ++b) {
        const T* xb = x.data() + b * length * channels;
        T* ob = out.data() + b * length * channels;
        for (std::size_t c0 = 0; c0 < channels; c0 += detail::kChannelTile) {
            const std::size_t w = std::min(detail::kChannelTile, channels - c0);
            detail::gather_tile(xb, length, channels, c0, w, n, slot, tile.data());
            for (std::size_t k = 0; k < w; ++k) {
                const std::size_t c = c0 + k;
                T* real = tile.data() + k * slot;
                std::complex<T>* xs = cache.input_spec.data() + (b * channels + c) * stride;
                plan.forward(real, xs);
                const std::complex<T>* ks = cache.kernel_spec.data() + c * stride;
                for (std::size_t q = 0; q < bins; ++q) prod[q] = cmul(xs[q], ks[q]);
                plan.inverse_unscaled(prod.data(), real);
            }
            detail::scatter_tile(tile.data(), xb, cache.gate.data(), length, channels, c0, w, slot, ob);
        }
    }
}

/// Backward of ces_forward_batch. Overwrites grad_in and param_grads.
template <class T>
void ces_backward_batch(std::span<const T> x, std::span<const T> grad_out, const CesCache<T>& cache,
                        const CesOptions& opt, std::span<T> grad_in, std::span<CesParamGrad> param_grads) {
    const std::size_t batch = cache.batch, length = cache.length, channels = cache.channels;
    if (grad_out.size() != batch * length * channels || grad_in.size() != grad_out.size() ||
        x.size() != grad_out.size() || param_grads.size() != channels) {
        throw std::invalid_argument("ces_backward: tensor shape mismatch");
    }
    for (auto& g : param_grads) g = CesParamGrad{{}, {}, {}, {}, 0.0};
    if (length == 0 || channels == 0) return;
    if (!opt.flags.mixing) {
        std::copy(grad_out.begin(), grad_out.end(), grad_in.begin());
        return;
    }

    const std::size_t n = cache.transform, stride = cache.stride;
    const auto& plan = real_fft_plan<T>(n);
    const std::size_t bins = plan.bins();

    // Shortcut path.
    std::vector<double> omega_acc(channels, 0.0);
    for (std::size_t i = 0; i < grad_out.size(); ++i) {
        const std::size_t c = i % channels;
        omega_acc[c] += static_cast<double>(grad_out[i]) * static_cast<double>(x[i]);
    }
    for (std::size_t c = 0; c < channels; ++c) {
        const double s = cache.gate[c];
        param_grads[c].omega = opt.flags.use_omega ? omega_acc[c] * s * (1.0 - s) : 0.0;
    }

    const std::size_t slot = detail::real_slot<T>(n);
    Buffer<T> tile(detail::kChannelTile * slot);
    Buffer<std::complex<T>> gs(bins), dx(bins);
    // Per channel of the tile, sum over the batch of conj(X) G (scaled by 1/n).
    Buffer<std::complex<double>> kernel_grad_spec(detail::kChannelTile * stride);
    const auto& dplan = real_fft_plan<double>(n);
    Buffer<double> circ(n);
    std::vector<double> tap_grads;
    const T inv_n = static_cast<T>(1.0 / static_cast<double>(n));
    for (std::size_t c0 = 0; c0 < channels; c0 += detail::kChannelTile) {
        const std::size_t w = std::min(detail::kChannelTile, channels - c0);
        std::fill(kernel_grad_spec.begin(), kernel_grad_spec.end(), std::complex<double>{});
        for (std::size_t b = 0; b < batch; ++b) {
            const T* gb = grad_out.data() + b * length * channels;
            T* ib = grad_in.data() + b * length * channels;
            detail::gather_tile(gb, length, channels, c0, w, n, slot, tile.data());
            for (std::size_t k = 0; k < w; ++k) {
                const std::size_t c = c0 + k;
                T* real = tile.data() + k * slot;
                plan.forward(real, gs.data());
                const std::complex<T>* xs = cache.input_spec.data() + (b * channels + c) * stride;
                const std::complex<T>* ks = cache.kernel_spec.data() + c * stride;
                std::complex<double>* acc = kernel_grad_spec.data() + k * stride;
                for (std::size_t q = 0; q < bins; ++q) {
                    dx[q] = cmul_conj(ks[q], gs[q]);
                    acc[q] += std::complex<double>(cmul_conj(xs[q], gs[q]) * inv_n);
                }
                plan.inverse_unscaled(dx.data(), real);
            }
            detail::scatter_tile(tile.data(), gb, cache.gate.data(), length, channels, c0, w, slot, ib);
        }

        for (std::size_t k = 0; k < w; ++k) {
            const std::size_t c = c0 + k;
            dplan.inverse_unscaled(kernel_grad_spec.data() + k * stride, circ.data());
            const auto& kern = cache.kernels[c];
            tap_grads.assign(kern.taps.size(), 0.0);
            for (std::size_t j = 0; j < length; ++j) tap_grads[j] = circ[j];
            if (kern.bidirectional) {
                for (std::size_t o = 0; o < length; ++o) tap_grads[2 * length - 1 - o] = circ[(n - o) & (n - 1)];
            }
            const double omega_grad = param_grads[c].omega;
            param_grads[c] = kernel_backward(kern, tap_grads, opt);
            param_grads[c].omega = omega_grad;
        }
    }
}

/// Single-sequence CES over x of shape (length, channels).
template <class T>
std::vector<T> ces_forward(std::span<const T> x, std::size_t length, std::span<const CesChannelParams> params,
                           const CesOptions& opt) {
    if (length == 0 || x.size() % length != 0) throw std::invalid_argument("ces_forward: bad shape");
    std::vector<T> out(x.size());
    CesCache<T> cache;
    ces_forward_batch<T>(x, 1, length, x.size() / length, params, opt, out, cache);
    return out;
}

template <class T>
struct CesGradients {
    std::vector<T> input_grad;
    std::vector<CesParamGrad> param_grads;
};

template <class T>
CesGradients<T> ces_backward(std::span<const T> x, std::size_t length, std::span<const CesChannelParams> params,
                             std::span<const T> upstream, const CesOptions& opt) {
    if (length == 0 || x.size() % length != 0) throw std::invalid_argument("ces_backward: bad shape");
    const std::size_t channels = x.size() / length;
    std::vector<T> out(x.size());
    CesCache<T> cache;
    ces_forward_batch<T>(x, 1, length, channels, params, opt, out, cache);
    CesGradients<T> g{std::vector<T>(x.size()), std::vector<CesParamGrad>(channels)};
    ces_backward_batch<T>(x, upstream, cache, opt, g.input_grad, g.param_grads);
    return g;
}

/// Magnitudes of dL/dlambda (direct parameterization) and dL/dRe(lambda')
/// (exponential parameterization) for simple real smoothing
/// y_t = (1 - lambda) x_t + lambda y_{t-1}.
struct ExplosionProbe {
    double lambda = 0.0;
    double grad_naive = 0.0;
    double grad_prime = 0.0;
    /// sum_t (dL/dy_t) y_t, which stays bounded across the sweep.
    double output_dot = 0.0;
};

/// Sum of unit cosines at four log-spaced frequencies per decade in [1e-5, 1]
/// rad/step. Its equal energy per log-frequency band exercises every smoothing
/// time scale.
inline std::vector<double> explosion_probe_input(std::size_t length) {
    std::vector<double> x(length, 0.0);
    constexpr int kBands = 21;
    constexpr std::size_t kResync = 4096;
    for (int m = 0; m < kBands; ++m) {
        const double omega = std::pow(10.0, -5.0 + 0.25 * m);
        const double phase = 0.7 * m;
        const Complex step = std::polar(1.0, omega);
        Complex rot;
        for (std::size_t t = 0; t < length; ++t) {
            if (t % kResync == 0) rot = std::polar(1.0, omega * static_cast<double>(t) + phase);
            x[t] += rot.real();
            rot *= step;
        }
    }
    return x;
}

/// Loss L = (1/N) sum_t x_t y_t. Gradients by exact forward-mode recursion.
inline ExplosionProbe gradient_explosion_probe(double lambda, std::span<const double> input) {
    if (!(lambda > 0.0 && lambda < 1.0)) {
        throw std::invalid_argument("gradient_explosion_probe: lambda must lie in (0, 1)");
    }
    const double inv_n = 1.0 / static_cast<double>(input.size());
    double y = 0.0, dy = 0.0, loss_grad = 0.0, dot = 0.0;
    for (const double xt : input) {
        dy = -xt + y + lambda * dy;
        y = (1.0 - lambda) * xt + lambda * y;
        loss_grad += xt * inv_n * dy;
        dot += xt * inv_n * y;
    }
    ExplosionProbe r;
    r.lambda = lambda;
    r.grad_naive = std::abs(loss_grad);
    // lambda = exp(exp(a + i pi)) = exp(-e^a), so dlambda/da = lambda log(lambda).
    r.grad_prime = std::abs(loss_grad * lambda * std::log(lambda));
    r.output_dot = dot;
    return r;
}

inline ExplosionProbe gradient_explosion_probe(double lambda, std::size_t length) {
    const auto x = explosion_probe_input(length);
    return gradient_explosion_probe(lambda, x);
}

}  // namespace etsmlp

#endif  // ETSMLP_CES_HPP
