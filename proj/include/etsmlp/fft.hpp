#ifndef ETSMLP_FFT_HPP
#define ETSMLP_FFT_HPP

// Power-of-two FFT plans and the real-sequence convolutions built on them.
//
// Conventions: forward X[k] = sum_n x[n] e^{-2 pi i k n / N}; inverse carries
// the 1/N factor. Causal and two-sided convolutions zero-pad to the next power
// of two >= 2L so a single transform size serves both.

#include <algorithm>
#include <bit>
#include <cstdlib>
#include <new>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include <fftw3.h>

#include "etsmlp/memory.hpp"

namespace etsmlp {

template <class T>
inline std::complex<T> cmul(std::complex<T> a, std::complex<T> b) {
    return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}

/// conj(a) * b
template <class T>
inline std::complex<T> cmul_conj(std::complex<T> a, std::complex<T> b) {
    return {a.real() * b.real() + a.imag() * b.imag(), a.real() * b.imag() - a.imag() * b.real()};
}

/// Splits the spectrum of z = a + i*b (a, b real) at bin k into (A[k], B[k]).
template <class T>
inline void split_packed(std::span<const std::complex<T>> z, std::size_t k, std::complex<T>& a,
                         std::complex<T>& b) {
    const std::size_t n = z.size();
    const std::complex<T> zk = z[k];
    const std::complex<T> zc = std::conj(z[(n - k) & (n - 1)]);
    a = (zk + zc) * T(0.5);
    const std::complex<T> d = zk - zc;
    b = {d.imag() * T(0.5), -d.real() * T(0.5)};
}

constexpr bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

constexpr std::size_t next_power_of_two(std::size_t n) { return n <= 1 ? 1 : std::bit_ceil(n); }

/// Transform length used for a length-L sequence (uni- or bidirectional).
constexpr std::size_t conv_transform_size(std::size_t length) { return next_power_of_two(2 * length); }

/// 64-byte aligned storage so FFTW can use its SIMD codelets.
template <class T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::size_t kAlign = 64;

    AlignedAllocator() = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) {
        const std::size_t bytes = (std::max<std::size_t>(n * sizeof(T), 1) + kAlign - 1) / kAlign * kAlign;
        void* p = std::aligned_alloc(kAlign, bytes);
        if (!p) throw std::bad_alloc();
        return static_cast<T*>(p);
    }
    void deallocate(T* p, std::size_t) noexcept { std::free(p); }

    template <class U>
    bool operator==(const AlignedAllocator<U>&) const noexcept {
        return true;
    }
};

template <class T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

namespace detail {

inline std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

template <class T>
struct Fftw;

#define ETSMLP_FFTW_TRAITS(REAL, PREFIX)                                                                   \
    template <>                                                                                          \
    struct Fftw<REAL> {                                                                                  \
        using plan_type = PREFIX##_plan;                                                                 \
        using cplx = PREFIX##_complex;                                                                   \
        static cplx* c(std::complex<REAL>* p) { return reinterpret_cast<cplx*>(p); }                     \
        static bool aligned(const void* p) {                                                             \
            return PREFIX##_alignment_of(static_cast<REAL*>(const_cast<void*>(p))) == 0;                 \
        }                                                                                                \
        static plan_type c2c(std::complex<REAL>* buf, int n, int sign, unsigned flags) {                 \
            return PREFIX##_plan_dft_1d(n, c(buf), c(buf), sign, flags);                                 \
        }                                                                                                \
        static plan_type r2c(REAL* in, std::complex<REAL>* out, int n) {                                 \
            return PREFIX##_plan_dft_r2c_1d(n, in, c(out), FFTW_ESTIMATE);                               \
        }                                                                                                \
        static plan_type c2r(std::complex<REAL>* in, REAL* out, int n) {                                 \
            return PREFIX##_plan_dft_c2r_1d(n, c(in), out, FFTW_ESTIMATE);                               \
        }                                                                                                \
        static void run_c2c(plan_type p, std::complex<REAL>* d) { PREFIX##_execute_dft(p, c(d), c(d)); } \
        static void run_r2c(plan_type p, const REAL* in, std::complex<REAL>* out) {                      \
            PREFIX##_execute_dft_r2c(p, const_cast<REAL*>(in), c(out));                                  \
        }                                                                                                \
        static void run_c2r(plan_type p, std::complex<REAL>* in, REAL* out) {                            \
            PREFIX##_execute_dft_c2r(p, c(in), out);                                                     \
        }                                                                                                \
        static void destroy(plan_type p) {                                                               \
            if (p) PREFIX##_destroy_plan(p);                                                             \
        }                                                                                                \
    };

ETSMLP_FFTW_TRAITS(double, fftw)
ETSMLP_FFTW_TRAITS(float, fftwf)

#undef ETSMLP_FFTW_TRAITS

}  // namespace detail

/// In-place complex transform of one power-of-two length, backed by FFTW.
/// Planning uses FFTW_ESTIMATE so results do not depend on run-time timing.
template <class T>
class FftPlan {
    using W = detail::Fftw<T>;

public:
    explicit FftPlan(std::size_t n) : n_(n) {
        if (!is_power_of_two(n)) {
            throw std::invalid_argument("FftPlan: length must be a power of two");
        }
        std::lock_guard<std::mutex> lock(detail::planner_mutex());
        AlignedVector<std::complex<T>> probe(n);
        const int len = static_cast<int>(n);
        fwd_ = W::c2c(probe.data(), len, FFTW_FORWARD, FFTW_ESTIMATE);
        inv_ = W::c2c(probe.data(), len, FFTW_BACKWARD, FFTW_ESTIMATE);
        fwd_u_ = W::c2c(probe.data(), len, FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
        inv_u_ = W::c2c(probe.data(), len, FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
        if (!fwd_ || !inv_ || !fwd_u_ || !inv_u_) {
            release();
            throw std::runtime_error("FftPlan: FFTW planning failed");
        }
    }

    FftPlan(const FftPlan&) = delete;
    FftPlan& operator=(const FftPlan&) = delete;

    ~FftPlan() {
        std::lock_guard<std::mutex> lock(detail::planner_mutex());
        release();
    }

    std::size_t size() const { return n_; }

    void forward(std::span<std::complex<T>> data) const {
        check(data);
        W::run_c2c(W::aligned(data.data()) ? fwd_ : fwd_u_, data.data());
    }

    void inverse(std::span<std::complex<T>> data) const {
        check(data);
        W::run_c2c(W::aligned(data.data()) ? inv_ : inv_u_, data.data());
        const T scale = T(1) / static_cast<T>(n_);
        for (auto& v : data) v *= scale;
    }

private:
    void check(std::span<std::complex<T>> data) const {
        if (data.size() != n_) {
            throw std::invalid_argument("FftPlan: buffer length does not match plan");
        }
    }

    void release() {
        for (auto p : {fwd_, inv_, fwd_u_, inv_u_}) W::destroy(p);
    }

    std::size_t n_;
    typename W::plan_type fwd_{}, inv_{}, fwd_u_{}, inv_u_{};
};

/// Real-input transform of length n producing the n/2+1 non-redundant bins,
/// and its inverse. Buffers must come from AlignedVector.
template <class T>
class RealFftPlan {
    using W = detail::Fftw<T>;

public:
    explicit RealFftPlan(std::size_t n) : n_(n) {
        if (!is_power_of_two(n)) {
            throw std::invalid_argument("RealFftPlan: length must be a power of two");
        }
        std::lock_guard<std::mutex> lock(detail::planner_mutex());
        AlignedVector<T> real(n);
        AlignedVector<std::complex<T>> spec(bins());
        r2c_ = W::r2c(real.data(), spec.data(), static_cast<int>(n));
        c2r_ = W::c2r(spec.data(), real.data(), static_cast<int>(n));
        if (!r2c_ || !c2r_) {
            W::destroy(r2c_);
            W::destroy(c2r_);
            throw std::runtime_error("RealFftPlan: FFTW planning failed");
        }
    }

    RealFftPlan(const RealFftPlan&) = delete;
    RealFftPlan& operator=(const RealFftPlan&) = delete;

    ~RealFftPlan() {
        std::lock_guard<std::mutex> lock(detail::planner_mutex());
        W::destroy(r2c_);
        W::destroy(c2r_);
    }

    std::size_t size() const { return n_; }
    std::size_t bins() const { return n_ / 2 + 1; }

    void forward(const T* in, std::complex<T>* out) const {
        require_aligned(in, out);
        W::run_r2c(r2c_, in, out);
    }

    /// Unnormalized: the result is n times the inverse DFT. Clobbers `in`.
    void inverse_unscaled(std::complex<T>* in, T* out) const {
        require_aligned(in, out);
        W::run_c2r(c2r_, in, out);
    }

private:
    static void require_aligned(const void* a, const void* b) {
        if (!W::aligned(a) || !W::aligned(b)) {
            throw std::invalid_argument("RealFftPlan: buffers must be SIMD aligned");
        }
    }

    std::size_t n_;
    typename W::plan_type r2c_{}, c2r_{};
};

/// Shared, lazily built plan for a given length.
template <class T>
const FftPlan<T>& fft_plan(std::size_t n) {
    static std::mutex mutex;
    static std::map<std::size_t, std::unique_ptr<FftPlan<T>>> plans;
    std::lock_guard<std::mutex> lock(mutex);
    auto& slot = plans[n];
    if (!slot) slot = std::make_unique<FftPlan<T>>(n);
    return *slot;
}

/// Shared, lazily built real-input plan for a given length.
template <class T>
const RealFftPlan<T>& real_fft_plan(std::size_t n) {
    static std::mutex mutex;
    static std::map<std::size_t, std::unique_ptr<RealFftPlan<T>>> plans;
    std::lock_guard<std::mutex> lock(mutex);
    auto& slot = plans[n];
    if (!slot) slot = std::make_unique<RealFftPlan<T>>(n);
    return *slot;
}

template <class T>
std::vector<std::complex<T>> fft(std::span<const std::complex<T>> v) {
    std::vector<std::complex<T>> out(v.begin(), v.end());
    fft_plan<T>(out.size()).forward(out);
    return out;
}

template <class T>
std::vector<std::complex<T>> ifft(std::span<const std::complex<T>> spectrum) {
    std::vector<std::complex<T>> out(spectrum.begin(), spectrum.end());
    fft_plan<T>(out.size()).inverse(out);
    return out;
}

namespace detail {

template <class T>
std::vector<T> circular_via_fft(std::span<const T> x, std::span<const T> circular_kernel, std::size_t n,
                                std::size_t keep) {
    const auto& plan = real_fft_plan<T>(n);
    thread_local AlignedVector<T> xa, ka;
    thread_local AlignedVector<std::complex<T>> xs, ks;
    xa.assign(n, T(0));
    ka.assign(n, T(0));
    xs.resize(plan.bins());
    ks.resize(plan.bins());
    std::copy(x.begin(), x.end(), xa.begin());
    std::copy(circular_kernel.begin(), circular_kernel.end(), ka.begin());
    plan.forward(xa.data(), xs.data());
    plan.forward(ka.data(), ks.data());
    const T scale = T(1) / static_cast<T>(n);
    for (std::size_t k = 0; k < xs.size(); ++k) xs[k] = cmul(xs[k], ks[k]) * scale;
    plan.inverse_unscaled(xs.data(), xa.data());
    return std::vector<T>(xa.begin(), xa.begin() + static_cast<std::ptrdiff_t>(keep));
}

}  // namespace detail

/// y_t = sum_{j<=t} k_j x_{t-j}, t < L.
template <class T>
std::vector<T> conv_causal(std::span<const T> x, std::span<const T> k) {
    if (x.size() != k.size()) {
        throw std::invalid_argument("conv_causal: input and kernel lengths differ");
    }
    if (x.empty()) return {};
    return detail::circular_via_fft<T>(x, k, conv_transform_size(x.size()), x.size());
}

/// Maps a two-sided kernel stored as [fwd_0..fwd_{L-1}, bwd_{L-1}..bwd_0]
/// onto a length-n circular kernel where backward offset o multiplies x_{t+o}.
template <class T>
std::vector<T> circular_kernel_from_two_sided(std::span<const T> k2, std::size_t n) {
    const std::size_t len = k2.size() / 2;
    std::vector<T> c(n, T(0));
    for (std::size_t j = 0; j < len; ++j) c[j] = k2[j];
    for (std::size_t o = 0; o < len; ++o) c[(n - o) & (n - 1)] += k2[2 * len - 1 - o];
    return c;
}

/// Two-sided convolution with a length-2L kernel in forward-then-reversed-
/// backward order: y_t = sum_j fwd_j x_{t-j} + sum_o bwd_o x_{t+o}.
template <class T>
std::vector<T> conv_circular_2L(std::span<const T> x, std::span<const T> k2) {
    if (k2.size() != 2 * x.size()) {
        throw std::invalid_argument("conv_circular_2L: kernel must be twice the input length");
    }
    if (x.empty()) return {};
    const std::size_t n = conv_transform_size(x.size());
    const auto c = circular_kernel_from_two_sided<T>(k2, n);
    return detail::circular_via_fft<T>(x, std::span<const T>(c), n, x.size());
}

/// O(L^2) reference for conv_causal.
template <class T>
std::vector<T> direct_conv_causal(std::span<const T> x, std::span<const T> k) {
    if (x.size() != k.size()) {
        throw std::invalid_argument("direct_conv_causal: input and kernel lengths differ");
    }
    std::vector<T> y(x.size(), T(0));
    for (std::size_t t = 0; t < x.size(); ++t) {
        T acc = 0;
        for (std::size_t j = 0; j <= t; ++j) acc += k[j] * x[t - j];
        y[t] = acc;
    }
    return y;
}

}  // namespace etsmlp

#endif  // ETSMLP_FFT_HPP
