#ifndef ETSMLP_MODEL_HPP
#define ETSMLP_MODEL_HPP

// Stacked ETSMLP classifier: embedding, CES-MLP blocks with optional output
// gate, final LayerNorm, masked mean pooling and a linear head.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "etsmlp/batch.hpp"
#include "etsmlp/ces.hpp"
#include "etsmlp/complex_core.hpp"
#include "etsmlp/layers.hpp"
#include "etsmlp/memory.hpp"
#include "etsmlp/param_store.hpp"

namespace etsmlp {

struct StablePoint {
    double re = 0.5;
    double im = 0.0;
};

struct InitSpec {
    enum class Kind { ring, stable };
    Kind kind = Kind::ring;
    RingSpec ring{};
    StablePoint stable{};
};

struct ModelConfig {
    std::size_t vocab_size = 16;
    std::size_t n_classes = 10;
    std::size_t d = 64;
    std::size_t hidden = 64;
    std::size_t n_layers = 4;
    bool gate = false;
    bool bidirectional = false;
    double max_lambda = kDefaultMaxLambda;
    InitSpec init{};
    CesAblationFlags flags{};
    double dropout = 0.0;
    bool kernel_norm = false;

    void validate() const {
        if (vocab_size < 1 || n_classes < 1) throw std::invalid_argument("model: vocab_size and n_classes must be >= 1");
        if (d < 1 || hidden < 1 || n_layers < 1) throw std::invalid_argument("model: d, hidden, n_layers must be >= 1");
        if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("model: dropout must lie in [0, 1)");
        if (!(max_lambda > 0.0 && max_lambda < 1.0)) throw std::invalid_argument("model: max_lambda must lie in (0, 1)");
        if (init.kind == InitSpec::Kind::ring) {
            init.ring.validate();
        } else {
            const double r = std::hypot(init.stable.re, init.stable.im);
            if (!(r > 0.0 && r < 1.0)) throw std::invalid_argument("model: stable init point must satisfy 0 < |lambda| < 1");
            if (!flags.complex_field && !(init.stable.re > 0.0 && init.stable.im == 0.0)) {
                throw std::invalid_argument("model: real-field stable init needs a positive real point");
            }
        }
    }

    CesOptions ces_options() const {
        CesOptions o;
        o.max_lambda = max_lambda;
        o.bidirectional = bidirectional;
        o.kernel_norm = kernel_norm;
        o.flags = flags;
        return o;
    }
};

inline std::string layer_prefix(std::size_t layer) { return "layers." + std::to_string(layer) + "."; }

namespace detail {

inline void fill_uniform(std::vector<double>& v, double bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-bound, bound);
    for (auto& x : v) x = u(rng);
}

inline Complex initial_lambda(const ModelConfig& cfg, std::mt19937_64& rng) {
    if (cfg.init.kind == InitSpec::Kind::stable) {
        return {cfg.init.stable.re, cfg.init.stable.im};
    }
    const Complex z = sample_ring(cfg.init.ring, rng);
    // Real field keeps the sampled magnitude.
    return cfg.flags.complex_field ? z : Complex(std::abs(z), 0.0);
}

}  // namespace detail

/// Registers and initializes every parameter array of the model.
inline ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    ParamStore ps;
    const std::size_t d = cfg.d, h = cfg.hidden;
    {
        auto& e = ps.add("embed", {cfg.vocab_size, d}, -1, ParamRole::embedding, false);
        std::normal_distribution<double> nd(0.0, 1.0);
        for (auto& x : e.value) x = nd(rng);
    }
    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        const std::string p = layer_prefix(l);
        const int li = static_cast<int>(l);
        std::fill_n(ps.add(p + "norm.gamma", {d}, li, ParamRole::norm, false).value.begin(), d, 1.0);
        ps.add(p + "norm.beta", {d}, li, ParamRole::norm, false);
        detail::fill_uniform(ps.add(p + "w1", {d, h}, li, ParamRole::matrix, true).value, 1.0 / std::sqrt(double(d)), rng);
        ps.add(p + "b1", {h}, li, ParamRole::bias, false);

        auto& lf = ps.add(p + "ces.lambda_fwd", {h, 2}, li, ParamRole::ces_lambda, false);
        for (std::size_t c = 0; c < h; ++c) {
            const Complex lp = prime_from_lambda(detail::initial_lambda(cfg, rng));
            lf.value[2 * c] = lp.real();
            lf.value[2 * c + 1] = lp.imag();
        }
        if (cfg.bidirectional) {
            auto& lb = ps.add(p + "ces.lambda_bwd", {h, 2}, li, ParamRole::ces_lambda, false);
            for (std::size_t c = 0; c < h; ++c) {
                const Complex lp = prime_from_lambda(detail::initial_lambda(cfg, rng));
                lb.value[2 * c] = lp.real();
                lb.value[2 * c + 1] = lp.imag();
            }
        }
        for (const char* name : {"ces.alpha", "ces.beta"}) {
            auto& arr = ps.add(p + name, {h, 2}, li,
                               name[4] == 'a' ? ParamRole::ces_alpha : ParamRole::ces_beta, false);
            for (std::size_t c = 0; c < h; ++c) arr.value[2 * c] = 1.0;
        }
        ps.add(p + "ces.omega", {h}, li, ParamRole::ces_omega, false);

        detail::fill_uniform(ps.add(p + "w2", {h, d}, li, ParamRole::matrix, true).value, 1.0 / std::sqrt(double(h)), rng);
        ps.add(p + "b2", {d}, li, ParamRole::bias, false);
        if (cfg.gate) {
            detail::fill_uniform(ps.add(p + "wg", {d, d}, li, ParamRole::matrix, true).value, 1.0 / std::sqrt(double(d)),
                                 rng);
            ps.add(p + "bg", {d}, li, ParamRole::bias, false);
        }
    }
    std::fill_n(ps.add("norm.gamma", {d}, -1, ParamRole::norm, false).value.begin(), d, 1.0);
    ps.add("norm.beta", {d}, -1, ParamRole::norm, false);
    detail::fill_uniform(ps.add("head.w", {d, cfg.n_classes}, -1, ParamRole::matrix, true).value,
                         1.0 / std::sqrt(double(d)), rng);
    ps.add("head.b", {cfg.n_classes}, -1, ParamRole::bias, false);
    return ps;
}

/// Per-channel CES parameters of one layer, read from the store.
inline std::vector<CesChannelParams> layer_ces_params(const ParamStore& ps, const ModelConfig& cfg, std::size_t layer) {
    const std::string p = layer_prefix(layer);
    const auto& lf = ps.at(p + "ces.lambda_fwd").value;
    const auto& a = ps.at(p + "ces.alpha").value;
    const auto& b = ps.at(p + "ces.beta").value;
    const auto& w = ps.at(p + "ces.omega").value;
    const std::vector<double>* lb = cfg.bidirectional ? &ps.at(p + "ces.lambda_bwd").value : nullptr;
    std::vector<CesChannelParams> out(cfg.hidden);
    for (std::size_t c = 0; c < cfg.hidden; ++c) {
        out[c].lambda_prime_fwd = {lf[2 * c], lf[2 * c + 1]};
        if (lb) out[c].lambda_prime_bwd = {(*lb)[2 * c], (*lb)[2 * c + 1]};
        out[c].alpha = {a[2 * c], a[2 * c + 1]};
        out[c].beta = {b[2 * c], b[2 * c + 1]};
        out[c].omega = w[c];
    }
    return out;
}

/// Real counts behind the CES parameter overhead.
struct CesOverhead {
    std::size_t lambda_fwd = 0;
    std::size_t lambda_bwd = 0;
    std::size_t alpha = 0;
    std::size_t beta = 0;
    std::size_t omega = 0;
    /// W1 and W2 entries summed over layers.
    std::size_t mlp_matrices = 0;
    std::size_t total_params = 0;

    std::size_t numerator() const { return lambda_fwd + lambda_bwd + alpha + beta; }
    double ratio() const { return static_cast<double>(numerator()) / static_cast<double>(mlp_matrices); }
    double ratio_with_omega() const {
        return static_cast<double>(numerator() + omega) / static_cast<double>(mlp_matrices);
    }
    double share_of_total() const {
        return static_cast<double>(numerator() + omega) / static_cast<double>(total_params);
    }
    bool operator==(const CesOverhead&) const = default;
};

/// Overhead predicted from the configuration alone.
inline CesOverhead count_ces_overhead(const ModelConfig& cfg) {
    const std::size_t h = cfg.hidden, d = cfg.d, n = cfg.n_layers;
    CesOverhead o;
    o.lambda_fwd = 2 * h * n;
    o.lambda_bwd = cfg.bidirectional ? 2 * h * n : 0;
    o.alpha = 2 * h * n;
    o.beta = 2 * h * n;
    o.omega = h * n;
    o.mlp_matrices = 2 * d * h * n;
    const std::size_t per_layer = 2 * d + (d * h + h) + (o.numerator() + o.omega) / n + (h * d + d) +
                                  (cfg.gate ? d * d + d : 0);
    o.total_params = cfg.vocab_size * d + n * per_layer + 2 * d + d * cfg.n_classes + cfg.n_classes;
    return o;
}

/// Overhead counted from a live registry.
inline CesOverhead count_ces_overhead(const ParamStore& ps) {
    CesOverhead o;
    for (const auto& a : ps.arrays()) {
        o.total_params += a.size();
        const bool is_mlp = a.layer >= 0 && a.role == ParamRole::matrix &&
                            (a.name.ends_with(".w1") || a.name.ends_with(".w2"));
        if (is_mlp) o.mlp_matrices += a.size();
        switch (a.role) {
            case ParamRole::ces_lambda:
                (a.name.ends_with("lambda_bwd") ? o.lambda_bwd : o.lambda_fwd) += a.size();
                break;
            case ParamRole::ces_alpha: o.alpha += a.size(); break;
            case ParamRole::ces_beta: o.beta += a.size(); break;
            case ParamRole::ces_omega: o.omega += a.size(); break;
            default: break;
        }
    }
    return o;
}

struct ForwardMode {
    bool train = false;
    std::uint64_t dropout_seed = 0;
};

template <class T>
struct LayerCache {
    Buffer<T> gamma, beta, w1, b1, w2, b2, wg, bg;
    std::vector<CesChannelParams> ces_params;
    Buffer<T> xhat, rstd, xn;
    Buffer<T> hm, c, yd, zd, g;
    Buffer<T> mask_y, mask_z;
    CesCache<T> ces;
};

template <class T>
struct ModelCache {
    std::size_t batch = 0;
    std::size_t length = 0;
    std::vector<LayerCache<T>> layers;
    Buffer<T> norm_gamma, norm_beta, head_w, head_b;
    Buffer<T> xf_hat, xf_rstd, xfn, pooled;
    std::vector<double> counts;
    Buffer<T> token_mask;
};

namespace detail {

template <class T>
void load_param(const ParamStore& ps, const std::string& name, Buffer<T>& out) {
    const auto& v = ps.at(name).value;
    out.resize(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<T>(v[i]);
}

inline std::mt19937_64 dropout_rng(std::uint64_t seed, std::size_t layer, std::size_t site) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(layer), static_cast<std::uint32_t>(site)};
    return std::mt19937_64(seq);
}

inline void check_batch(const ModelConfig& cfg, const Batch& batch) {
    const std::size_t n = batch.size * batch.length;
    if (batch.tokens.size() != n || batch.mask.size() != n) throw std::invalid_argument("model: batch shape mismatch");
    for (const int t : batch.tokens) {
        if (t < 0 || static_cast<std::size_t>(t) >= cfg.vocab_size) {
            throw std::out_of_range("model: token id " + std::to_string(t) + " outside vocabulary");
        }
    }
}

}  // namespace detail

/// Logits of shape (batch, n_classes). Keeps activations in `cache` for model_backward.
template <class T>
std::vector<T> model_forward(const ModelConfig& cfg, const ParamStore& ps, const Batch& batch, const ForwardMode& mode,
                             ModelCache<T>& cache) {
    detail::check_batch(cfg, batch);
    const std::size_t bsz = batch.size, len = batch.length, d = cfg.d, h = cfg.hidden;
    const std::size_t rows = bsz * len;
    const CesOptions opt = cfg.ces_options();
    const double p_drop = mode.train ? cfg.dropout : 0.0;
    cache.batch = bsz;
    cache.length = len;
    cache.layers.resize(cfg.n_layers);

    cache.token_mask.resize(rows);
    for (std::size_t i = 0; i < rows; ++i) cache.token_mask[i] = batch.mask[i] ? T(1) : T(0);

    Buffer<T> x(rows * d);
    {
        const auto& e = ps.at("embed").value;
        for (std::size_t i = 0; i < rows; ++i) {
            const double* src = e.data() + static_cast<std::size_t>(batch.tokens[i]) * d;
            for (std::size_t c = 0; c < d; ++c) x[i * d + c] = static_cast<T>(src[c]);
        }
    }

    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        auto& lc = cache.layers[l];
        const std::string p = layer_prefix(l);
        detail::load_param(ps, p + "norm.gamma", lc.gamma);
        detail::load_param(ps, p + "norm.beta", lc.beta);
        detail::load_param(ps, p + "w1", lc.w1);
        detail::load_param(ps, p + "b1", lc.b1);
        detail::load_param(ps, p + "w2", lc.w2);
        detail::load_param(ps, p + "b2", lc.b2);
        if (cfg.gate) {
            detail::load_param(ps, p + "wg", lc.wg);
            detail::load_param(ps, p + "bg", lc.bg);
        }
        lc.ces_params = layer_ces_params(ps, cfg, l);

        lc.xhat.resize(rows * d);
        lc.rstd.resize(rows);
        lc.xn.resize(rows * d);
        layer_norm_forward(x.data(), rows, d, lc.gamma.data(), lc.beta.data(), lc.xn.data(), lc.xhat.data(),
                           lc.rstd.data());

        lc.hm.resize(rows * h);
        linear_forward(lc.xn.data(), rows, d, h, lc.w1.data(), lc.b1.data(), lc.hm.data());
        // Padding is zeroed before token mixing so it cannot leak into real positions.
        for (std::size_t i = 0; i < rows; ++i) {
            if (!batch.mask[i]) std::fill_n(lc.hm.data() + i * h, h, T(0));
        }

        lc.c.resize(rows * h);
        ces_forward_batch<T>(lc.hm, bsz, len, h, lc.ces_params, opt, lc.c, lc.ces);

        lc.mask_y.resize(rows * h);
        lc.yd.resize(rows * h);
        if (p_drop > 0.0) {
            auto rng = detail::dropout_rng(mode.dropout_seed, l, 0);
            dropout_mask<T>(lc.mask_y, p_drop, rng);
        } else {
            std::fill(lc.mask_y.begin(), lc.mask_y.end(), T(1));
        }
        for (std::size_t i = 0; i < rows * h; ++i) lc.yd[i] = (lc.c[i] > T(0) ? lc.c[i] : T(0)) * lc.mask_y[i];

        lc.zd.resize(rows * d);
        linear_forward(lc.yd.data(), rows, h, d, lc.w2.data(), lc.b2.data(), lc.zd.data());
        lc.mask_z.resize(rows * d);
        if (p_drop > 0.0) {
            auto rng = detail::dropout_rng(mode.dropout_seed, l, 1);
            dropout_mask<T>(lc.mask_z, p_drop, rng);
        } else {
            std::fill(lc.mask_z.begin(), lc.mask_z.end(), T(1));
        }
        for (std::size_t i = 0; i < rows * d; ++i) lc.zd[i] *= lc.mask_z[i];

        if (cfg.gate) {
            lc.g.resize(rows * d);
            linear_forward(lc.xn.data(), rows, d, d, lc.wg.data(), lc.bg.data(), lc.g.data());
            for (std::size_t i = 0; i < rows * d; ++i) {
                lc.g[i] = static_cast<T>(sigmoid(static_cast<double>(lc.g[i])));
                x[i] += lc.g[i] * lc.zd[i];
            }
        } else {
            lc.g.clear();
            for (std::size_t i = 0; i < rows * d; ++i) x[i] += lc.zd[i];
        }
    }

    detail::load_param(ps, "norm.gamma", cache.norm_gamma);
    detail::load_param(ps, "norm.beta", cache.norm_beta);
    detail::load_param(ps, "head.w", cache.head_w);
    detail::load_param(ps, "head.b", cache.head_b);
    cache.xf_hat.resize(rows * d);
    cache.xf_rstd.resize(rows);
    cache.xfn.resize(rows * d);
    layer_norm_forward(x.data(), rows, d, cache.norm_gamma.data(), cache.norm_beta.data(), cache.xfn.data(),
                       cache.xf_hat.data(), cache.xf_rstd.data());

    cache.pooled.assign(bsz * d, T(0));
    cache.counts.assign(bsz, 0.0);
    for (std::size_t b = 0; b < bsz; ++b) {
        std::vector<double> acc(d, 0.0);
        double count = 0.0;
        for (std::size_t t = 0; t < len; ++t) {
            if (!batch.mask[b * len + t]) continue;
            count += 1.0;
            const T* row = cache.xfn.data() + (b * len + t) * d;
            for (std::size_t c = 0; c < d; ++c) acc[c] += static_cast<double>(row[c]);
        }
        if (count == 0.0) throw std::invalid_argument("model: sequence without real tokens");
        cache.counts[b] = count;
        for (std::size_t c = 0; c < d; ++c) cache.pooled[b * d + c] = static_cast<T>(acc[c] / count);
    }

    std::vector<T> logits(bsz * cfg.n_classes);
    linear_forward(cache.pooled.data(), bsz, d, cfg.n_classes, cache.head_w.data(), cache.head_b.data(),
                   logits.data());
    return logits;
}

/// Accumulates parameter gradients of the loss whose logit gradient is `dlogits`.
template <class T>
void model_backward(const ModelConfig& cfg, ParamStore& ps, const Batch& batch, const ModelCache<T>& cache,
                    std::span<const T> dlogits) {
    const std::size_t bsz = cache.batch, len = cache.length, d = cfg.d, h = cfg.hidden;
    const std::size_t rows = bsz * len;
    if (dlogits.size() != bsz * cfg.n_classes) throw std::invalid_argument("model_backward: dlogits shape mismatch");
    const CesOptions opt = cfg.ces_options();

    Buffer<T> dpooled(bsz * d);
    linear_backward(dlogits.data(), cache.pooled.data(), bsz, d, cfg.n_classes, cache.head_w.data(), dpooled.data(),
                    false, std::span<double>(ps.at("head.w").grad), std::span<double>(ps.at("head.b").grad));

    Buffer<T> dxfn(rows * d, T(0));
    for (std::size_t b = 0; b < bsz; ++b) {
        const T inv = static_cast<T>(1.0 / cache.counts[b]);
        for (std::size_t t = 0; t < len; ++t) {
            if (!batch.mask[b * len + t]) continue;
            T* row = dxfn.data() + (b * len + t) * d;
            for (std::size_t c = 0; c < d; ++c) row[c] = dpooled[b * d + c] * inv;
        }
    }
    Buffer<T> dx(rows * d, T(0));
    layer_norm_backward(dxfn.data(), cache.xf_hat.data(), cache.xf_rstd.data(), cache.norm_gamma.data(), rows, d,
                        dx.data(), std::span<double>(ps.at("norm.gamma").grad),
                        std::span<double>(ps.at("norm.beta").grad));

    Buffer<T> dz(rows * d), dxn(rows * d), dy(rows * h), dc(rows * h), dh(rows * h);
    std::vector<CesParamGrad> ces_grads(h);
    for (std::size_t li = cfg.n_layers; li-- > 0;) {
        const auto& lc = cache.layers[li];
        const std::string p = layer_prefix(li);

        if (cfg.gate) {
            Buffer<T> dgpre(rows * d);
            for (std::size_t i = 0; i < rows * d; ++i) {
                const T g = lc.g[i];
                dz[i] = dx[i] * g * lc.mask_z[i];
                dgpre[i] = dx[i] * lc.zd[i] * g * (T(1) - g);
            }
            linear_backward(dgpre.data(), lc.xn.data(), rows, d, d, lc.wg.data(), dxn.data(), false,
                            std::span<double>(ps.at(p + "wg").grad), std::span<double>(ps.at(p + "bg").grad));
        } else {
            for (std::size_t i = 0; i < rows * d; ++i) dz[i] = dx[i] * lc.mask_z[i];
            std::fill(dxn.begin(), dxn.end(), T(0));
        }

        linear_backward(dz.data(), lc.yd.data(), rows, h, d, lc.w2.data(), dy.data(), false,
                        std::span<double>(ps.at(p + "w2").grad), std::span<double>(ps.at(p + "b2").grad));
        for (std::size_t i = 0; i < rows * h; ++i) dc[i] = lc.c[i] > T(0) ? dy[i] * lc.mask_y[i] : T(0);

        ces_backward_batch<T>(lc.hm, dc, lc.ces, opt, dh, ces_grads);
        for (std::size_t i = 0; i < rows; ++i) {
            if (!batch.mask[i]) std::fill_n(dh.data() + i * h, h, T(0));
        }
        {
            auto& glf = ps.at(p + "ces.lambda_fwd").grad;
            auto& ga = ps.at(p + "ces.alpha").grad;
            auto& gb = ps.at(p + "ces.beta").grad;
            auto& gw = ps.at(p + "ces.omega").grad;
            std::vector<double>* glb = cfg.bidirectional ? &ps.at(p + "ces.lambda_bwd").grad : nullptr;
            for (std::size_t c = 0; c < h; ++c) {
                const auto& g = ces_grads[c];
                glf[2 * c] += g.lambda_prime_fwd.real();
                glf[2 * c + 1] += g.lambda_prime_fwd.imag();
                if (glb) {
                    (*glb)[2 * c] += g.lambda_prime_bwd.real();
                    (*glb)[2 * c + 1] += g.lambda_prime_bwd.imag();
                }
                ga[2 * c] += g.alpha.real();
                ga[2 * c + 1] += g.alpha.imag();
                gb[2 * c] += g.beta.real();
                gb[2 * c + 1] += g.beta.imag();
                gw[c] += g.omega;
            }
        }

        linear_backward(dh.data(), lc.xn.data(), rows, d, h, lc.w1.data(), dxn.data(), true,
                        std::span<double>(ps.at(p + "w1").grad), std::span<double>(ps.at(p + "b1").grad));
        layer_norm_backward(dxn.data(), lc.xhat.data(), lc.rstd.data(), lc.gamma.data(), rows, d, dx.data(),
                            std::span<double>(ps.at(p + "norm.gamma").grad),
                            std::span<double>(ps.at(p + "norm.beta").grad));
    }

    auto& ge = ps.at("embed").grad;
    for (std::size_t i = 0; i < rows; ++i) {
        double* dst = ge.data() + static_cast<std::size_t>(batch.tokens[i]) * d;
        for (std::size_t c = 0; c < d; ++c) dst[c] += static_cast<double>(dx[i * d + c]);
    }
}

struct LossResult {
    double loss = 0.0;
    std::size_t correct = 0;
    std::size_t count = 0;
};

/// Forward + cross-entropy + backward; gradients accumulate into `ps`.
template <class T>
LossResult loss_and_grad(const ModelConfig& cfg, ParamStore& ps, const Batch& batch, const ForwardMode& mode) {
    ModelCache<T> cache;
    const auto logits = model_forward<T>(cfg, ps, batch, mode, cache);
    std::vector<T> dlogits(logits.size());
    LossResult r;
    r.loss = softmax_cross_entropy<T>(logits, cfg.n_classes, batch.labels, dlogits, &r.correct);
    r.count = batch.size;
    model_backward<T>(cfg, ps, batch, cache, dlogits);
    return r;
}

/// Evaluation loss without dropout or gradients.
template <class T>
LossResult model_loss(const ModelConfig& cfg, const ParamStore& ps, const Batch& batch) {
    ModelCache<T> cache;
    const auto logits = model_forward<T>(cfg, ps, batch, ForwardMode{}, cache);
    std::vector<T> dlogits(logits.size());
    LossResult r;
    r.loss = softmax_cross_entropy<T>(logits, cfg.n_classes, batch.labels, dlogits, &r.correct);
    r.count = batch.size;
    return r;
}

}  // namespace etsmlp

#endif  // ETSMLP_MODEL_HPP
