#ifndef ETSMLP_ATTENTION_HPP
#define ETSMLP_ATTENTION_HPP

// Single-head softmax attention encoder used as the quadratic-cost baseline:
// embedding, [pre-norm attention + residual, pre-norm ReLU MLP + residual]
// per layer, final LayerNorm, masked mean pooling and a linear head.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "etsmlp/batch.hpp"
#include "etsmlp/layers.hpp"
#include "etsmlp/memory.hpp"
#include "etsmlp/param_store.hpp"

namespace etsmlp {

struct AttentionConfig {
    std::size_t vocab_size = 16;
    std::size_t n_classes = 10;
    std::size_t d = 64;
    std::size_t hidden = 128;
    std::size_t n_layers = 1;
};

/// softmax(Q K^T / sqrt(d)) V per batch element; keys with mask 0 are ignored.
/// q, k, v, out: (batch, length, d); probs: (batch, length, length).
template <class T>
void attention_core_forward(const T* q, const T* k, const T* v, const std::uint8_t* key_mask, std::size_t batch,
                            std::size_t length, std::size_t d, T* probs, T* out) {
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(d)));
    for (std::size_t b = 0; b < batch; ++b) {
        const T* qb = q + b * length * d;
        const T* kb = k + b * length * d;
        const T* vb = v + b * length * d;
        T* pb = probs + b * length * length;
        gemm(false, true, length, length, d, scale, qb, kb, T(0), pb);
        for (std::size_t i = 0; i < length; ++i) {
            T* row = pb + i * length;
            T mx = -std::numeric_limits<T>::infinity();
            for (std::size_t j = 0; j < length; ++j) {
                if (key_mask && !key_mask[b * length + j]) continue;
                mx = std::max(mx, row[j]);
            }
            T sum = 0;
            for (std::size_t j = 0; j < length; ++j) {
                const bool live = !key_mask || key_mask[b * length + j];
                row[j] = live ? std::exp(row[j] - mx) : T(0);
                sum += row[j];
            }
            const T inv = T(1) / sum;
            for (std::size_t j = 0; j < length; ++j) row[j] *= inv;
        }
        gemm(false, false, length, d, length, T(1), pb, vb, T(0), out + b * length * d);
    }
}

/// Gradients of attention_core_forward with respect to q, k, v (overwritten).
template <class T>
void attention_core_backward(const T* q, const T* k, const T* v, const T* probs, const T* dout, std::size_t batch,
                             std::size_t length, std::size_t d, T* dq, T* dk, T* dv) {
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(d)));
    Buffer<T> ds(length * length);
    for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t off = b * length * d;
        const T* pb = probs + b * length * length;
        gemm(true, false, length, d, length, T(1), pb, dout + off, T(0), dv + off);
        gemm(false, true, length, length, d, T(1), dout + off, v + off, T(0), ds.data());
        for (std::size_t i = 0; i < length; ++i) {
            T* row = ds.data() + i * length;
            const T* prow = pb + i * length;
            T dot = 0;
            for (std::size_t j = 0; j < length; ++j) dot += row[j] * prow[j];
            for (std::size_t j = 0; j < length; ++j) row[j] = prow[j] * (row[j] - dot);
        }
        gemm(false, false, length, d, length, scale, ds.data(), k + off, T(0), dq + off);
        gemm(true, false, length, d, length, scale, ds.data(), q + off, T(0), dk + off);
    }
}

inline ParamStore init_attention_params(const AttentionConfig& cfg, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    ParamStore ps;
    const std::size_t d = cfg.d, h = cfg.hidden;
    auto uniform = [&](std::vector<double>& v, std::size_t fan_in) {
        std::uniform_real_distribution<double> u(-1.0 / std::sqrt(double(fan_in)), 1.0 / std::sqrt(double(fan_in)));
        for (auto& x : v) x = u(rng);
    };
    {
        auto& e = ps.add("embed", {cfg.vocab_size, d}, -1, ParamRole::embedding, false);
        std::normal_distribution<double> nd(0.0, 1.0);
        for (auto& x : e.value) x = nd(rng);
    }
    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        const std::string p = "layers." + std::to_string(l) + ".";
        const int li = static_cast<int>(l);
        for (const char* ln : {"ln1", "ln2"}) {
            std::fill_n(ps.add(p + ln + ".gamma", {d}, li, ParamRole::norm, false).value.begin(), d, 1.0);
            ps.add(p + ln + ".beta", {d}, li, ParamRole::norm, false);
        }
        for (const char* w : {"wq", "wk", "wv", "wo"}) uniform(ps.add(p + w, {d, d}, li, ParamRole::matrix, true).value, d);
        ps.add(p + "bo", {d}, li, ParamRole::bias, false);
        uniform(ps.add(p + "w1", {d, h}, li, ParamRole::matrix, true).value, d);
        ps.add(p + "b1", {h}, li, ParamRole::bias, false);
        uniform(ps.add(p + "w2", {h, d}, li, ParamRole::matrix, true).value, h);
        ps.add(p + "b2", {d}, li, ParamRole::bias, false);
    }
    std::fill_n(ps.add("norm.gamma", {d}, -1, ParamRole::norm, false).value.begin(), d, 1.0);
    ps.add("norm.beta", {d}, -1, ParamRole::norm, false);
    uniform(ps.add("head.w", {d, cfg.n_classes}, -1, ParamRole::matrix, true).value, d);
    ps.add("head.b", {cfg.n_classes}, -1, ParamRole::bias, false);
    return ps;
}

template <class T>
struct AttentionLayerCache {
    Buffer<T> g1, b1n, wq, wk, wv, wo, bo, g2, b2n, w1, b1, w2, b2;
    Buffer<T> xhat1, rstd1, xn1, q, k, v, probs, att;
    Buffer<T> xhat2, rstd2, xn2, hpre, hact;
};

template <class T>
struct AttentionCache {
    std::size_t batch = 0;
    std::size_t length = 0;
    std::vector<AttentionLayerCache<T>> layers;
    Buffer<T> norm_gamma, norm_beta, head_w, head_b;
    Buffer<T> xf_hat, xf_rstd, xfn, pooled;
    std::vector<double> counts;
};

namespace detail {

template <class T>
void load_attention_param(const ParamStore& ps, const std::string& name, Buffer<T>& out) {
    const auto& v = ps.at(name).value;
    out.resize(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<T>(v[i]);
}

}  // namespace detail

template <class T>
std::vector<T> attention_model_forward(const AttentionConfig& cfg, const ParamStore& ps, const Batch& batch,
                                       AttentionCache<T>& cache) {
    const std::size_t bsz = batch.size, len = batch.length, d = cfg.d, h = cfg.hidden, rows = bsz * len;
    for (const int t : batch.tokens) {
        if (t < 0 || static_cast<std::size_t>(t) >= cfg.vocab_size) throw std::out_of_range("attention: token id outside vocabulary");
    }
    cache.batch = bsz;
    cache.length = len;
    cache.layers.resize(cfg.n_layers);
    Buffer<T> x(rows * d), tmp(rows * d);
    const auto& e = ps.at("embed").value;
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t c = 0; c < d; ++c) x[i * d + c] = static_cast<T>(e[static_cast<std::size_t>(batch.tokens[i]) * d + c]);
    }
    const std::vector<T> zero_bias(std::max(d, h), T(0));
    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        auto& lc = cache.layers[l];
        const std::string p = "layers." + std::to_string(l) + ".";
        detail::load_attention_param(ps, p + "ln1.gamma", lc.g1);
        detail::load_attention_param(ps, p + "ln1.beta", lc.b1n);
        detail::load_attention_param(ps, p + "ln2.gamma", lc.g2);
        detail::load_attention_param(ps, p + "ln2.beta", lc.b2n);
        detail::load_attention_param(ps, p + "wq", lc.wq);
        detail::load_attention_param(ps, p + "wk", lc.wk);
        detail::load_attention_param(ps, p + "wv", lc.wv);
        detail::load_attention_param(ps, p + "wo", lc.wo);
        detail::load_attention_param(ps, p + "bo", lc.bo);
        detail::load_attention_param(ps, p + "w1", lc.w1);
        detail::load_attention_param(ps, p + "b1", lc.b1);
        detail::load_attention_param(ps, p + "w2", lc.w2);
        detail::load_attention_param(ps, p + "b2", lc.b2);

        lc.xhat1.resize(rows * d);
        lc.rstd1.resize(rows);
        lc.xn1.resize(rows * d);
        layer_norm_forward(x.data(), rows, d, lc.g1.data(), lc.b1n.data(), lc.xn1.data(), lc.xhat1.data(), lc.rstd1.data());
        lc.q.resize(rows * d);
        lc.k.resize(rows * d);
        lc.v.resize(rows * d);
        linear_forward(lc.xn1.data(), rows, d, d, lc.wq.data(), zero_bias.data(), lc.q.data());
        linear_forward(lc.xn1.data(), rows, d, d, lc.wk.data(), zero_bias.data(), lc.k.data());
        linear_forward(lc.xn1.data(), rows, d, d, lc.wv.data(), zero_bias.data(), lc.v.data());
        lc.probs.resize(bsz * len * len);
        lc.att.resize(rows * d);
        attention_core_forward(lc.q.data(), lc.k.data(), lc.v.data(), batch.mask.data(), bsz, len, d, lc.probs.data(),
                               lc.att.data());
        linear_forward(lc.att.data(), rows, d, d, lc.wo.data(), lc.bo.data(), tmp.data());
        for (std::size_t i = 0; i < rows * d; ++i) x[i] += tmp[i];

        lc.xhat2.resize(rows * d);
        lc.rstd2.resize(rows);
        lc.xn2.resize(rows * d);
        layer_norm_forward(x.data(), rows, d, lc.g2.data(), lc.b2n.data(), lc.xn2.data(), lc.xhat2.data(), lc.rstd2.data());
        lc.hpre.resize(rows * h);
        lc.hact.resize(rows * h);
        linear_forward(lc.xn2.data(), rows, d, h, lc.w1.data(), lc.b1.data(), lc.hpre.data());
        for (std::size_t i = 0; i < rows * h; ++i) lc.hact[i] = lc.hpre[i] > T(0) ? lc.hpre[i] : T(0);
        linear_forward(lc.hact.data(), rows, h, d, lc.w2.data(), lc.b2.data(), tmp.data());
        for (std::size_t i = 0; i < rows * d; ++i) x[i] += tmp[i];
    }
    detail::load_attention_param(ps, "norm.gamma", cache.norm_gamma);
    detail::load_attention_param(ps, "norm.beta", cache.norm_beta);
    detail::load_attention_param(ps, "head.w", cache.head_w);
    detail::load_attention_param(ps, "head.b", cache.head_b);
    cache.xf_hat.resize(rows * d);
    cache.xf_rstd.resize(rows);
    cache.xfn.resize(rows * d);
    layer_norm_forward(x.data(), rows, d, cache.norm_gamma.data(), cache.norm_beta.data(), cache.xfn.data(),
                       cache.xf_hat.data(), cache.xf_rstd.data());
    cache.pooled.assign(bsz * d, T(0));
    cache.counts.assign(bsz, 0.0);
    for (std::size_t b = 0; b < bsz; ++b) {
        std::vector<double> acc(d, 0.0);
        for (std::size_t t = 0; t < len; ++t) {
            if (!batch.mask[b * len + t]) continue;
            cache.counts[b] += 1.0;
            for (std::size_t c = 0; c < d; ++c) acc[c] += static_cast<double>(cache.xfn[(b * len + t) * d + c]);
        }
        if (cache.counts[b] == 0.0) throw std::invalid_argument("attention: sequence without real tokens");
        for (std::size_t c = 0; c < d; ++c) cache.pooled[b * d + c] = static_cast<T>(acc[c] / cache.counts[b]);
    }
    std::vector<T> logits(bsz * cfg.n_classes);
    linear_forward(cache.pooled.data(), bsz, d, cfg.n_classes, cache.head_w.data(), cache.head_b.data(), logits.data());
    return logits;
}

template <class T>
void attention_model_backward(const AttentionConfig& cfg, ParamStore& ps, const Batch& batch,
                              const AttentionCache<T>& cache, std::span<const T> dlogits) {
    const std::size_t bsz = cache.batch, len = cache.length, d = cfg.d, h = cfg.hidden, rows = bsz * len;
    Buffer<T> dpooled(bsz * d);
    linear_backward(dlogits.data(), cache.pooled.data(), bsz, d, cfg.n_classes, cache.head_w.data(), dpooled.data(),
                    false, std::span<double>(ps.at("head.w").grad), std::span<double>(ps.at("head.b").grad));
    Buffer<T> dxfn(rows * d, T(0)), dx(rows * d, T(0));
    for (std::size_t b = 0; b < bsz; ++b) {
        const T inv = static_cast<T>(1.0 / cache.counts[b]);
        for (std::size_t t = 0; t < len; ++t) {
            if (!batch.mask[b * len + t]) continue;
            for (std::size_t c = 0; c < d; ++c) dxfn[(b * len + t) * d + c] = dpooled[b * d + c] * inv;
        }
    }
    layer_norm_backward(dxfn.data(), cache.xf_hat.data(), cache.xf_rstd.data(), cache.norm_gamma.data(), rows, d,
                        dx.data(), std::span<double>(ps.at("norm.gamma").grad), std::span<double>(ps.at("norm.beta").grad));
    Buffer<T> dh(rows * h), dxn(rows * d), datt(rows * d), dq(rows * d), dk(rows * d), dv(rows * d);
    std::vector<double> sink(d, 0.0);
    for (std::size_t li = cfg.n_layers; li-- > 0;) {
        const auto& lc = cache.layers[li];
        const std::string p = "layers." + std::to_string(li) + ".";
        auto grad = [&](const char* name) { return std::span<double>(ps.at(p + name).grad); };

        linear_backward(dx.data(), lc.hact.data(), rows, h, d, lc.w2.data(), dh.data(), false, grad("w2"), grad("b2"));
        for (std::size_t i = 0; i < rows * h; ++i) {
            if (lc.hpre[i] <= T(0)) dh[i] = T(0);
        }
        linear_backward(dh.data(), lc.xn2.data(), rows, d, h, lc.w1.data(), dxn.data(), false, grad("w1"), grad("b1"));
        layer_norm_backward(dxn.data(), lc.xhat2.data(), lc.rstd2.data(), lc.g2.data(), rows, d, dx.data(),
                            grad("ln2.gamma"), grad("ln2.beta"));

        linear_backward(dx.data(), lc.att.data(), rows, d, d, lc.wo.data(), datt.data(), false, grad("wo"), grad("bo"));
        attention_core_backward(lc.q.data(), lc.k.data(), lc.v.data(), lc.probs.data(), datt.data(), bsz, len, d,
                                dq.data(), dk.data(), dv.data());
        std::fill(sink.begin(), sink.end(), 0.0);
        linear_backward(dq.data(), lc.xn1.data(), rows, d, d, lc.wq.data(), dxn.data(), false, grad("wq"),
                        std::span<double>(sink));
        linear_backward(dk.data(), lc.xn1.data(), rows, d, d, lc.wk.data(), dxn.data(), true, grad("wk"),
                        std::span<double>(sink));
        linear_backward(dv.data(), lc.xn1.data(), rows, d, d, lc.wv.data(), dxn.data(), true, grad("wv"),
                        std::span<double>(sink));
        layer_norm_backward(dxn.data(), lc.xhat1.data(), lc.rstd1.data(), lc.g1.data(), rows, d, dx.data(),
                            grad("ln1.gamma"), grad("ln1.beta"));
    }
    auto& ge = ps.at("embed").grad;
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t c = 0; c < d; ++c) {
            ge[static_cast<std::size_t>(batch.tokens[i]) * d + c] += static_cast<double>(dx[i * d + c]);
        }
    }
}

}  // namespace etsmlp

#endif  // ETSMLP_ATTENTION_HPP
