#ifndef ETSMLP_LAYERS_HPP
#define ETSMLP_LAYERS_HPP

// Row-major building blocks over (rows, channels) views. Parameter gradients
// accumulate into double buffers; activation gradients are written in T.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "etsmlp/blas.hpp"
#include "etsmlp/memory.hpp"

namespace etsmlp {

inline constexpr double kLayerNormEps = 1e-5;

template <class T>
void add_into(std::span<double> acc, std::span<const T> v) {
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += static_cast<double>(v[i]);
}

/// y = x W + b with W stored (in, out).
template <class T>
void linear_forward(const T* x, std::size_t rows, std::size_t in, std::size_t out, const T* w, const T* b, T* y) {
    for (std::size_t r = 0; r < rows; ++r) std::copy(b, b + out, y + r * out);
    if (rows == 0) return;
    gemm(false, false, rows, out, in, T(1), x, w, T(1), y);
}

/// dx = dy W^T (overwrite, or accumulate when accumulate_dx), dW += x^T dy, db += colsum(dy).
template <class T>
void linear_backward(const T* dy, const T* x, std::size_t rows, std::size_t in, std::size_t out, const T* w,
                     T* dx, bool accumulate_dx, std::span<double> dw, std::span<double> db) {
    if (rows == 0) return;
    if (dx) gemm(false, true, rows, in, out, T(1), dy, w, accumulate_dx ? T(1) : T(0), dx);
    Buffer<T> tmp(in * out);
    gemm(true, false, in, out, rows, T(1), x, dy, T(0), tmp.data());
    add_into<T>(dw, tmp);
    std::vector<double> col(out, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        const T* row = dy + r * out;
        for (std::size_t c = 0; c < out; ++c) col[c] += static_cast<double>(row[c]);
    }
    for (std::size_t c = 0; c < out; ++c) db[c] += col[c];
}

/// Per-row LayerNorm; keeps the normalized rows and reciprocal deviations.
template <class T>
void layer_norm_forward(const T* x, std::size_t rows, std::size_t dim, const T* gamma, const T* beta, T* y,
                        T* xhat, T* rstd) {
    if (dim == 0) throw std::invalid_argument("layer_norm: channels must be >= 1");
    for (std::size_t r = 0; r < rows; ++r) {
        const T* xr = x + r * dim;
        double mean = 0.0;
        for (std::size_t c = 0; c < dim; ++c) mean += static_cast<double>(xr[c]);
        mean /= static_cast<double>(dim);
        double var = 0.0;
        for (std::size_t c = 0; c < dim; ++c) {
            const double d = static_cast<double>(xr[c]) - mean;
            var += d * d;
        }
        var /= static_cast<double>(dim);
        const double rs = 1.0 / std::sqrt(var + kLayerNormEps);
        rstd[r] = static_cast<T>(rs);
        for (std::size_t c = 0; c < dim; ++c) {
            const T h = static_cast<T>((static_cast<double>(xr[c]) - mean) * rs);
            xhat[r * dim + c] = h;
            y[r * dim + c] = gamma[c] * h + beta[c];
        }
    }
}

/// dx += LayerNorm backward; dgamma, dbeta accumulate.
template <class T>
void layer_norm_backward(const T* dy, const T* xhat, const T* rstd, const T* gamma, std::size_t rows, std::size_t dim,
                         T* dx, std::span<double> dgamma, std::span<double> dbeta) {
    std::vector<double> g(dim);
    for (std::size_t r = 0; r < rows; ++r) {
        const T* dyr = dy + r * dim;
        const T* hr = xhat + r * dim;
        double sum_g = 0.0, sum_gh = 0.0;
        for (std::size_t c = 0; c < dim; ++c) {
            dgamma[c] += static_cast<double>(dyr[c]) * static_cast<double>(hr[c]);
            dbeta[c] += static_cast<double>(dyr[c]);
            g[c] = static_cast<double>(dyr[c]) * static_cast<double>(gamma[c]);
            sum_g += g[c];
            sum_gh += g[c] * static_cast<double>(hr[c]);
        }
        const double inv = 1.0 / static_cast<double>(dim);
        const double rs = static_cast<double>(rstd[r]);
        for (std::size_t c = 0; c < dim; ++c) {
            const double v = rs * (g[c] - inv * sum_g - static_cast<double>(hr[c]) * inv * sum_gh);
            dx[r * dim + c] += static_cast<T>(v);
        }
    }
}

/// Inverted dropout mask: 0 or 1/(1-p).
template <class T>
void dropout_mask(std::span<T> mask, double p, std::mt19937_64& rng) {
    if (p <= 0.0) {
        std::fill(mask.begin(), mask.end(), T(1));
        return;
    }
    std::bernoulli_distribution keep(1.0 - p);
    const T scale = static_cast<T>(1.0 / (1.0 - p));
    for (auto& m : mask) m = keep(rng) ? scale : T(0);
}

/// Mean softmax cross-entropy over rows; writes dlogits of the mean loss.
template <class T>
double softmax_cross_entropy(std::span<const T> logits, std::size_t classes, std::span<const int> labels,
                             std::span<T> dlogits, std::size_t* correct = nullptr) {
    const std::size_t rows = labels.size();
    if (logits.size() != rows * classes || dlogits.size() != logits.size()) {
        throw std::invalid_argument("softmax_cross_entropy: shape mismatch");
    }
    double loss = 0.0;
    std::size_t hits = 0;
    std::vector<double> p(classes);
    for (std::size_t r = 0; r < rows; ++r) {
        const T* z = logits.data() + r * classes;
        const int label = labels[r];
        if (label < 0 || static_cast<std::size_t>(label) >= classes) {
            throw std::out_of_range("softmax_cross_entropy: label out of range");
        }
        std::size_t arg = 0;
        double zmax = static_cast<double>(z[0]);
        for (std::size_t c = 1; c < classes; ++c) {
            if (static_cast<double>(z[c]) > zmax) {
                zmax = static_cast<double>(z[c]);
                arg = c;
            }
        }
        if (arg == static_cast<std::size_t>(label)) ++hits;
        double sum = 0.0;
        for (std::size_t c = 0; c < classes; ++c) {
            p[c] = std::exp(static_cast<double>(z[c]) - zmax);
            sum += p[c];
        }
        loss += std::log(sum) + zmax - static_cast<double>(z[label]);
        for (std::size_t c = 0; c < classes; ++c) {
            const double grad = p[c] / sum - (c == static_cast<std::size_t>(label) ? 1.0 : 0.0);
            dlogits[r * classes + c] = static_cast<T>(grad / static_cast<double>(rows));
        }
    }
    if (correct) *correct = hits;
    return rows ? loss / static_cast<double>(rows) : 0.0;
}

/// Index of the largest entry in each row; ties resolve to the lowest index.
template <class T>
std::vector<int> argmax_rows(std::span<const T> logits, std::size_t classes) {
    std::vector<int> out(classes ? logits.size() / classes : 0);
    for (std::size_t r = 0; r < out.size(); ++r) {
        const T* z = logits.data() + r * classes;
        out[r] = static_cast<int>(std::max_element(z, z + classes) - z);
    }
    return out;
}

}  // namespace etsmlp

#endif  // ETSMLP_LAYERS_HPP
