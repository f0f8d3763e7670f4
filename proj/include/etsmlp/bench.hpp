#ifndef ETSMLP_BENCH_HPP
#define ETSMLP_BENCH_HPP

// Train-step throughput and peak activation memory against sequence length,
// ETSMLP versus the single-head attention encoder, batch size 1.

#include <cblas.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <new>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "etsmlp/attention.hpp"
#include "etsmlp/memory.hpp"
#include "etsmlp/model.hpp"

namespace etsmlp {

struct BenchConfig {
    std::vector<std::size_t> lengths{512, 1024, 2048, 4096, 8192};
    std::vector<std::string> models{"etsmlp", "attention"};
    std::size_t trials = 3;
    std::size_t warmup = 1;
    /// A trial repeats the train step until at least this much time has passed.
    double min_trial_seconds = 0.25;
    std::size_t d = 64;
    std::size_t hidden = 256;
    std::size_t n_layers = 1;
    std::size_t vocab_size = 16;
    std::size_t n_classes = 10;
    bool gate = false;
    bool bidirectional = false;
    std::uint64_t seed = 0;

    void validate() const {
        if (lengths.empty()) throw std::invalid_argument("bench: no sequence lengths");
        if (trials < 3) throw std::invalid_argument("bench: trials must be >= 3");
        if (warmup < 1) throw std::invalid_argument("bench: warmup must be >= 1");
        if (!(min_trial_seconds >= 0.0)) throw std::invalid_argument("bench: min_trial_seconds must be >= 0");
        for (const auto& m : models) {
            if (m != "etsmlp" && m != "attention") throw std::invalid_argument("bench: unknown model '" + m + "'");
        }
        for (const auto l : lengths) {
            if (l < 1) throw std::invalid_argument("bench: sequence length must be >= 1");
        }
    }
};

struct BenchResult {
    std::string model;
    std::size_t seq_len = 0;
    /// Best of the timed trials; interference from other work only ever slows a trial down.
    double tokens_per_sec = 0.0;
    std::int64_t peak_bytes = 0;
    std::size_t trials = 0;
    /// Standard deviation of tokens_per_sec over the timed trials.
    double stddev = 0.0;
    /// Mean seconds per train step.
    double mean_seconds = 0.0;
    /// Logits were bit-identical in every trial.
    bool deterministic = true;
    /// Non-empty when the cell could not run (for example out of memory).
    std::string error;
};

struct Fit {
    std::vector<double> coef;  // lowest order first
    double r2 = 0.0;
};

inline ModelConfig bench_etsmlp_config(const BenchConfig& bc) {
    ModelConfig cfg;
    cfg.vocab_size = bc.vocab_size;
    cfg.n_classes = bc.n_classes;
    cfg.d = bc.d;
    cfg.hidden = bc.hidden;
    cfg.n_layers = bc.n_layers;
    cfg.gate = bc.gate;
    cfg.bidirectional = bc.bidirectional;
    return cfg;
}

inline std::size_t attention_param_count(const AttentionConfig& a) {
    const std::size_t d = a.d, h = a.hidden;
    const std::size_t per_layer = 4 * d + 4 * d * d + d + 2 * d * h + h + d;
    return a.vocab_size * d + a.n_layers * per_layer + 2 * d + d * a.n_classes + a.n_classes;
}

/// Attention encoder whose MLP width brings its parameter count closest to the ETSMLP model.
inline AttentionConfig bench_attention_config(const BenchConfig& bc) {
    const std::size_t target = init_params(bench_etsmlp_config(bc), 0).total_size();
    AttentionConfig best;
    std::size_t best_gap = SIZE_MAX;
    for (std::size_t h = 1; h <= 4 * bc.hidden; ++h) {
        AttentionConfig a{bc.vocab_size, bc.n_classes, bc.d, h, bc.n_layers};
        const std::size_t n = attention_param_count(a);
        const std::size_t gap = n > target ? n - target : target - n;
        if (gap < best_gap) {
            best_gap = gap;
            best = a;
        }
    }
    return best;
}

namespace detail {

template <class T>
bool same_bits(const std::vector<T>& a, const std::vector<T>& b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](T x, T y) {
               return std::memcmp(&x, &y, sizeof(T)) == 0;
           });
}

inline Batch bench_batch(std::size_t length, std::size_t vocab, std::size_t classes, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> tok(0, static_cast<int>(vocab) - 1);
    Batch b;
    b.size = 1;
    b.length = length;
    b.lengths = {length};
    b.tokens.resize(length);
    for (auto& t : b.tokens) t = tok(rng);
    b.mask.assign(length, 1);
    b.labels = {static_cast<int>(rng() % classes)};
    return b;
}

struct StepSample {
    double seconds = 0.0;
    std::int64_t peak = 0;
    std::vector<float> logits;
};

inline StepSample etsmlp_step(const ModelConfig& cfg, ParamStore& ps, const Batch& batch) {
    StepSample s;
    ps.zero_grad();
    const auto start = std::chrono::steady_clock::now();
    {
        PeakScope scope;
        {
            ModelCache<float> cache;
            s.logits = model_forward<float>(cfg, ps, batch, ForwardMode{}, cache);
            std::vector<float> dl(s.logits.size());
            softmax_cross_entropy<float>(s.logits, cfg.n_classes, batch.labels, dl);
            model_backward<float>(cfg, ps, batch, cache, dl);
        }
        s.peak = scope.peak_bytes();
    }
    s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return s;
}

inline StepSample attention_step(const AttentionConfig& cfg, ParamStore& ps, const Batch& batch) {
    StepSample s;
    ps.zero_grad();
    const auto start = std::chrono::steady_clock::now();
    {
        PeakScope scope;
        {
            AttentionCache<float> cache;
            s.logits = attention_model_forward<float>(cfg, ps, batch, cache);
            std::vector<float> dl(s.logits.size());
            softmax_cross_entropy<float>(s.logits, cfg.n_classes, batch.labels, dl);
            attention_model_backward<float>(cfg, ps, batch, cache, dl);
        }
        s.peak = scope.peak_bytes();
    }
    s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return s;
}

}  // namespace detail

namespace detail {

inline void summarize(BenchResult& r, const std::vector<double>& tps, double seconds, std::size_t steps) {
    const double n = static_cast<double>(tps.size());
    r.trials = tps.size();
    r.mean_seconds = seconds / static_cast<double>(steps);
    r.tokens_per_sec = *std::max_element(tps.begin(), tps.end());
    const double mean = std::accumulate(tps.begin(), tps.end(), 0.0) / n;
    double var = 0.0;
    for (const double v : tps) var += (v - mean) * (v - mean);
    r.stddev = std::sqrt(var / std::max(1.0, n - 1.0));
}

}  // namespace detail

/// Runs every (model, length) cell; a failing cell is reported in its error field.
/// Trials visit the lengths of a model in turn, so slow drift of the machine
/// affects every length alike.
inline std::vector<BenchResult> run_sweep(const BenchConfig& bc) {
    bc.validate();
    openblas_set_num_threads(1);
    const ModelConfig ecfg = bench_etsmlp_config(bc);
    const AttentionConfig acfg = bench_attention_config(bc);
    ParamStore eps = init_params(ecfg, bc.seed);
    ParamStore aps = init_attention_params(acfg, bc.seed);
    std::vector<BenchResult> out;
    for (const auto& model : bc.models) {
        const std::size_t cells = bc.lengths.size();
        std::vector<BenchResult> rows(cells);
        std::vector<Batch> batches(cells);
        std::vector<std::vector<float>> reference(cells);
        std::vector<std::vector<double>> tps(cells);
        std::vector<double> seconds(cells, 0.0);
        std::vector<std::size_t> steps(cells, 0);
        auto step = [&](std::size_t i) {
            return model == "etsmlp" ? detail::etsmlp_step(ecfg, eps, batches[i])
                                     : detail::attention_step(acfg, aps, batches[i]);
        };
        auto guarded = [&](std::size_t i, auto&& body) {
            if (!rows[i].error.empty()) return;
            try {
                body();
            } catch (const std::bad_alloc&) {
                rows[i].error = "out of memory";
            } catch (const std::length_error&) {
                rows[i].error = "out of memory";
            }
        };
        for (std::size_t i = 0; i < cells; ++i) {
            const std::size_t len = bc.lengths[i];
            rows[i].model = model;
            rows[i].seq_len = len;
            guarded(i, [&] {
                batches[i] = detail::bench_batch(len, bc.vocab_size, bc.n_classes, bc.seed + len);
                for (std::size_t w = 0; w < bc.warmup; ++w) reference[i] = step(i).logits;
            });
        }
        for (std::size_t t = 0; t < bc.trials; ++t) {
            for (std::size_t i = 0; i < cells; ++i) {
                guarded(i, [&] {
                    double elapsed = 0.0;
                    std::size_t reps = 0;
                    do {
                        const auto s = step(i);
                        rows[i].peak_bytes = std::max(rows[i].peak_bytes, s.peak);
                        if (!detail::same_bits(s.logits, reference[i])) rows[i].deterministic = false;
                        elapsed += s.seconds;
                        ++reps;
                    } while (elapsed < bc.min_trial_seconds);
                    tps[i].push_back(static_cast<double>(bc.lengths[i] * reps) / elapsed);
                    seconds[i] += elapsed;
                    steps[i] += reps;
                });
            }
        }
        for (std::size_t i = 0; i < cells; ++i) {
            if (rows[i].error.empty()) detail::summarize(rows[i], tps[i], seconds[i], steps[i]);
            out.push_back(rows[i]);
        }
    }
    return out;
}

inline void write_bench_csv(std::ostream& os, const std::vector<BenchResult>& rows) {
    os << "model,seq_len,tokens_per_sec,peak_bytes,trials,stddev\n";
    os.precision(10);
    for (const auto& r : rows) {
        if (!r.error.empty()) {
            os << r.model << ',' << r.seq_len << ",nan,nan,0,nan\n";
            continue;
        }
        os << r.model << ',' << r.seq_len << ',' << r.tokens_per_sec << ',' << r.peak_bytes << ',' << r.trials << ','
           << r.stddev << '\n';
    }
}

/// Least-squares polynomial fit of the given degree (1 or 2) with its R^2.
inline Fit fit_polynomial(const std::vector<double>& x, const std::vector<double>& y, int degree) {
    if (degree < 1 || degree > 2) throw std::invalid_argument("fit_polynomial: degree must be 1 or 2");
    const std::size_t n = x.size(), m = static_cast<std::size_t>(degree) + 1;
    if (n != y.size() || n < m) throw std::invalid_argument("fit_polynomial: not enough points");
    const double scale = *std::max_element(x.begin(), x.end());
    std::array<std::array<double, 4>, 3> a{};
    for (std::size_t i = 0; i < n; ++i) {
        const double u = x[i] / scale;
        std::array<double, 3> p{1.0, u, u * u};
        for (std::size_t r = 0; r < m; ++r) {
            for (std::size_t c = 0; c < m; ++c) a[r][c] += p[r] * p[c];
            a[r][m] += p[r] * y[i];
        }
    }
    for (std::size_t c = 0; c < m; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < m; ++r) {
            if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
        }
        std::swap(a[c], a[piv]);
        for (std::size_t r = 0; r < m; ++r) {
            if (r == c) continue;
            const double f = a[r][c] / a[c][c];
            for (std::size_t k = c; k <= m; ++k) a[r][k] -= f * a[c][k];
        }
    }
    Fit fit;
    for (std::size_t c = 0; c < m; ++c) fit.coef.push_back(a[c][m] / a[c][c] / std::pow(scale, double(c)));
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double pred = 0.0;
        for (std::size_t c = 0; c < m; ++c) pred += fit.coef[c] * std::pow(x[i], double(c));
        ss_res += (y[i] - pred) * (y[i] - pred);
        ss_tot += (y[i] - mean) * (y[i] - mean);
    }
    fit.r2 = ss_tot == 0.0 ? 1.0 : 1.0 - ss_res / ss_tot;
    return fit;
}

/// (time per token at `to`) / (time per token at `from`) for one model.
inline double per_token_time_ratio(const std::vector<BenchResult>& rows, const std::string& model, std::size_t from,
                                   std::size_t to) {
    const BenchResult* a = nullptr;
    const BenchResult* b = nullptr;
    for (const auto& r : rows) {
        if (r.model != model || !r.error.empty()) continue;
        if (r.seq_len == from) a = &r;
        if (r.seq_len == to) b = &r;
    }
    if (!a || !b) throw std::invalid_argument("per_token_time_ratio: missing cell for " + model);
    return a->tokens_per_sec / b->tokens_per_sec;
}

}  // namespace etsmlp

#endif  // ETSMLP_BENCH_HPP
