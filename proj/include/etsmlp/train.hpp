#ifndef ETSMLP_TRAIN_HPP
#define ETSMLP_TRAIN_HPP

// Epoch loop: length-bucketed shuffled batches, Adam with the warmup/decay
// schedule, held-out evaluation after every epoch and best-model tracking.

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "etsmlp/model.hpp"
#include "etsmlp/optim.hpp"
#include "etsmlp/tasks.hpp"

namespace etsmlp {

struct LoopConfig {
    std::size_t epochs = 10;
    std::size_t batch_size = 32;
    /// Stop after the first epoch whose held-out accuracy reaches this value (0 disables).
    double stop_at_acc = 0.0;
    /// Batches are cut from pools of this many batches sorted by length.
    std::size_t bucket_batches = 16;
};

struct EpochMetrics {
    std::size_t epoch = 0;
    std::size_t step = 0;
    double loss = 0.0;
    double acc = 0.0;
    double lr = 0.0;
    double train_acc = 0.0;
    double seconds = 0.0;
};

struct EvalResult {
    double accuracy = 0.0;
    double loss = 0.0;
    std::size_t count = 0;
    /// counts[label][predicted]
    std::vector<std::vector<std::size_t>> confusion;
};

struct TrainResult {
    std::vector<EpochMetrics> history;
    ParamStore best;
    double best_acc = -1.0;
    std::size_t best_epoch = 0;
    double last_acc = 0.0;
};

template <class T>
EvalResult evaluate(const ModelConfig& cfg, const ParamStore& ps, std::span<const Example> data, std::size_t batch_size,
                    int pad_id) {
    EvalResult r;
    r.confusion.assign(cfg.n_classes, std::vector<std::size_t>(cfg.n_classes, 0));
    double loss_sum = 0.0;
    std::size_t hits = 0;
    ModelCache<T> cache;
    for (const auto& batch : make_batches(data, batch_size, pad_id)) {
        const auto logits = model_forward<T>(cfg, ps, batch, ForwardMode{}, cache);
        std::vector<T> dl(logits.size());
        loss_sum += softmax_cross_entropy<T>(logits, cfg.n_classes, batch.labels, dl) * static_cast<double>(batch.size);
        const auto pred = argmax_rows<T>(logits, cfg.n_classes);
        for (std::size_t i = 0; i < batch.size; ++i) {
            ++r.confusion[static_cast<std::size_t>(batch.labels[i])][static_cast<std::size_t>(pred[i])];
            if (pred[i] == batch.labels[i]) ++hits;
        }
    }
    r.count = data.size();
    if (r.count) {
        r.accuracy = static_cast<double>(hits) / static_cast<double>(r.count);
        r.loss = loss_sum / static_cast<double>(r.count);
    }
    return r;
}

/// Epoch schedule of batches: shuffle, sort pools by length, shuffle batch order.
inline std::vector<std::vector<std::size_t>> epoch_batches(std::span<const Example> data, const LoopConfig& loop,
                                                           std::mt19937_64& rng) {
    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t pool = loop.batch_size * std::max<std::size_t>(1, loop.bucket_batches);
    for (std::size_t s = 0; s < idx.size(); s += pool) {
        auto first = idx.begin() + static_cast<std::ptrdiff_t>(s);
        auto last = idx.begin() + static_cast<std::ptrdiff_t>(std::min(idx.size(), s + pool));
        std::stable_sort(first, last, [&](std::size_t a, std::size_t b) {
            return data[a].tokens.size() < data[b].tokens.size();
        });
    }
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t s = 0; s < idx.size(); s += loop.batch_size) {
        batches.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(s),
                             idx.begin() + static_cast<std::ptrdiff_t>(std::min(idx.size(), s + loop.batch_size)));
    }
    std::shuffle(batches.begin(), batches.end(), rng);
    return batches;
}

inline std::size_t steps_per_epoch(std::size_t n, std::size_t batch_size) { return (n + batch_size - 1) / batch_size; }

/// Trains from `ps` in place. `train.total_steps` is overwritten from the loop length.
template <class T>
TrainResult train_model(const ModelConfig& cfg, TrainConfig train, const LoopConfig& loop, ParamStore& ps,
                        std::span<const Example> train_set, std::span<const Example> test_set, int pad_id,
                        const std::function<void(const EpochMetrics&)>& on_epoch = {}) {
    cfg.validate();
    train.total_steps = std::max<std::size_t>(1, loop.epochs * steps_per_epoch(train_set.size(), loop.batch_size));
    train.validate();
    ModelConfig run_cfg = cfg;
    run_cfg.dropout = train.dropout;
    AdamState adam(ps);
    std::mt19937_64 order_rng(train.seed ^ 0x5eed0f0dULL);
    TrainResult result;
    std::size_t step = 0;
    std::vector<const Example*> members;
    for (std::size_t epoch = 1; epoch <= loop.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        double loss_sum = 0.0;
        std::size_t seen = 0, hits = 0;
        double lr = 0.0;
        for (const auto& ids : epoch_batches(train_set, loop, order_rng)) {
            members.clear();
            for (const std::size_t i : ids) members.push_back(&train_set[i]);
            const Batch batch = make_batch(members, pad_id);
            ps.zero_grad();
            const std::uint64_t dropout_seed = train.seed * 0x9E3779B97F4A7C15ULL + step;
            const LossResult r = loss_and_grad<T>(run_cfg, ps, batch, ForwardMode{true, dropout_seed});
            lr = lr_at(train, step);
            ++step;
            adam_step(ps, adam, train, step, lr);
            loss_sum += r.loss * static_cast<double>(r.count);
            hits += r.correct;
            seen += r.count;
        }
        const EvalResult ev = evaluate<T>(cfg, ps, test_set, loop.batch_size, pad_id);
        EpochMetrics m;
        m.epoch = epoch;
        m.step = step;
        m.loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;
        m.acc = ev.accuracy;
        m.lr = lr;
        m.train_acc = seen ? static_cast<double>(hits) / static_cast<double>(seen) : 0.0;
        m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        result.history.push_back(m);
        result.last_acc = ev.accuracy;
        if (ev.accuracy > result.best_acc) {
            result.best_acc = ev.accuracy;
            result.best_epoch = epoch;
            result.best = ps;
        }
        if (on_epoch) on_epoch(m);
        if (loop.stop_at_acc > 0.0 && ev.accuracy >= loop.stop_at_acc) break;
    }
    return result;
}

}  // namespace etsmlp

#endif  // ETSMLP_TRAIN_HPP
