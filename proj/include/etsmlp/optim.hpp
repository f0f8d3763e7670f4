#ifndef ETSMLP_OPTIM_HPP
#define ETSMLP_OPTIM_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "etsmlp/param_store.hpp"

namespace etsmlp {

inline constexpr double kWarmupStartLr = 1e-7;

struct TrainConfig {
    double lr_peak = 1e-3;
    double warmup_fraction = 0.1;
    std::size_t total_steps = 1000;
    double beta1 = 0.9;
    double beta2 = 0.98;
    double eps = 1e-8;
    double weight_decay = 0.0;
    double dropout = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(warmup_fraction > 0.0 && warmup_fraction < 1.0)) {
            throw std::invalid_argument("train: warmup_fraction must lie in (0, 1)");
        }
        if (!(lr_peak > 0.0)) throw std::invalid_argument("train: lr_peak must be > 0");
        if (total_steps < 1) throw std::invalid_argument("train: total_steps must be >= 1");
        if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
            throw std::invalid_argument("train: Adam betas must lie in [0, 1)");
        }
        if (!(eps > 0.0)) throw std::invalid_argument("train: eps must be > 0");
        if (!(weight_decay >= 0.0)) throw std::invalid_argument("train: weight_decay must be >= 0");
        if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("train: dropout must lie in [0, 1)");
    }
};

/// Linear warmup from 1e-7 to lr_peak, then linear decay to 0 at total_steps.
inline double lr_at(const TrainConfig& cfg, std::size_t step) {
    const double total = static_cast<double>(cfg.total_steps);
    const double s = std::min(static_cast<double>(step), total);
    const double warm = cfg.warmup_fraction * total;
    if (s <= warm) return kWarmupStartLr + (cfg.lr_peak - kWarmupStartLr) * (s / warm);
    return cfg.lr_peak * (total - s) / (total - warm);
}

/// First and second moments, one pair of buffers per parameter array.
struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;

    explicit AdamState(const ParamStore& ps) {
        for (const auto& a : ps.arrays()) {
            m.emplace_back(a.size(), 0.0);
            v.emplace_back(a.size(), 0.0);
        }
    }
};

/// One Adam update with bias correction and decoupled weight decay; `step` is 1-based.
inline void adam_step(ParamStore& ps, AdamState& state, const TrainConfig& cfg, std::size_t step, double lr) {
    if (step == 0) throw std::invalid_argument("adam_step: step must be >= 1");
    auto& arrays = ps.arrays();
    if (state.m.size() != arrays.size()) throw std::invalid_argument("adam_step: state does not match parameters");
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    for (std::size_t k = 0; k < arrays.size(); ++k) {
        auto& a = arrays[k];
        auto& m = state.m[k];
        auto& v = state.v[k];
        const double shrink = a.decay ? 1.0 - lr * cfg.weight_decay : 1.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double g = a.grad[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            a.value[i] = a.value[i] * shrink - lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

struct FiniteDiffEntry {
    std::string name;
    /// max |analytic - numeric| / max(max|analytic|, max|numeric|, 1e-8) over the array.
    double rel_error = 0.0;
    double abs_error = 0.0;
    std::size_t worst_index = 0;
};

struct FiniteDiffReport {
    std::vector<FiniteDiffEntry> entries;
    double worst = 0.0;
    double tol = 0.0;
    bool passed = true;
};

/// Compares `grad` (which fills ps gradients) against central differences of `loss`.
inline FiniteDiffReport finite_diff_check(ParamStore& ps, const std::function<double(const ParamStore&)>& loss,
                                          const std::function<void(ParamStore&)>& grad, double tol,
                                          double step = 1e-6) {
    const double base = loss(ps);
    if (loss(ps) != base) {
        throw std::runtime_error("finite_diff_check: loss closure is not deterministic");
    }
    ps.zero_grad();
    grad(ps);
    FiniteDiffReport report;
    report.tol = tol;
    for (auto& a : ps.arrays()) {
        FiniteDiffEntry e;
        e.name = a.name;
        double scale = 1e-8, worst = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double keep = a.value[i];
            a.value[i] = keep + step;
            const double up = loss(ps);
            a.value[i] = keep - step;
            const double down = loss(ps);
            a.value[i] = keep;
            const double numeric = (up - down) / (2.0 * step);
            const double diff = std::abs(a.grad[i] - numeric);
            scale = std::max({scale, std::abs(a.grad[i]), std::abs(numeric)});
            if (diff > worst) {
                worst = diff;
                e.worst_index = i;
            }
        }
        e.abs_error = worst;
        e.rel_error = worst / scale;
        report.worst = std::max(report.worst, e.rel_error);
        report.entries.push_back(e);
    }
    report.passed = report.worst < tol;
    return report;
}

}  // namespace etsmlp

#endif  // ETSMLP_OPTIM_HPP
