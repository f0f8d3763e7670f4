#ifndef ETSMLP_RUN_HPP
#define ETSMLP_RUN_HPP

// Whole training runs driven by a RunConfig, with their on-disk artifacts:
// config.json (resolved echo), metrics.jsonl, best.ckpt and last.ckpt.

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "etsmlp/checkpoint.hpp"
#include "etsmlp/config.hpp"
#include "etsmlp/train.hpp"

namespace etsmlp {

struct Datasets {
    std::vector<Example> train;
    std::vector<Example> test;
};

inline std::vector<Example> generate_task(const TaskConfig& task, std::mt19937_64& rng, std::size_t n) {
    return task.name == "listops" ? gen_listops(task.listops, rng, n) : gen_selective_copy(task.selective_copy, rng, n);
}

inline Datasets make_datasets(const RunConfig& c) {
    Datasets d;
    std::mt19937_64 rng(c.task.data_seed);
    d.train = c.task.train_path.empty() ? generate_task(c.task, rng, c.task.n_train) : load_dataset(c.task.train_path);
    d.test = c.task.test_path.empty() ? generate_task(c.task, rng, c.task.n_test) : load_dataset(c.task.test_path);
    return d;
}

inline nlohmann::ordered_json metrics_json(const EpochMetrics& m) {
    return {{"epoch", m.epoch}, {"step", m.step}, {"loss", m.loss}, {"acc", m.acc}, {"lr", m.lr}};
}

inline void write_config_echo(const std::string& dir, const RunConfig& c) {
    std::filesystem::create_directories(dir);
    std::ofstream(dir + "/config.json") << config_to_json(c).dump(2) << '\n';
}

/// Trains per the config. With a non-empty out_dir the artifacts are written there.
inline TrainResult run_training(const RunConfig& c, const Datasets& data, const std::string& out_dir,
                                std::ostream* log = nullptr) {
    c.validate();
    const ModelConfig model = c.resolved_model();
    ParamStore ps = init_params(model, c.seed);
    TrainConfig train = c.train;
    train.seed = c.seed;
    std::ofstream metrics;
    if (!out_dir.empty()) {
        write_config_echo(out_dir, c);
        metrics.open(out_dir + "/metrics.jsonl");
    }
    auto on_epoch = [&](const EpochMetrics& m) {
        const auto line = metrics_json(m).dump();
        if (metrics.is_open()) metrics << line << '\n' << std::flush;
        if (log) *log << line << '\n' << std::flush;
    };
    TrainResult r = c.precision == "double"
                        ? train_model<double>(model, train, c.loop, ps, data.train, data.test, c.pad_id(), on_epoch)
                        : train_model<float>(model, train, c.loop, ps, data.train, data.test, c.pad_id(), on_epoch);
    if (!out_dir.empty()) {
        save_checkpoint(out_dir + "/best.ckpt", r.best, config_to_json(c));
        save_checkpoint(out_dir + "/last.ckpt", ps, config_to_json(c));
    }
    return r;
}

inline EvalResult evaluate_checkpoint(const Checkpoint& ck, std::span<const Example> data) {
    const RunConfig c = config_from_json(ck.config);
    const ModelConfig model = c.resolved_model();
    return c.precision == "double" ? evaluate<double>(model, ck.params, data, c.loop.batch_size, c.pad_id())
                                   : evaluate<float>(model, ck.params, data, c.loop.batch_size, c.pad_id());
}

}  // namespace etsmlp

#endif  // ETSMLP_RUN_HPP
