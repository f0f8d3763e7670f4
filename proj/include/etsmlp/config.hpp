#ifndef ETSMLP_CONFIG_HPP
#define ETSMLP_CONFIG_HPP

// Run configuration as JSON. Defaults are serialized first, a config file may
// only override keys that already exist (same JSON type), and "--set a.b=v"
// overrides address the same tree by dotted path.

#include <cstdint>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "etsmlp/bench.hpp"
#include "etsmlp/model.hpp"
#include "etsmlp/optim.hpp"
#include "etsmlp/tasks.hpp"
#include "etsmlp/train.hpp"

namespace etsmlp {

struct TaskConfig {
    std::string name = "listops";
    std::size_t n_train = 50000;
    std::size_t n_test = 2000;
    std::uint64_t data_seed = 1;
    /// Optional JSONL datasets; when set they replace generation.
    std::string train_path;
    std::string test_path;
    ListOpsSpec listops{};
    SelectiveCopySpec selective_copy{};
};

struct AblateConfig {
    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::vector<std::string> variants{"full", "no-beta", "no-alpha", "no-omega", "real"};
    std::vector<std::string> inits{"ring", "stable"};
};

struct RunConfig {
    TaskConfig task{};
    ModelConfig model{};
    TrainConfig train{};
    LoopConfig loop{};
    /// "float" or "double"
    std::string precision = "float";
    BenchConfig bench{};
    AblateConfig ablate{};
    std::uint64_t seed = 0;
    std::string out = "run";

    RunConfig() {
        model.d = 64;
        model.hidden = 64;
        model.n_layers = 4;
        model.bidirectional = true;
        train.lr_peak = 1e-2;
        train.weight_decay = 1e-2;
    }

    std::size_t n_classes() const { return task.name == "listops" ? kListOpsClasses : task.selective_copy.vocab; }
    std::size_t vocab_size() const {
        return task.name == "listops" ? kListOpsVocab : task.selective_copy.model_vocab();
    }
    int pad_id() const {
        return task.name == "listops" ? static_cast<int>(kListOpsPad)
                                      : static_cast<int>(task.selective_copy.pad());
    }

    /// Model config with the task-derived vocabulary and class count.
    ModelConfig resolved_model() const {
        ModelConfig m = model;
        m.vocab_size = vocab_size();
        m.n_classes = n_classes();
        m.dropout = train.dropout;
        return m;
    }

    void validate() const {
        if (task.name != "listops" && task.name != "selective_copy") {
            throw std::invalid_argument("task.name must be 'listops' or 'selective_copy'");
        }
        if (task.train_path.empty() && task.n_train < 1) throw std::invalid_argument("task.n_train must be >= 1");
        if (task.test_path.empty() && task.n_test < 1) throw std::invalid_argument("task.n_test must be >= 1");
        if (task.name == "listops") task.listops.validate();
        if (task.name == "selective_copy") {
            const auto& s = task.selective_copy;
            if (s.vocab < 2) throw std::invalid_argument("task.selective_copy.vocab must be >= 2");
            if (s.n_markers < 1 || 2 * s.n_markers > s.length) {
                throw std::invalid_argument("task.selective_copy: need 1 <= n_markers <= length / 2");
            }
        }
        resolved_model().validate();
        TrainConfig t = train;
        t.total_steps = 1;
        t.validate();
        if (loop.epochs < 1) throw std::invalid_argument("train.epochs must be >= 1");
        if (loop.batch_size < 1) throw std::invalid_argument("train.batch_size must be >= 1");
        if (precision != "float" && precision != "double") throw std::invalid_argument("precision must be 'float' or 'double'");
        bench.validate();
        if (ablate.seeds.empty()) throw std::invalid_argument("ablate.seeds must not be empty");
        if (out.empty()) throw std::invalid_argument("out must not be empty");
    }
};

inline nlohmann::json config_to_json(const RunConfig& c) {
    using nlohmann::json;
    const auto& m = c.model;
    const auto& t = c.train;
    return json{
        {"seed", c.seed},
        {"out", c.out},
        {"precision", c.precision},
        {"task",
         {{"name", c.task.name},
          {"n_train", c.task.n_train},
          {"n_test", c.task.n_test},
          {"data_seed", c.task.data_seed},
          {"train_path", c.task.train_path},
          {"test_path", c.task.test_path},
          {"listops",
           {{"max_depth", c.task.listops.max_depth},
            {"max_args", c.task.listops.max_args},
            {"max_length", c.task.listops.max_length},
            {"branch_prob", c.task.listops.branch_prob}}},
          {"selective_copy",
           {{"length", c.task.selective_copy.length},
            {"n_markers", c.task.selective_copy.n_markers},
            {"vocab", c.task.selective_copy.vocab}}}}},
        {"model",
         {{"d", m.d},
          {"hidden", m.hidden},
          {"n_layers", m.n_layers},
          {"gate", m.gate},
          {"bidirectional", m.bidirectional},
          {"max_lambda", m.max_lambda},
          {"kernel_norm", m.kernel_norm},
          {"init",
           {{"kind", m.init.kind == InitSpec::Kind::ring ? "ring" : "stable"},
            {"r_min", m.init.ring.r_min},
            {"r_max", m.init.ring.r_max},
            {"re", m.init.stable.re},
            {"im", m.init.stable.im}}},
          {"flags",
           {{"use_alpha", m.flags.use_alpha},
            {"use_beta", m.flags.use_beta},
            {"use_omega", m.flags.use_omega},
            {"complex_field", m.flags.complex_field},
            {"mixing", m.flags.mixing}}}}},
        {"train",
         {{"lr", t.lr_peak},
          {"warmup_fraction", t.warmup_fraction},
          {"beta1", t.beta1},
          {"beta2", t.beta2},
          {"eps", t.eps},
          {"weight_decay", t.weight_decay},
          {"dropout", t.dropout},
          {"epochs", c.loop.epochs},
          {"batch_size", c.loop.batch_size},
          {"stop_at_acc", c.loop.stop_at_acc},
          {"bucket_batches", c.loop.bucket_batches}}},
        {"bench",
         {{"lengths", c.bench.lengths},
          {"models", c.bench.models},
          {"trials", c.bench.trials},
          {"warmup", c.bench.warmup},
          {"min_trial_seconds", c.bench.min_trial_seconds},
          {"d", c.bench.d},
          {"hidden", c.bench.hidden},
          {"n_layers", c.bench.n_layers}}},
        {"ablate", {{"seeds", c.ablate.seeds}, {"variants", c.ablate.variants}, {"inits", c.ablate.inits}}},
    };
}

inline RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig c;
    j.at("seed").get_to(c.seed);
    j.at("out").get_to(c.out);
    j.at("precision").get_to(c.precision);
    const auto& tj = j.at("task");
    tj.at("name").get_to(c.task.name);
    tj.at("n_train").get_to(c.task.n_train);
    tj.at("n_test").get_to(c.task.n_test);
    tj.at("data_seed").get_to(c.task.data_seed);
    tj.at("train_path").get_to(c.task.train_path);
    tj.at("test_path").get_to(c.task.test_path);
    const auto& lj = tj.at("listops");
    lj.at("max_depth").get_to(c.task.listops.max_depth);
    lj.at("max_args").get_to(c.task.listops.max_args);
    lj.at("max_length").get_to(c.task.listops.max_length);
    lj.at("branch_prob").get_to(c.task.listops.branch_prob);
    const auto& sj = tj.at("selective_copy");
    sj.at("length").get_to(c.task.selective_copy.length);
    sj.at("n_markers").get_to(c.task.selective_copy.n_markers);
    sj.at("vocab").get_to(c.task.selective_copy.vocab);

    const auto& mj = j.at("model");
    auto& m = c.model;
    mj.at("d").get_to(m.d);
    mj.at("hidden").get_to(m.hidden);
    mj.at("n_layers").get_to(m.n_layers);
    mj.at("gate").get_to(m.gate);
    mj.at("bidirectional").get_to(m.bidirectional);
    mj.at("max_lambda").get_to(m.max_lambda);
    mj.at("kernel_norm").get_to(m.kernel_norm);
    const auto& ij = mj.at("init");
    const auto kind = ij.at("kind").get<std::string>();
    if (kind != "ring" && kind != "stable") throw std::invalid_argument("model.init.kind must be 'ring' or 'stable'");
    m.init.kind = kind == "ring" ? InitSpec::Kind::ring : InitSpec::Kind::stable;
    ij.at("r_min").get_to(m.init.ring.r_min);
    ij.at("r_max").get_to(m.init.ring.r_max);
    ij.at("re").get_to(m.init.stable.re);
    ij.at("im").get_to(m.init.stable.im);
    const auto& fj = mj.at("flags");
    fj.at("use_alpha").get_to(m.flags.use_alpha);
    fj.at("use_beta").get_to(m.flags.use_beta);
    fj.at("use_omega").get_to(m.flags.use_omega);
    fj.at("complex_field").get_to(m.flags.complex_field);
    fj.at("mixing").get_to(m.flags.mixing);

    const auto& trj = j.at("train");
    trj.at("lr").get_to(c.train.lr_peak);
    trj.at("warmup_fraction").get_to(c.train.warmup_fraction);
    trj.at("beta1").get_to(c.train.beta1);
    trj.at("beta2").get_to(c.train.beta2);
    trj.at("eps").get_to(c.train.eps);
    trj.at("weight_decay").get_to(c.train.weight_decay);
    trj.at("dropout").get_to(c.train.dropout);
    trj.at("epochs").get_to(c.loop.epochs);
    trj.at("batch_size").get_to(c.loop.batch_size);
    trj.at("stop_at_acc").get_to(c.loop.stop_at_acc);
    trj.at("bucket_batches").get_to(c.loop.bucket_batches);
    c.train.seed = c.seed;

    const auto& bj = j.at("bench");
    bj.at("lengths").get_to(c.bench.lengths);
    bj.at("models").get_to(c.bench.models);
    bj.at("trials").get_to(c.bench.trials);
    bj.at("warmup").get_to(c.bench.warmup);
    bj.at("min_trial_seconds").get_to(c.bench.min_trial_seconds);
    bj.at("d").get_to(c.bench.d);
    bj.at("hidden").get_to(c.bench.hidden);
    bj.at("n_layers").get_to(c.bench.n_layers);
    c.bench.seed = c.seed;

    const auto& aj = j.at("ablate");
    aj.at("seeds").get_to(c.ablate.seeds);
    aj.at("variants").get_to(c.ablate.variants);
    aj.at("inits").get_to(c.ablate.inits);
    return c;
}

namespace detail {

inline bool same_kind(const nlohmann::json& a, const nlohmann::json& b) {
    if (a.is_number() && b.is_number()) {
        // Integers may be written where reals are expected, not the other way round.
        return a.is_number_float() || !b.is_number_float();
    }
    return a.type() == b.type();
}

inline void merge_strict(nlohmann::json& base, const nlohmann::json& patch, const std::string& path) {
    for (auto it = patch.begin(); it != patch.end(); ++it) {
        const std::string key = path.empty() ? it.key() : path + "." + it.key();
        if (!base.contains(it.key())) throw std::invalid_argument("unknown config key '" + key + "'");
        auto& slot = base[it.key()];
        if (slot.is_object()) {
            if (!it->is_object()) throw std::invalid_argument("config key '" + key + "' must be an object");
            merge_strict(slot, *it, key);
        } else {
            if (!same_kind(slot, *it)) throw std::invalid_argument("config key '" + key + "' has the wrong type");
            if (slot.is_number_unsigned() && it->is_number_integer() && it->get<std::int64_t>() < 0) {
                throw std::invalid_argument("config key '" + key + "' must be non-negative");
            }
            slot = *it;
        }
    }
}

}  // namespace detail

/// Applies "a.b.c=value"; the value is parsed as JSON and otherwise taken as a string.
inline void apply_override(nlohmann::json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw std::invalid_argument("--set expects key=value, got '" + assignment + "'");
    const std::string path = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    nlohmann::json patch = value;
    std::string rest = path;
    std::vector<std::string> keys;
    for (std::size_t dot; (dot = rest.find('.')) != std::string::npos; rest = rest.substr(dot + 1)) {
        keys.push_back(rest.substr(0, dot));
    }
    keys.push_back(rest);
    for (auto k = keys.rbegin(); k != keys.rend(); ++k) patch = nlohmann::json{{*k, patch}};
    detail::merge_strict(j, patch, "");
}

/// Defaults, then the optional file, then each override, then validation.
inline RunConfig resolve_config(const std::string& file, const std::vector<std::string>& overrides) {
    nlohmann::json j = config_to_json(RunConfig{});
    if (!file.empty()) {
        std::ifstream in(file);
        if (!in) throw std::invalid_argument("cannot open config '" + file + "'");
        nlohmann::json patch;
        try {
            patch = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw std::invalid_argument(file + ": " + e.what());
        }
        if (!patch.is_object()) throw std::invalid_argument(file + ": top level must be an object");
        detail::merge_strict(j, patch, "");
    }
    for (const auto& o : overrides) apply_override(j, o);
    RunConfig c = config_from_json(j);
    c.validate();
    return c;
}

/// Applies an architecture ablation by name to a model config.
inline void apply_variant(ModelConfig& m, const std::string& variant) {
    if (variant == "full") return;
    if (variant == "no-alpha") {
        m.flags.use_alpha = false;
    } else if (variant == "no-beta") {
        m.flags.use_beta = false;
    } else if (variant == "no-omega") {
        m.flags.use_omega = false;
    } else if (variant == "real") {
        m.flags.complex_field = false;
    } else if (variant == "ces-off") {
        m.flags.mixing = false;
    } else {
        throw std::invalid_argument("unknown ablation '" + variant + "'");
    }
}

/// "ring" keeps the configured annulus; "stable" switches to the configured stable point.
inline void apply_init(ModelConfig& m, const std::string& init) {
    if (init == "ring") {
        m.init.kind = InitSpec::Kind::ring;
    } else if (init == "stable") {
        m.init.kind = InitSpec::Kind::stable;
    } else {
        throw std::invalid_argument("unknown init '" + init + "'");
    }
}

}  // namespace etsmlp

#endif  // ETSMLP_CONFIG_HPP
