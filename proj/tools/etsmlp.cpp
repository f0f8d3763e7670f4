// etsmlp command-line driver: train, eval, gradcheck, kernel, bench, ablate.

#include <CLI11.hpp>
#include <cblas.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "etsmlp/bench.hpp"
#include "etsmlp/checkpoint.hpp"
#include "etsmlp/config.hpp"
#include "etsmlp/run.hpp"

namespace {

using namespace etsmlp;

struct Common {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
    cmd->add_option("--out", c.out, "Output directory");
    cmd->add_option("--seed", c.seed, "Run seed");
    cmd->add_option("--set", c.sets, "Override a config field: dotted.key=value")->take_all();
}

RunConfig resolve(const Common& c, std::vector<std::string> extra = {}) {
    std::vector<std::string> sets = c.sets;
    if (c.seed) sets.push_back("seed=" + std::to_string(*c.seed));
    if (!c.out.empty()) sets.push_back("out=" + nlohmann::json(c.out).dump());
    sets.insert(sets.end(), extra.begin(), extra.end());
    return resolve_config(c.config, sets);
}

std::ostream& open_or_stdout(std::ofstream& file, const std::string& path) {
    if (path.empty() || path == "-") return std::cout;
    if (const auto dir = std::filesystem::path(path).parent_path(); !dir.empty()) std::filesystem::create_directories(dir);
    file.open(path);
    if (!file) throw std::runtime_error("cannot write '" + path + "'");
    return file;
}

int cmd_train(const Common& common, const std::string& ablation, const std::string& init) {
    RunConfig c = resolve(common);
    if (!ablation.empty()) apply_variant(c.model, ablation);
    if (!init.empty()) apply_init(c.model, init);
    c.validate();
    const Datasets data = make_datasets(c);
    std::cerr << "train: " << data.train.size() << " train / " << data.test.size() << " test examples, "
              << init_params(c.resolved_model(), c.seed).total_size() << " parameters\n";
    const TrainResult r = run_training(c, data, c.out, &std::cout);
    std::cerr << "best acc " << r.best_acc << " at epoch " << r.best_epoch << ", last acc " << r.last_acc
              << "; artifacts in " << c.out << "\n";
    return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& data_path) {
    const Checkpoint ck = load_checkpoint(checkpoint);
    std::vector<Example> data;
    if (data_path.empty()) {
        data = make_datasets(config_from_json(ck.config)).test;
    } else {
        data = load_dataset(data_path);
    }
    const EvalResult r = evaluate_checkpoint(ck, data);
    std::cout << "accuracy " << std::setprecision(6) << r.accuracy << " (" << r.count << " examples, loss " << r.loss
              << ")\n";
    std::cout << "class,count,correct\n";
    for (std::size_t k = 0; k < r.confusion.size(); ++k) {
        std::size_t total = 0;
        for (const auto v : r.confusion[k]) total += v;
        std::cout << k << ',' << total << ',' << r.confusion[k][k] << '\n';
    }
    return 0;
}

int cmd_gradcheck(const Common& common, double tol) {
    RunConfig c = resolve(common, {"model.d=8", "model.hidden=16", "model.n_layers=2"});
    ModelConfig base = c.resolved_model();
    base.dropout = 0.0;
    std::mt19937_64 rng(c.task.data_seed);
    std::vector<Example> ex = generate_task(c.task, rng, 3);
    std::vector<const Example*> ptrs;
    for (const auto& e : ex) ptrs.push_back(&e);
    const Batch batch = make_batch(ptrs, c.pad_id());
    bool ok = true;
    std::cout << "gate,bidirectional,worst_array,rel_error,status\n";
    for (const bool gate : {false, true}) {
        for (const bool bidi : {false, true}) {
            ModelConfig m = base;
            m.gate = gate;
            m.bidirectional = bidi;
            ParamStore ps = init_params(m, c.seed);
            std::normal_distribution<double> nd(0.0, 0.1);
            std::mt19937_64 prng(c.seed + 1);
            for (auto& a : ps.arrays()) {
                for (auto& v : a.value) v += nd(prng);
            }
            auto loss = [&](const ParamStore& p) { return model_loss<double>(m, p, batch).loss; };
            auto grad = [&](ParamStore& p) { loss_and_grad<double>(m, p, batch, {}); };
            const auto rep = finite_diff_check(ps, loss, grad, tol);
            const auto& w = *std::max_element(rep.entries.begin(), rep.entries.end(),
                                              [](const auto& a, const auto& b) { return a.rel_error < b.rel_error; });
            std::cout << gate << ',' << bidi << ',' << w.name << ',' << std::scientific << w.rel_error
                      << std::defaultfloat << ',' << (rep.passed ? "PASS" : "FAIL") << '\n';
            ok = ok && rep.passed;
        }
    }
    return ok ? 0 : 1;
}

int cmd_kernel(const Common& common, const std::string& checkpoint, std::size_t length, std::size_t layer,
               bool sweep, std::size_t probe_length) {
    if (sweep) {
        const auto x = explosion_probe_input(probe_length);
        std::cout << "lambda,grad_naive,grad_prime,growth_per_decade\n";
        double prev = 0.0;
        for (const double lam : {0.9, 0.99, 0.999, 0.9999}) {
            const auto r = gradient_explosion_probe(lam, x);
            std::cout << lam << ',' << std::scientific << r.grad_naive << ',' << r.grad_prime << std::defaultfloat
                      << ',';
            if (prev > 0.0) std::cout << r.grad_naive / prev;
            std::cout << '\n';
            prev = r.grad_naive;
        }
        return 0;
    }
    ModelConfig m;
    ParamStore ps;
    if (!checkpoint.empty()) {
        Checkpoint ck = load_checkpoint(checkpoint);
        m = config_from_json(ck.config).resolved_model();
        ps = std::move(ck.params);
    } else {
        const RunConfig c = resolve(common);
        m = c.resolved_model();
        ps = init_params(m, c.seed);
    }
    if (layer >= m.n_layers) throw std::invalid_argument("--layer out of range");
    std::ofstream file;
    std::ostream& os = open_or_stdout(file, common.out.empty() ? "" : common.out + "/kernel.csv");
    os << "channel,j,tap\n" << std::setprecision(17);
    const auto params = layer_ces_params(ps, m, layer);
    for (std::size_t ch = 0; ch < params.size(); ++ch) {
        const auto k = build_kernel(params[ch], length, m.ces_options());
        for (std::size_t j = 0; j < k.taps.size(); ++j) os << ch << ',' << j << ',' << k.taps[j] << '\n';
    }
    return 0;
}

int cmd_bench(const Common& common) {
    const RunConfig c = resolve(common);
    write_config_echo(c.out, c);
    const auto rows = run_sweep(c.bench);
    std::ofstream file;
    write_bench_csv(open_or_stdout(file, c.out + "/bench.csv"), rows);
    write_bench_csv(std::cout, rows);
    for (const auto& model : c.bench.models) {
        std::vector<double> x, y;
        for (const auto& r : rows) {
            if (r.model == model && r.error.empty()) {
                x.push_back(static_cast<double>(r.seq_len));
                y.push_back(static_cast<double>(r.peak_bytes));
            }
            if (r.model == model && !r.error.empty()) std::cerr << model << " L=" << r.seq_len << ": " << r.error << '\n';
        }
        if (x.size() >= 3) {
            std::cout << model << ": memory R^2 linear " << fit_polynomial(x, y, 1).r2 << ", quadratic "
                      << fit_polynomial(x, y, 2).r2;
            if (x.size() >= 2) {
                std::cout << ", per-token time ratio " << x.front() << "->" << x.back() << " "
                          << per_token_time_ratio(rows, model, static_cast<std::size_t>(x.front()),
                                                  static_cast<std::size_t>(x.back()));
            }
            std::cout << '\n';
        }
    }
    return 0;
}

int cmd_ablate(const Common& common) {
    const RunConfig base = resolve(common);
    write_config_echo(base.out, base);
    const Datasets data = make_datasets(base);
    std::ofstream csv(base.out + "/ablation.csv");
    csv << "grid,name,seed,acc,best_acc\n";
    // (grid, name) -> accuracies over seeds
    std::map<std::pair<std::string, std::string>, std::vector<double>> acc;
    std::vector<std::pair<std::string, std::string>> order;
    auto run = [&](const std::string& grid, const std::string& name, const std::string& variant,
                   const std::string& init, std::uint64_t seed) {
        RunConfig c = base;
        c.seed = seed;
        apply_variant(c.model, variant);
        apply_init(c.model, init);
        const std::string dir = base.out + "/" + grid + "-" + name + "-seed" + std::to_string(seed);
        const TrainResult r = run_training(c, data, dir);
        csv << grid << ',' << name << ',' << seed << ',' << r.last_acc << ',' << r.best_acc << '\n' << std::flush;
        std::cerr << grid << ' ' << name << " seed " << seed << ": acc " << r.last_acc << '\n';
        const auto key = std::make_pair(grid, name);
        if (!acc.count(key)) order.push_back(key);
        acc[key].push_back(r.last_acc);
    };
    for (const auto seed : base.ablate.seeds) {
        for (const auto& v : base.ablate.variants) run("table3", v, v, "ring", seed);
        for (const auto& i : base.ablate.inits) run("table4", i, "full", i, seed);
    }
    std::ofstream table(base.out + "/comparison.md");
    for (std::ostream* os : {static_cast<std::ostream*>(&table), static_cast<std::ostream*>(&std::cout)}) {
        *os << "| grid | setting | mean acc | per seed |\n|---|---|---|---|\n";
        for (const auto& key : order) {
            const auto& v = acc[key];
            double mean = 0.0;
            for (const double a : v) mean += a / static_cast<double>(v.size());
            *os << "| " << key.first << " | " << key.second << " | " << std::fixed << std::setprecision(4) << mean
                << " |";
            for (const double a : v) *os << ' ' << a;
            *os << std::defaultfloat << " |\n";
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    openblas_set_num_threads(1);
    CLI::App app{"ETSMLP sequence classifier: training, evaluation and diagnostics"};
    app.require_subcommand(1);
    Common common;

    auto* train = app.add_subcommand("train", "Train a model; writes metrics.jsonl, best.ckpt, config.json");
    add_common(train, common);
    std::string ablation, init;
    train->add_option("--ablate", ablation, "Architecture ablation")
        ->check(CLI::IsMember({"full", "no-alpha", "no-beta", "no-omega", "real", "ces-off"}));
    train->add_option("--init", init, "Lambda initialization")->check(CLI::IsMember({"ring", "stable"}));

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
    std::string checkpoint, data;
    eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
    eval->add_option("--data", data, "JSONL dataset (default: regenerate the run's test split)")
        ->check(CLI::ExistingFile);

    auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of every parameter gradient");
    add_common(grad, common);
    double tol = 1e-4;
    grad->add_option("--tol", tol, "Relative error tolerance");

    auto* kernel = app.add_subcommand("kernel", "Dump CES kernel taps as CSV");
    add_common(kernel, common);
    std::size_t length = 64, layer = 0, probe_length = std::size_t{1} << 22;
    bool sweep = false;
    kernel->add_option("--checkpoint", checkpoint, "Checkpoint file (default: initial parameters)")
        ->check(CLI::ExistingFile);
    kernel->add_option("--length", length, "Kernel length L");
    kernel->add_option("--layer", layer, "Layer index");
    kernel->add_flag("--sweep-lambda", sweep, "Print the lambda gradient explosion table");
    kernel->add_option("--probe-length", probe_length, "Input length for --sweep-lambda");

    auto* bench = app.add_subcommand("bench", "Throughput and memory sweep against attention");
    add_common(bench, common);

    auto* ablate = app.add_subcommand("ablate", "Train the ablation and initialization grids");
    add_common(ablate, common);

    CLI11_PARSE(app, argc, argv);
    try {
        if (*train) return cmd_train(common, ablation, init);
        if (*eval) return cmd_eval(checkpoint, data);
        if (*grad) return cmd_gradcheck(common, tol);
        if (*kernel) return cmd_kernel(common, checkpoint, length, layer, sweep, probe_length);
        if (*bench) return cmd_bench(common);
        if (*ablate) return cmd_ablate(common);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
