#ifndef ETSMLP_TASKS_HPP
#define ETSMLP_TASKS_HPP

// Synthetic classification tasks, JSON-lines dataset files and padding.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "etsmlp/batch.hpp"

namespace etsmlp {

struct Example {
    std::vector<int> tokens;
    int label = 0;

    bool operator==(const Example&) const = default;
};

// ---------------------------------------------------------------- ListOps

enum ListOpsToken : int {
    kListOpsMax = 10,
    kListOpsMin = 11,
    kListOpsMed = 12,
    kListOpsSum = 13,
    kListOpsClose = 14,
    kListOpsPad = 15,
};

inline constexpr std::size_t kListOpsVocab = 16;
inline constexpr std::size_t kListOpsClasses = 10;

struct ListOpsSpec {
    std::size_t max_depth = 4;
    std::size_t max_args = 5;
    std::size_t max_length = 128;
    /// Chance that an argument below max_depth opens a nested list.
    double branch_prob = 0.3;

    void validate() const {
        if (max_depth < 1) throw std::invalid_argument("listops: max_depth must be >= 1");
        if (max_args < 2) throw std::invalid_argument("listops: max_args must be >= 2");
        // The shortest expression is "[OP d d ]".
        if (max_length < 4) throw std::invalid_argument("listops: max_length too small to fit any expression");
        if (!(branch_prob >= 0.0 && branch_prob < 1.0)) throw std::invalid_argument("listops: branch_prob must lie in [0, 1)");
    }
};

namespace detail {

inline int apply_listops(int op, std::vector<int>& args) {
    switch (op) {
        case kListOpsMax: return *std::max_element(args.begin(), args.end());
        case kListOpsMin: return *std::min_element(args.begin(), args.end());
        case kListOpsMed: {
            std::sort(args.begin(), args.end());
            const std::size_t n = args.size();
            return n % 2 ? args[n / 2] : (args[n / 2 - 1] + args[n / 2]) / 2;
        }
        case kListOpsSum: {
            int s = 0;
            for (const int a : args) s += a;
            return s % 10;
        }
        default: throw std::invalid_argument("listops: unknown operator");
    }
}

inline int eval_listops_at(std::span<const int> tokens, std::size_t& pos) {
    if (pos >= tokens.size()) throw std::invalid_argument("listops: truncated expression");
    const int t = tokens[pos++];
    if (t >= 0 && t <= 9) return t;
    if (t < kListOpsMax || t > kListOpsSum) throw std::invalid_argument("listops: unexpected token");
    std::vector<int> args;
    while (pos < tokens.size() && tokens[pos] != kListOpsClose) args.push_back(eval_listops_at(tokens, pos));
    if (pos >= tokens.size()) throw std::invalid_argument("listops: missing ']'");
    ++pos;
    if (args.empty()) throw std::invalid_argument("listops: operator without arguments");
    return apply_listops(t, args);
}

inline void gen_listops_expr(const ListOpsSpec& spec, std::mt19937_64& rng, std::size_t depth,
                             std::vector<int>& out) {
    std::uniform_int_distribution<int> op(kListOpsMax, kListOpsSum);
    std::uniform_int_distribution<std::size_t> nargs(2, spec.max_args);
    std::uniform_int_distribution<int> digit(0, 9);
    std::bernoulli_distribution branch(spec.branch_prob);
    out.push_back(op(rng));
    const std::size_t n = nargs(rng);
    for (std::size_t i = 0; i < n; ++i) {
        if (depth < spec.max_depth && branch(rng)) {
            gen_listops_expr(spec, rng, depth + 1, out);
        } else {
            out.push_back(digit(rng));
        }
    }
    out.push_back(kListOpsClose);
}

}  // namespace detail

/// Value of a token-encoded expression; throws on malformed input.
inline int eval_listops(std::span<const int> tokens) {
    std::size_t pos = 0;
    const int v = detail::eval_listops_at(tokens, pos);
    if (pos != tokens.size()) throw std::invalid_argument("listops: trailing tokens");
    return v;
}

inline std::string listops_to_string(std::span<const int> tokens) {
    std::string s;
    for (const int t : tokens) {
        if (!s.empty()) s += ' ';
        switch (t) {
            case kListOpsMax: s += "[MAX"; break;
            case kListOpsMin: s += "[MIN"; break;
            case kListOpsMed: s += "[MED"; break;
            case kListOpsSum: s += "[SM"; break;
            case kListOpsClose: s += "]"; break;
            case kListOpsPad: s += "<pad>"; break;
            default: s += std::to_string(t);
        }
    }
    return s;
}

inline std::vector<int> listops_from_string(const std::string& text) {
    std::istringstream in(text);
    std::vector<int> out;
    std::string w;
    while (in >> w) {
        if (w == "[MAX") out.push_back(kListOpsMax);
        else if (w == "[MIN") out.push_back(kListOpsMin);
        else if (w == "[MED") out.push_back(kListOpsMed);
        else if (w == "[SM") out.push_back(kListOpsSum);
        else if (w == "]") out.push_back(kListOpsClose);
        else if (w.size() == 1 && w[0] >= '0' && w[0] <= '9') out.push_back(w[0] - '0');
        else throw std::invalid_argument("listops: unknown word '" + w + "'");
    }
    return out;
}

/// n expressions with exactly balanced labels (counts differ by at most one).
inline std::vector<Example> gen_listops(const ListOpsSpec& spec, std::mt19937_64& rng, std::size_t n) {
    spec.validate();
    std::vector<std::size_t> quota(kListOpsClasses, n / kListOpsClasses);
    {
        // Spread the remainder over randomly chosen labels.
        std::vector<std::size_t> order(kListOpsClasses);
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t i = 0; i < n % kListOpsClasses; ++i) ++quota[order[i]];
    }
    std::vector<Example> out;
    out.reserve(n);
    std::vector<int> buf;
    while (out.size() < n) {
        buf.clear();
        detail::gen_listops_expr(spec, rng, 1, buf);
        if (buf.size() > spec.max_length) continue;
        const int label = eval_listops(buf);
        if (quota[static_cast<std::size_t>(label)] == 0) continue;
        --quota[static_cast<std::size_t>(label)];
        out.push_back({buf, label});
    }
    return out;
}

// ----------------------------------------------------------- selective copy

struct SelectiveCopySpec {
    std::size_t length = 64;
    std::size_t n_markers = 1;
    /// Content tokens are 0..vocab-1; the marker is vocab and padding vocab+1.
    std::size_t vocab = 16;

    std::size_t marker() const { return vocab; }
    std::size_t pad() const { return vocab + 1; }
    std::size_t model_vocab() const { return vocab + 2; }
};

/// Sequences whose label is the token right after the marker(s). Every
/// sequence holds a near-uniform multiset of content tokens whose counts are
/// drawn independently of the label, so token counts carry no signal.
inline std::vector<Example> gen_selective_copy(const SelectiveCopySpec& spec, std::mt19937_64& rng, std::size_t n) {
    if (spec.n_markers < 1) throw std::invalid_argument("selective_copy: n_markers must be >= 1");
    if (spec.length <= spec.n_markers) throw std::invalid_argument("selective_copy: length must exceed n_markers");
    if (spec.vocab < 1) throw std::invalid_argument("selective_copy: vocab must be >= 1");
    const std::size_t content = spec.length - spec.n_markers;
    const int marker = static_cast<int>(spec.marker());
    std::vector<Example> out;
    out.reserve(n);
    std::vector<std::size_t> order(spec.vocab);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::size_t> count(spec.vocab, content / spec.vocab);
        for (std::size_t v = 0; v < spec.vocab; ++v) order[v] = v;
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t r = 0; r < content % spec.vocab; ++r) ++count[order[r]];
        std::vector<int> eligible;
        for (std::size_t v = 0; v < spec.vocab; ++v) {
            if (count[v] >= spec.n_markers) eligible.push_back(static_cast<int>(v));
        }
        if (eligible.empty()) throw std::invalid_argument("selective_copy: sequence too short for the marker count");
        std::vector<int> c;
        c.reserve(content);
        for (std::size_t v = 0; v < spec.vocab; ++v) c.insert(c.end(), count[v], static_cast<int>(v));
        std::shuffle(c.begin(), c.end(), rng);
        const int label = eligible[std::uniform_int_distribution<std::size_t>(0, eligible.size() - 1)(rng)];
        std::vector<std::size_t> hits;
        for (std::size_t j = 0; j < c.size(); ++j) {
            if (c[j] == label) hits.push_back(j);
        }
        std::shuffle(hits.begin(), hits.end(), rng);
        std::vector<bool> mark(c.size(), false);
        for (std::size_t k = 0; k < spec.n_markers; ++k) mark[hits[k]] = true;
        Example ex;
        ex.label = label;
        ex.tokens.reserve(spec.length);
        for (std::size_t j = 0; j < c.size(); ++j) {
            if (mark[j]) ex.tokens.push_back(marker);
            ex.tokens.push_back(c[j]);
        }
        out.push_back(std::move(ex));
    }
    return out;
}

// ---------------------------------------------------------------- file IO

inline void save_dataset(const std::string& path, std::span<const Example> examples) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    for (const auto& ex : examples) {
        nlohmann::json j;
        j["tokens"] = ex.tokens;
        j["label"] = ex.label;
        out << j.dump() << '\n';
    }
    if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

inline Example parse_example(const std::string& line) {
    const nlohmann::json j = nlohmann::json::parse(line);
    if (!j.is_object()) throw std::invalid_argument("expected a JSON object");
    if (!j.contains("tokens") || !j["tokens"].is_array()) throw std::invalid_argument("missing array field 'tokens'");
    if (!j.contains("label") || !j["label"].is_number_integer()) {
        throw std::invalid_argument("missing integer field 'label'");
    }
    Example ex;
    for (const auto& t : j["tokens"]) {
        if (!t.is_number_integer()) throw std::invalid_argument("non-integer token");
        ex.tokens.push_back(t.get<int>());
    }
    if (ex.tokens.empty()) throw std::invalid_argument("empty token list");
    ex.label = j["label"].get<int>();
    if (ex.label < 0) throw std::invalid_argument("negative label");
    return ex;
}

inline std::vector<Example> load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::vector<Example> out;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(parse_example(line));
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(number) + ": " + e.what());
        }
    }
    return out;
}

// --------------------------------------------------------------- batching

/// Pads the given examples on the right to the longest one.
inline Batch make_batch(std::span<const Example* const> examples, int pad_id) {
    Batch b;
    b.size = examples.size();
    for (const auto* ex : examples) b.length = std::max(b.length, ex->tokens.size());
    b.tokens.assign(b.size * b.length, pad_id);
    b.mask.assign(b.size * b.length, 0);
    for (std::size_t i = 0; i < b.size; ++i) {
        const auto& t = examples[i]->tokens;
        std::copy(t.begin(), t.end(), b.tokens.begin() + static_cast<std::ptrdiff_t>(i * b.length));
        std::fill_n(b.mask.begin() + static_cast<std::ptrdiff_t>(i * b.length), t.size(), 1);
        b.labels.push_back(examples[i]->label);
        b.lengths.push_back(t.size());
    }
    return b;
}

/// Consecutive chunks of batch_size examples (the last may be shorter).
inline std::vector<Batch> make_batches(std::span<const Example> examples, std::size_t batch_size, int pad_id) {
    if (batch_size < 1) throw std::invalid_argument("make_batches: batch size must be >= 1");
    std::vector<Batch> out;
    std::vector<const Example*> chunk;
    for (std::size_t i = 0; i < examples.size(); i += batch_size) {
        chunk.clear();
        for (std::size_t j = i; j < std::min(examples.size(), i + batch_size); ++j) chunk.push_back(&examples[j]);
        out.push_back(make_batch(chunk, pad_id));
    }
    return out;
}

}  // namespace etsmlp

#endif  // ETSMLP_TASKS_HPP
