#ifndef ETSMLP_PARAM_STORE_HPP
#define ETSMLP_PARAM_STORE_HPP

#include <algorithm>
#include <cstddef>
#include <functional>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace etsmlp {

enum class ParamRole {
    embedding,
    matrix,
    bias,
    norm,
    ces_lambda,
    ces_alpha,
    ces_beta,
    ces_omega,
};

inline const char* to_string(ParamRole r) {
    switch (r) {
        case ParamRole::embedding: return "embedding";
        case ParamRole::matrix: return "matrix";
        case ParamRole::bias: return "bias";
        case ParamRole::norm: return "norm";
        case ParamRole::ces_lambda: return "ces_lambda";
        case ParamRole::ces_alpha: return "ces_alpha";
        case ParamRole::ces_beta: return "ces_beta";
        case ParamRole::ces_omega: return "ces_omega";
    }
    return "unknown";
}

inline ParamRole role_from_string(const std::string& s) {
    for (auto r : {ParamRole::embedding, ParamRole::matrix, ParamRole::bias, ParamRole::norm, ParamRole::ces_lambda,
                   ParamRole::ces_alpha, ParamRole::ces_beta, ParamRole::ces_omega}) {
        if (s == to_string(r)) return r;
    }
    throw std::invalid_argument("unknown parameter role '" + s + "'");
}

struct ParamArray {
    std::string name;
    std::vector<std::size_t> shape;
    /// -1 for arrays outside the block stack.
    int layer = -1;
    ParamRole role = ParamRole::matrix;
    bool decay = false;
    std::vector<double> value;
    std::vector<double> grad;

    std::size_t size() const { return value.size(); }
};

inline std::size_t shape_size(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

/// Named parameter arrays with same-shape gradient buffers.
class ParamStore {
public:
    ParamArray& add(std::string name, std::vector<std::size_t> shape, int layer, ParamRole role, bool decay) {
        if (index_.count(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
        ParamArray a;
        a.name = std::move(name);
        a.shape = std::move(shape);
        a.layer = layer;
        a.role = role;
        a.decay = decay;
        a.value.assign(shape_size(a.shape), 0.0);
        a.grad.assign(a.value.size(), 0.0);
        index_[a.name] = arrays_.size();
        arrays_.push_back(std::move(a));
        return arrays_.back();
    }

    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    ParamArray& at(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::out_of_range("no parameter '" + name + "'");
        return arrays_[it->second];
    }
    const ParamArray& at(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::out_of_range("no parameter '" + name + "'");
        return arrays_[it->second];
    }

    std::vector<ParamArray>& arrays() { return arrays_; }
    const std::vector<ParamArray>& arrays() const { return arrays_; }

    std::size_t total_size() const {
        std::size_t n = 0;
        for (const auto& a : arrays_) n += a.size();
        return n;
    }

    void zero_grad() {
        for (auto& a : arrays_) std::fill(a.grad.begin(), a.grad.end(), 0.0);
    }

private:
    std::vector<ParamArray> arrays_;
    std::map<std::string, std::size_t> index_;
};

}  // namespace etsmlp

#endif  // ETSMLP_PARAM_STORE_HPP
