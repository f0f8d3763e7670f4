#ifndef ETSMLP_CHECKPOINT_HPP
#define ETSMLP_CHECKPOINT_HPP

// Checkpoint file: one header line "ETSMLP-CKPT <version> <manifest bytes>",
// a JSON manifest (config echo and array table), then every array as
// little-endian IEEE-754 binary64 in manifest order.

#include <bit>
#include <cstdint>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "etsmlp/param_store.hpp"

namespace etsmlp {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
    nlohmann::json config;
    ParamStore params;
};

namespace detail {

inline void put_f64_le(std::string& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
}

inline double get_f64_le(const unsigned char* p) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(p[b]) << (8 * b);
    return std::bit_cast<double>(bits);
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const ParamStore& ps, const nlohmann::json& config) {
    nlohmann::json manifest;
    manifest["config"] = config;
    manifest["arrays"] = nlohmann::json::array();
    std::size_t offset = 0;
    for (const auto& a : ps.arrays()) {
        manifest["arrays"].push_back({{"name", a.name},
                                      {"shape", a.shape},
                                      {"layer", a.layer},
                                      {"role", to_string(a.role)},
                                      {"decay", a.decay},
                                      {"offset", offset},
                                      {"count", a.size()}});
        offset += a.size();
    }
    manifest["payload_values"] = offset;
    const std::string text = manifest.dump();
    std::string payload;
    payload.reserve(offset * 8);
    for (const auto& a : ps.arrays()) {
        for (const double v : a.value) detail::put_f64_le(payload, v);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << "ETSMLP-CKPT " << kCheckpointVersion << ' ' << text.size() << '\n' << text;
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::string header;
    std::getline(in, header);
    std::istringstream hs(header);
    std::string magic;
    int version = 0;
    std::size_t manifest_bytes = 0;
    if (!(hs >> magic >> version >> manifest_bytes) || magic != "ETSMLP-CKPT") {
        throw std::runtime_error(path + ": not a checkpoint file");
    }
    if (version != kCheckpointVersion) throw std::runtime_error(path + ": unsupported checkpoint version");
    std::string text(manifest_bytes, '\0');
    in.read(text.data(), static_cast<std::streamsize>(manifest_bytes));
    if (!in) throw std::runtime_error(path + ": truncated manifest");
    const nlohmann::json manifest = nlohmann::json::parse(text);
    const std::size_t total = manifest.at("payload_values").get<std::size_t>();
    std::vector<unsigned char> payload(total * 8);
    in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    if (static_cast<std::size_t>(in.gcount()) != payload.size()) throw std::runtime_error(path + ": truncated payload");

    Checkpoint ck;
    ck.config = manifest.at("config");
    for (const auto& entry : manifest.at("arrays")) {
        auto& a = ck.params.add(entry.at("name").get<std::string>(), entry.at("shape").get<std::vector<std::size_t>>(),
                                entry.at("layer").get<int>(), role_from_string(entry.at("role").get<std::string>()),
                                entry.at("decay").get<bool>());
        const std::size_t offset = entry.at("offset").get<std::size_t>();
        const std::size_t count = entry.at("count").get<std::size_t>();
        if (count != a.size() || offset + count > total) throw std::runtime_error(path + ": inconsistent array table");
        for (std::size_t i = 0; i < count; ++i) a.value[i] = detail::get_f64_le(payload.data() + 8 * (offset + i));
    }
    return ck;
}

}  // namespace etsmlp

#endif  // ETSMLP_CHECKPOINT_HPP
