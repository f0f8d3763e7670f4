#ifndef ETSMLP_BATCH_HPP
#define ETSMLP_BATCH_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

namespace etsmlp {

/// Right-padded token batch of shape (size, length).
struct Batch {
    std::size_t size = 0;
    std::size_t length = 0;
    std::vector<int> tokens;
    /// 1 for real tokens, 0 for padding.
    std::vector<std::uint8_t> mask;
    std::vector<int> labels;
    std::vector<std::size_t> lengths;
};

}  // namespace etsmlp

#endif  // ETSMLP_BATCH_HPP
