#ifndef ETSMLP_MEMORY_HPP
#define ETSMLP_MEMORY_HPP

// Instrumented allocation counting. Every activation, cache and FFT scratch
// buffer is a Buffer<T>, so the meter sees the live transient footprint of a
// train step independently of the host allocator.

#include <algorithm>
#include <atomic>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <new>
#include <vector>

namespace etsmlp {

class MemoryMeter {
public:
    static MemoryMeter& instance() {
        static MemoryMeter meter;
        return meter;
    }

    void allocate(std::size_t bytes) {
        const std::int64_t now = live_.fetch_add(static_cast<std::int64_t>(bytes)) +
                                 static_cast<std::int64_t>(bytes);
        std::int64_t peak = peak_.load();
        while (now > peak && !peak_.compare_exchange_weak(peak, now)) {
        }
    }
    void release(std::size_t bytes) { live_.fetch_sub(static_cast<std::int64_t>(bytes)); }

    std::int64_t live() const { return live_.load(); }
    std::int64_t peak() const { return peak_.load(); }
    void reset_peak() { peak_.store(live_.load()); }

private:
    std::atomic<std::int64_t> live_{0};
    std::atomic<std::int64_t> peak_{0};
};

template <class T>
struct TrackingAllocator {
    using value_type = T;

    TrackingAllocator() = default;
    template <class U>
    TrackingAllocator(const TrackingAllocator<U>&) noexcept {}

    static constexpr std::align_val_t kAlign{64};

    T* allocate(std::size_t n) {
        MemoryMeter::instance().allocate(n * sizeof(T));
        return static_cast<T*>(::operator new(n * sizeof(T), kAlign));
    }
    void deallocate(T* p, std::size_t n) noexcept {
        MemoryMeter::instance().release(n * sizeof(T));
        ::operator delete(p, kAlign);
    }

    template <class U>
    bool operator==(const TrackingAllocator<U>&) const noexcept {
        return true;
    }
};

/// 64-byte aligned, so FFT transforms can run on it directly.
template <class T>
using Buffer = std::vector<T, TrackingAllocator<T>>;

/// Measures the peak transient bytes allocated within its lifetime.
class PeakScope {
public:
    PeakScope() : base_(MemoryMeter::instance().live()) { MemoryMeter::instance().reset_peak(); }
    std::int64_t peak_bytes() const {
        return std::max<std::int64_t>(0, MemoryMeter::instance().peak() - base_);
    }

private:
    std::int64_t base_;
};

}  // namespace etsmlp

#endif  // ETSMLP_MEMORY_HPP
