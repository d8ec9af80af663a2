#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <new>
#include <type_traits>

namespace ecatsim {

// Single-producer / single-consumer latest-value slot.
//
// Three buffers rotate between the producer ("back"), the consumer ("front")
// and a shared "middle" whose index is published through one atomic byte
// together with a fresh-data flag. Both sides are wait-free: a write is a copy
// plus one exchange, a read is one load plus (when fresh) one exchange. The
// consumer only ever reads the buffer it owns, so it can never observe a
// partially written value.
template <typename T>
    requires std::is_trivially_copyable_v<T>
class TripleBuffer {
public:
    TripleBuffer() = default;
    explicit TripleBuffer(const T& initial)
    {
        for (auto& s : slots_) {
            s.value = initial;
        }
    }

    TripleBuffer(const TripleBuffer&) = delete;
    TripleBuffer& operator=(const TripleBuffer&) = delete;

    // Producer side. Replaces any value the consumer has not taken yet.
    void write(const T& value) noexcept
    {
        slots_[back_].value = value;
        const auto prev =
            middle_.exchange(static_cast<std::uint8_t>(back_ | kFresh), std::memory_order_acq_rel);
        back_ = prev & kIndexMask;
    }

    // Consumer side. Returns true and copies the newest value if one arrived
    // since the last successful read.
    bool read(T& out) noexcept
    {
        if (!(middle_.load(std::memory_order_acquire) & kFresh)) {
            return false;
        }
        const auto prev = middle_.exchange(front_, std::memory_order_acq_rel);
        front_ = prev & kIndexMask;
        out = slots_[front_].value;
        return true;
    }

    // Consumer side: the value returned by the last successful read.
    const T& current() const noexcept { return slots_[front_].value; }

    // True if a write happened that has not been read. Either side may call.
    bool fresh() const noexcept { return middle_.load(std::memory_order_acquire) & kFresh; }

private:
    static constexpr std::uint8_t kIndexMask = 0x03;
    static constexpr std::uint8_t kFresh = 0x04;
    static constexpr std::size_t kLine = 64;

    struct alignas(kLine) Slot {
        T value{};
    };

    std::array<Slot, 3> slots_{};
    alignas(kLine) std::atomic<std::uint8_t> middle_{1};
    alignas(kLine) std::uint8_t back_ = 0;   // producer-owned
    alignas(kLine) std::uint8_t front_ = 2;  // consumer-owned
};

}  // namespace ecatsim
