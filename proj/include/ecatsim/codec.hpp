#pragma once

// Wire format of the simulated fieldbus.
//
// A frame is a concatenation of datagrams (no Ethernet framing):
//
//   offset  size  field
//   0       1     command code
//   1       1     index
//   2       4     address (LE). Positional/configured: low 16 bits slave
//                 position/station, high 16 bits register offset.
//                 Logical: 32-bit logical offset.
//   6       2     bits 0..10 payload length, bits 11..14 reserved, bit 15 "more"
//   8       2     reserved (zero)
//   10      n     payload
//   10+n    2     working counter (LE)
//
// Cyclic PDO images are packed little-endian in declaration order.

#include <array>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ecatsim {

class CodecError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Little-endian helpers
// ---------------------------------------------------------------------------

template <typename T>
    requires std::is_integral_v<T>
void store_le(std::span<std::uint8_t> out, std::size_t offset, T value)
{
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out[offset + i] = static_cast<std::uint8_t>(u >> (8 * i));
    }
}

template <typename T>
    requires std::is_integral_v<T>
T load_le(std::span<const std::uint8_t> in, std::size_t offset)
{
    using U = std::make_unsigned_t<T>;
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        u = static_cast<U>(u | (static_cast<U>(in[offset + i]) << (8 * i)));
    }
    return static_cast<T>(u);
}

// ---------------------------------------------------------------------------
// Datagrams
// ---------------------------------------------------------------------------

// Codes match the EtherCAT command numbering.
enum class Command : std::uint8_t {
    APRD = 1,
    APWR = 2,
    FPRD = 4,
    FPWR = 5,
    BRD = 7,
    LRD = 10,
    LWR = 11,
    LRW = 12,
};

std::string_view to_string(Command c);
bool is_logical(Command c);

inline constexpr std::size_t kHeaderSize = 10;
inline constexpr std::size_t kWkcSize = 2;
inline constexpr std::size_t kMaxPayload = 1486;

constexpr std::uint32_t make_node_address(std::uint16_t position_or_station,
                                          std::uint16_t register_offset)
{
    return static_cast<std::uint32_t>(position_or_station) |
           (static_cast<std::uint32_t>(register_offset) << 16);
}
constexpr std::uint16_t node_of(std::uint32_t address)
{
    return static_cast<std::uint16_t>(address & 0xFFFFu);
}
constexpr std::uint16_t register_of(std::uint32_t address)
{
    return static_cast<std::uint16_t>(address >> 16);
}

// Auto-increment address for ring position `position` (slaves count up to zero).
constexpr std::uint16_t auto_increment_address(std::uint16_t position)
{
    return static_cast<std::uint16_t>(0u - position);
}

struct DatagramHeader {
    Command command = Command::BRD;
    std::uint8_t index = 0;
    std::uint32_t address = 0;
    std::uint16_t length = 0;  // 11 bits on the wire
    bool more = false;

    friend bool operator==(const DatagramHeader&, const DatagramHeader&) = default;
};

struct Datagram {
    DatagramHeader header;
    std::vector<std::uint8_t> payload;
    std::uint16_t wkc = 0;

    // Header length is derived from the payload.
    static Datagram make(Command cmd, std::uint32_t address, std::size_t length,
                         std::uint8_t index = 0);

    std::size_t wire_size() const { return kHeaderSize + payload.size() + kWkcSize; }

    friend bool operator==(const Datagram&, const Datagram&) = default;
};

// Appends the wire form of `d` to `out`. Throws CodecError if the header
// length disagrees with the payload or exceeds kMaxPayload.
void encode_datagram_into(const Datagram& d, std::vector<std::uint8_t>& out);
std::vector<std::uint8_t> encode_datagram(const Datagram& d);

// Encodes a chain of datagrams; the `more` flag is set on every datagram
// except the last regardless of what the inputs carry.
std::vector<std::uint8_t> encode_frame(std::span<const Datagram> datagrams);

// Decodes a whole frame. Throws CodecError on empty input, truncation,
// an oversized length field, `more` on the final datagram, or trailing bytes.
std::vector<Datagram> decode_frame(std::span<const std::uint8_t> bytes);

// ---------------------------------------------------------------------------
// Process data images
// ---------------------------------------------------------------------------

inline constexpr std::size_t kServoPdoSize = 14;
inline constexpr std::size_t kIoPdoSize = 4;

inline constexpr std::int8_t kModeNone = 0;
inline constexpr std::int8_t kModeCyclicSyncVelocity = 9;

// Master -> drive. Wire order: controlword, target_position, target_velocity,
// mode_of_operation, pad (always 0), torque_offset.
struct ServoRxPdo {
    std::uint16_t controlword = 0;
    std::int32_t target_position = 0;
    std::int32_t target_velocity = 0;
    std::int8_t mode_of_operation = 0;
    std::int16_t torque_offset = 0;

    friend bool operator==(const ServoRxPdo&, const ServoRxPdo&) = default;
};

// Drive -> master. Wire order as declared.
struct ServoTxPdo {
    std::uint16_t statusword = 0;
    std::int32_t position_actual = 0;
    std::int32_t velocity_actual = 0;
    std::int16_t torque_actual = 0;
    std::int8_t mode_display = 0;
    std::uint8_t fault_code = 0;

    friend bool operator==(const ServoTxPdo&, const ServoTxPdo&) = default;
};

namespace io_bits {
inline constexpr std::uint8_t kLimitMin = 1u << 0;
inline constexpr std::uint8_t kLimitMax = 1u << 1;
inline constexpr std::uint8_t kEmergencyStop = 1u << 2;
}  // namespace io_bits

// IO slave -> master: one byte of digital inputs, three reserved zero bytes.
struct IoTxPdo {
    std::uint8_t digital_inputs = 0;

    bool limit_min() const { return digital_inputs & io_bits::kLimitMin; }
    bool limit_max() const { return digital_inputs & io_bits::kLimitMax; }
    bool emergency_stop() const { return digital_inputs & io_bits::kEmergencyStop; }

    friend bool operator==(const IoTxPdo&, const IoTxPdo&) = default;
};

// Master -> IO slave: one byte of digital outputs, three reserved zero bytes.
struct IoRxPdo {
    std::uint8_t digital_outputs = 0;

    friend bool operator==(const IoRxPdo&, const IoRxPdo&) = default;
};

using ServoPdoBytes = std::array<std::uint8_t, kServoPdoSize>;
using IoPdoBytes = std::array<std::uint8_t, kIoPdoSize>;

ServoPdoBytes pack_servo_rx(const ServoRxPdo& p);
ServoPdoBytes pack_servo_tx(const ServoTxPdo& p);
IoPdoBytes pack_io_tx(const IoTxPdo& p);
IoPdoBytes pack_io_rx(const IoRxPdo& p);

// Unpackers reject a wrong byte count and non-zero pad/reserved bytes.
ServoRxPdo unpack_servo_rx(std::span<const std::uint8_t> bytes);
ServoTxPdo unpack_servo_tx(std::span<const std::uint8_t> bytes);
IoTxPdo unpack_io_tx(std::span<const std::uint8_t> bytes);
IoRxPdo unpack_io_rx(std::span<const std::uint8_t> bytes);

// ---------------------------------------------------------------------------
// Text helpers for the `codec dump` tool
// ---------------------------------------------------------------------------

// Accepts hex digits with optional whitespace, ':' or '-' separators and an
// optional leading "0x". Throws CodecError on odd digit count or bad chars.
std::vector<std::uint8_t> parse_hex(std::string_view text);
std::string to_hex(std::span<const std::uint8_t> bytes);

// Human-readable listing of a decoded frame.
std::string describe_frame(std::span<const Datagram> datagrams);

}  // namespace ecatsim
