#include "ecatsim/codec.hpp"

#include <cctype>

#include <fmt/format.h>

namespace ecatsim {

namespace {

constexpr std::uint16_t kLengthMask = 0x07FF;
constexpr std::uint16_t kMoreFlag = 0x8000;

bool valid_command(std::uint8_t code)
{
    switch (static_cast<Command>(code)) {
    case Command::APRD:
    case Command::APWR:
    case Command::FPRD:
    case Command::FPWR:
    case Command::BRD:
    case Command::LRD:
    case Command::LWR:
    case Command::LRW:
        return true;
    }
    return false;
}

void check_size(std::span<const std::uint8_t> bytes, std::size_t expected, const char* what)
{
    if (bytes.size() != expected) {
        throw CodecError(
            fmt::format("{}: expected {} bytes, got {}", what, expected, bytes.size()));
    }
}

void check_zero(std::span<const std::uint8_t> bytes, std::size_t from, const char* what)
{
    for (std::size_t i = from; i < bytes.size(); ++i) {
        if (bytes[i] != 0) {
            throw CodecError(fmt::format("{}: reserved byte {} is 0x{:02X}, expected 0", what,
                                         i, bytes[i]));
        }
    }
}

}  // namespace

std::string_view to_string(Command c)
{
    switch (c) {
    case Command::APRD: return "APRD";
    case Command::APWR: return "APWR";
    case Command::FPRD: return "FPRD";
    case Command::FPWR: return "FPWR";
    case Command::BRD: return "BRD";
    case Command::LRD: return "LRD";
    case Command::LWR: return "LWR";
    case Command::LRW: return "LRW";
    }
    return "?";
}

bool is_logical(Command c)
{
    return c == Command::LRD || c == Command::LWR || c == Command::LRW;
}

Datagram Datagram::make(Command cmd, std::uint32_t address, std::size_t length,
                        std::uint8_t index)
{
    if (length > kMaxPayload) {
        throw CodecError(fmt::format("datagram payload of {} bytes exceeds {}", length,
                                     kMaxPayload));
    }
    Datagram d;
    d.header.command = cmd;
    d.header.index = index;
    d.header.address = address;
    d.header.length = static_cast<std::uint16_t>(length);
    d.payload.assign(length, 0);
    return d;
}

void encode_datagram_into(const Datagram& d, std::vector<std::uint8_t>& out)
{
    if (d.header.length != d.payload.size()) {
        throw CodecError(fmt::format("header length {} does not match payload size {}",
                                     d.header.length, d.payload.size()));
    }
    if (d.header.length > kMaxPayload) {
        throw CodecError(fmt::format("datagram payload of {} bytes exceeds {}",
                                     d.header.length, kMaxPayload));
    }
    if (!valid_command(static_cast<std::uint8_t>(d.header.command))) {
        throw CodecError("invalid command code");
    }

    const std::size_t start = out.size();
    out.resize(start + d.wire_size());
    std::span<std::uint8_t> w(out.data() + start, d.wire_size());

    w[0] = static_cast<std::uint8_t>(d.header.command);
    w[1] = d.header.index;
    store_le<std::uint32_t>(w, 2, d.header.address);
    std::uint16_t len_flags = d.header.length & kLengthMask;
    if (d.header.more) {
        len_flags |= kMoreFlag;
    }
    store_le<std::uint16_t>(w, 6, len_flags);
    store_le<std::uint16_t>(w, 8, 0);
    std::copy(d.payload.begin(), d.payload.end(), w.begin() + kHeaderSize);
    store_le<std::uint16_t>(w, kHeaderSize + d.payload.size(), d.wkc);
}

std::vector<std::uint8_t> encode_datagram(const Datagram& d)
{
    std::vector<std::uint8_t> out;
    out.reserve(d.wire_size());
    encode_datagram_into(d, out);
    return out;
}

std::vector<std::uint8_t> encode_frame(std::span<const Datagram> datagrams)
{
    std::vector<std::uint8_t> out;
    std::size_t total = 0;
    for (const auto& d : datagrams) {
        total += d.wire_size();
    }
    out.reserve(total);
    for (std::size_t i = 0; i < datagrams.size(); ++i) {
        Datagram d = datagrams[i];
        d.header.more = (i + 1 < datagrams.size());
        encode_datagram_into(d, out);
    }
    return out;
}

std::vector<Datagram> decode_frame(std::span<const std::uint8_t> bytes)
{
    if (bytes.empty()) {
        throw CodecError("empty frame");
    }

    std::vector<Datagram> result;
    std::size_t pos = 0;
    bool more = true;
    while (more) {
        if (pos == bytes.size()) {
            throw CodecError(fmt::format(
                "truncated frame: datagram {} announced by 'more' flag is missing",
                result.size()));
        }
        const std::size_t remaining = bytes.size() - pos;
        if (remaining < kHeaderSize) {
            throw CodecError(fmt::format(
                "truncated frame: datagram {} header needs {} bytes, {} remain at offset {}",
                result.size(), kHeaderSize, remaining, pos));
        }
        auto h = bytes.subspan(pos, kHeaderSize);
        if (!valid_command(h[0])) {
            throw CodecError(fmt::format("unknown command code 0x{:02X} at offset {}", h[0], pos));
        }
        const auto len_flags = load_le<std::uint16_t>(h, 6);
        const std::size_t length = len_flags & kLengthMask;
        if (length > kMaxPayload) {
            throw CodecError(fmt::format("datagram {} length {} exceeds {}", result.size(),
                                         length, kMaxPayload));
        }
        if (remaining < kHeaderSize + length + kWkcSize) {
            throw CodecError(fmt::format(
                "truncated frame: datagram {} needs {} bytes, {} remain at offset {}",
                result.size(), kHeaderSize + length + kWkcSize, remaining, pos));
        }

        Datagram d;
        d.header.command = static_cast<Command>(h[0]);
        d.header.index = h[1];
        d.header.address = load_le<std::uint32_t>(h, 2);
        d.header.length = static_cast<std::uint16_t>(length);
        d.header.more = (len_flags & kMoreFlag) != 0;
        auto payload = bytes.subspan(pos + kHeaderSize, length);
        d.payload.assign(payload.begin(), payload.end());
        d.wkc = load_le<std::uint16_t>(bytes, pos + kHeaderSize + length);

        pos += d.wire_size();
        more = d.header.more;
        result.push_back(std::move(d));

        if (more && pos == bytes.size()) {
            throw CodecError(fmt::format(
                "'more' flag set on last datagram ({}) of the frame", result.size() - 1));
        }
    }
    if (pos != bytes.size()) {
        throw CodecError(fmt::format("{} trailing bytes after final datagram",
                                     bytes.size() - pos));
    }
    return result;
}

ServoPdoBytes pack_servo_rx(const ServoRxPdo& p)
{
    ServoPdoBytes b{};
    store_le<std::uint16_t>(b, 0, p.controlword);
    store_le<std::int32_t>(b, 2, p.target_position);
    store_le<std::int32_t>(b, 6, p.target_velocity);
    store_le<std::int8_t>(b, 10, p.mode_of_operation);
    b[11] = 0;
    store_le<std::int16_t>(b, 12, p.torque_offset);
    return b;
}

ServoRxPdo unpack_servo_rx(std::span<const std::uint8_t> bytes)
{
    check_size(bytes, kServoPdoSize, "servo RxPDO");
    if (bytes[11] != 0) {
        throw CodecError(fmt::format("servo RxPDO: pad byte is 0x{:02X}, expected 0", bytes[11]));
    }
    ServoRxPdo p;
    p.controlword = load_le<std::uint16_t>(bytes, 0);
    p.target_position = load_le<std::int32_t>(bytes, 2);
    p.target_velocity = load_le<std::int32_t>(bytes, 6);
    p.mode_of_operation = load_le<std::int8_t>(bytes, 10);
    p.torque_offset = load_le<std::int16_t>(bytes, 12);
    return p;
}

ServoPdoBytes pack_servo_tx(const ServoTxPdo& p)
{
    ServoPdoBytes b{};
    store_le<std::uint16_t>(b, 0, p.statusword);
    store_le<std::int32_t>(b, 2, p.position_actual);
    store_le<std::int32_t>(b, 6, p.velocity_actual);
    store_le<std::int16_t>(b, 10, p.torque_actual);
    store_le<std::int8_t>(b, 12, p.mode_display);
    b[13] = p.fault_code;
    return b;
}

ServoTxPdo unpack_servo_tx(std::span<const std::uint8_t> bytes)
{
    check_size(bytes, kServoPdoSize, "servo TxPDO");
    ServoTxPdo p;
    p.statusword = load_le<std::uint16_t>(bytes, 0);
    p.position_actual = load_le<std::int32_t>(bytes, 2);
    p.velocity_actual = load_le<std::int32_t>(bytes, 6);
    p.torque_actual = load_le<std::int16_t>(bytes, 10);
    p.mode_display = load_le<std::int8_t>(bytes, 12);
    p.fault_code = bytes[13];
    return p;
}

IoPdoBytes pack_io_tx(const IoTxPdo& p)
{
    return {p.digital_inputs, 0, 0, 0};
}

IoPdoBytes pack_io_rx(const IoRxPdo& p)
{
    return {p.digital_outputs, 0, 0, 0};
}

IoTxPdo unpack_io_tx(std::span<const std::uint8_t> bytes)
{
    check_size(bytes, kIoPdoSize, "IO TxPDO");
    check_zero(bytes, 1, "IO TxPDO");
    return IoTxPdo{bytes[0]};
}

IoRxPdo unpack_io_rx(std::span<const std::uint8_t> bytes)
{
    check_size(bytes, kIoPdoSize, "IO RxPDO");
    check_zero(bytes, 1, "IO RxPDO");
    return IoRxPdo{bytes[0]};
}

std::vector<std::uint8_t> parse_hex(std::string_view text)
{
    std::vector<std::uint8_t> out;
    int pending = -1;
    std::size_t i = 0;
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    while (i < text.size()) {
        const char c = text[i];
        if (std::isspace(static_cast<unsigned char>(c)) || c == ':' || c == '-' || c == ',') {
            ++i;
            continue;
        }
        if (c == '0' && i + 1 < text.size() && (text[i + 1] == 'x' || text[i + 1] == 'X') &&
            pending < 0) {
            i += 2;
            continue;
        }
        const int v = nibble(c);
        if (v < 0) {
            throw CodecError(fmt::format("invalid hex character '{}' at position {}", c, i));
        }
        if (pending < 0) {
            pending = v;
        } else {
            out.push_back(static_cast<std::uint8_t>((pending << 4) | v));
            pending = -1;
        }
        ++i;
    }
    if (pending >= 0) {
        throw CodecError("odd number of hex digits");
    }
    return out;
}

std::string to_hex(std::span<const std::uint8_t> bytes)
{
    std::string s;
    s.reserve(bytes.size() * 3);
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        if (i) s.push_back(' ');
        s += fmt::format("{:02X}", bytes[i]);
    }
    return s;
}

std::string describe_frame(std::span<const Datagram> datagrams)
{
    std::string s;
    std::size_t offset = 0;
    for (std::size_t i = 0; i < datagrams.size(); ++i) {
        const auto& d = datagrams[i];
        const auto& h = d.header;
        s += fmt::format("datagram {} @ byte {}\n", i, offset);
        s += fmt::format("  command  {} (0x{:02X})\n", to_string(h.command),
                         static_cast<unsigned>(h.command));
        s += fmt::format("  index    {}\n", h.index);
        if (is_logical(h.command)) {
            s += fmt::format("  address  logical 0x{:08X}\n", h.address);
        } else {
            s += fmt::format("  address  node 0x{:04X} register 0x{:04X}\n", node_of(h.address),
                             register_of(h.address));
        }
        s += fmt::format("  length   {}\n", h.length);
        s += fmt::format("  more     {}\n", h.more ? "yes" : "no");
        s += fmt::format("  payload  {}\n", d.payload.empty() ? "-" : to_hex(d.payload));
        s += fmt::format("  wkc      {}\n", d.wkc);
        offset += d.wire_size();
    }
    return s;
}

}  // namespace ecatsim
