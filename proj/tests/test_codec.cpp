#include <doctest.h>

#include <random>

#include "ecatsim/codec.hpp"
#include "oracles.hpp"

using namespace ecatsim;

namespace {

constexpr Command kCommands[] = {Command::APRD, Command::APWR, Command::FPRD, Command::FPWR,
                                 Command::BRD,  Command::LRD,  Command::LWR,  Command::LRW};

Datagram random_datagram(std::mt19937& rng, std::size_t max_len)
{
    std::uniform_int_distribution<int> byte(0, 255);
    std::uniform_int_distribution<std::size_t> len(0, max_len);
    Datagram d = Datagram::make(kCommands[rng() % 8], static_cast<std::uint32_t>(rng()), len(rng),
                                static_cast<std::uint8_t>(byte(rng)));
    for (auto& x : d.payload) x = static_cast<std::uint8_t>(byte(rng));
    d.wkc = static_cast<std::uint16_t>(rng());
    return d;
}

}  // namespace

TEST_CASE("datagram bytes at known positions")
{
    Datagram d = Datagram::make(Command::LRW, 0x00010000, 2, 0x5A);
    d.payload = {0xAA, 0xBB};
    d.wkc = 3;
    const std::vector<std::uint8_t> expected{0x0C, 0x5A, 0x00, 0x00, 0x01, 0x00, 0x02,
                                             0x00, 0x00, 0x00, 0xAA, 0xBB, 0x03, 0x00};
    CHECK(encode_datagram(d) == expected);
    CHECK(d.wire_size() == expected.size());

    Datagram second = Datagram::make(Command::BRD, 0, 0);
    const Datagram pair[] = {d, second};
    const auto frame = encode_frame(pair);
    CHECK(frame[6] == 0x02);
    CHECK(frame[7] == 0x80);  // more flag on the first datagram
    CHECK(frame[14 + 7] == 0x00);
}

TEST_CASE("node addressing helpers")
{
    CHECK(make_node_address(0x1002, 0x0130) == 0x01301002u);
    CHECK(node_of(0x01301002u) == 0x1002);
    CHECK(register_of(0x01301002u) == 0x0130);
    CHECK(auto_increment_address(0) == 0);
    CHECK(auto_increment_address(3) == 0xFFFD);
    CHECK(is_logical(Command::LRW));
    CHECK_FALSE(is_logical(Command::FPRD));
    CHECK(to_string(Command::APWR) == "APWR");
}

TEST_CASE("randomized frames round-trip and match the reference encoder")
{
    std::mt19937 rng(1234);
    for (int iter = 0; iter < 2000; ++iter) {
        const std::size_t n = 1 + rng() % 4;
        std::vector<Datagram> dgs;
        std::vector<std::uint8_t> ref;
        for (std::size_t i = 0; i < n; ++i) {
            dgs.push_back(random_datagram(rng, 64));
            dgs.back().header.more = i + 1 < n;
            const auto r = oracle::encode(dgs.back(), i + 1 < n);
            ref.insert(ref.end(), r.begin(), r.end());
        }
        const auto bytes = encode_frame(dgs);
        REQUIRE(bytes == ref);
        REQUIRE(decode_frame(bytes) == dgs);
    }
}

TEST_CASE("maximum payload is accepted and one more byte is not")
{
    Datagram d = Datagram::make(Command::LWR, 0, kMaxPayload);
    const auto bytes = encode_datagram(d);
    CHECK(bytes.size() == kHeaderSize + kMaxPayload + kWkcSize);
    CHECK(decode_frame(bytes).front().payload.size() == kMaxPayload);

    d.payload.push_back(0);
    d.header.length = static_cast<std::uint16_t>(d.payload.size());
    CHECK_THROWS_AS(encode_datagram(d), CodecError);

    auto forged = bytes;
    forged[6] = static_cast<std::uint8_t>((kMaxPayload + 1) & 0xFF);
    forged[7] = static_cast<std::uint8_t>((kMaxPayload + 1) >> 8);
    forged.push_back(0);
    CHECK_THROWS_AS(decode_frame(forged), CodecError);
}

TEST_CASE("decoder rejects malformed frames")
{
    CHECK_THROWS_AS(decode_frame({}), CodecError);

    Datagram d = Datagram::make(Command::APRD, 0, 4);
    auto bytes = encode_datagram(d);
    auto truncated = bytes;
    truncated.pop_back();
    CHECK_THROWS_WITH_AS(decode_frame(truncated), doctest::Contains("truncated"), CodecError);

    auto header_only = std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 5);
    CHECK_THROWS_AS(decode_frame(header_only), CodecError);

    auto bad_cmd = bytes;
    bad_cmd[0] = 0x03;
    CHECK_THROWS_AS(decode_frame(bad_cmd), CodecError);

    auto dangling_more = bytes;
    dangling_more[7] |= 0x80;
    CHECK_THROWS_AS(decode_frame(dangling_more), CodecError);

    auto trailing = bytes;
    trailing.push_back(0);
    CHECK_THROWS_AS(decode_frame(trailing), CodecError);
}

TEST_CASE("encode checks header length against payload")
{
    Datagram d = Datagram::make(Command::FPWR, 0, 2);
    d.header.length = 3;
    CHECK_THROWS_AS(encode_datagram(d), CodecError);
}

TEST_CASE("servo PDO byte layout")
{
    ServoRxPdo rx{0x000F, 0x01020304, -1, kModeCyclicSyncVelocity, 0x1234};
    const ServoPdoBytes rx_bytes{0x0F, 0x00, 0x04, 0x03, 0x02, 0x01, 0xFF,
                                 0xFF, 0xFF, 0xFF, 0x09, 0x00, 0x34, 0x12};
    CHECK(pack_servo_rx(rx) == rx_bytes);
    CHECK(unpack_servo_rx(rx_bytes) == rx);

    ServoTxPdo tx{0x0027, -2, 5000, -1, 9, 0xFE};
    const ServoPdoBytes tx_bytes{0x27, 0x00, 0xFE, 0xFF, 0xFF, 0xFF, 0x88,
                                 0x13, 0x00, 0x00, 0xFF, 0xFF, 0x09, 0xFE};
    CHECK(pack_servo_tx(tx) == tx_bytes);
    CHECK(unpack_servo_tx(tx_bytes) == tx);
}

TEST_CASE("servo PDO unpack rejects pad and size errors")
{
    auto bytes = pack_servo_rx({});
    bytes[11] = 1;
    CHECK_THROWS_AS(unpack_servo_rx(bytes), CodecError);
    const std::uint8_t short_buf[13]{};
    CHECK_THROWS_AS(unpack_servo_rx(short_buf), CodecError);
    CHECK_THROWS_AS(unpack_servo_tx(short_buf), CodecError);
}

TEST_CASE("IO PDO layout and reserved bytes")
{
    IoTxPdo in{io_bits::kEmergencyStop | io_bits::kLimitMin};
    const IoPdoBytes expected{0x05, 0, 0, 0};
    CHECK(pack_io_tx(in) == expected);
    const auto back = unpack_io_tx(expected);
    CHECK(back.emergency_stop());
    CHECK(back.limit_min());
    CHECK_FALSE(back.limit_max());

    CHECK(pack_io_rx({0xA5}) == IoPdoBytes{0xA5, 0, 0, 0});
    CHECK_THROWS_AS(unpack_io_rx(IoPdoBytes{0, 0, 1, 0}), CodecError);
    const std::uint8_t five[5]{};
    CHECK_THROWS_AS(unpack_io_tx(five), CodecError);
}

TEST_CASE("randomized PDOs round-trip")
{
    std::mt19937 rng(99);
    for (int i = 0; i < 2000; ++i) {
        ServoRxPdo rx{static_cast<std::uint16_t>(rng()), static_cast<std::int32_t>(rng()),
                      static_cast<std::int32_t>(rng()), static_cast<std::int8_t>(rng()),
                      static_cast<std::int16_t>(rng())};
        REQUIRE(unpack_servo_rx(pack_servo_rx(rx)) == rx);
        ServoTxPdo tx{static_cast<std::uint16_t>(rng()), static_cast<std::int32_t>(rng()),
                      static_cast<std::int32_t>(rng()), static_cast<std::int16_t>(rng()),
                      static_cast<std::int8_t>(rng()), static_cast<std::uint8_t>(rng())};
        REQUIRE(unpack_servo_tx(pack_servo_tx(tx)) == tx);
        IoTxPdo io{static_cast<std::uint8_t>(rng())};
        REQUIRE(unpack_io_tx(pack_io_tx(io)) == io);
    }
}

TEST_CASE("hex parsing and frame description")
{
    CHECK(parse_hex("0x0c 5a:00-01,ff") == std::vector<std::uint8_t>{0x0C, 0x5A, 0x00, 0x01, 0xFF});
    CHECK_THROWS_AS(parse_hex("abc"), CodecError);
    CHECK_THROWS_AS(parse_hex("zz"), CodecError);
    CHECK(to_hex(std::vector<std::uint8_t>{0x0C, 0xAB}) == "0C AB");

    const auto frame = decode_frame(parse_hex("0C 00 00 00 00 00 02 00 00 00 AA BB 03 00"));
    const auto text = describe_frame(frame);
    CHECK(text.find("LRW") != std::string::npos);
    CHECK(text.find("wkc      3") != std::string::npos);
}
