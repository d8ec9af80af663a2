#include <doctest.h>

#include <cmath>
#include <ios>

#include "ecatsim/slave_sim.hpp"
#include "oracles.hpp"

using namespace ecatsim;

namespace {

ServoRxPdo csv(std::uint16_t cw, std::int32_t v)
{
    ServoRxPdo rx;
    rx.controlword = cw;
    rx.target_velocity = v;
    rx.mode_of_operation = kModeCyclicSyncVelocity;
    return rx;
}

void enable(ServoDrive& d)
{
    for (std::uint16_t cw : {controlword::kShutdown, controlword::kSwitchOn,
                             controlword::kEnableOperation}) {
        servo_step(d, csv(cw, 0), 0.001);
    }
    REQUIRE(d.cia402_state == Cia402State::OperationEnabled);
}

}  // namespace

TEST_CASE("CiA 402 transitions match the bit-level oracle for every controlword")
{
    for (auto s : kAllCia402States) {
        for (std::uint32_t cw = 0; cw <= 0xFFFF; ++cw) {
            const auto got = cia402_transition(s, static_cast<std::uint16_t>(cw));
            if (got != oracle::cia402_next(s, static_cast<std::uint16_t>(cw))) {
                FAIL("state " << to_string(s) << " cw 0x" << std::hex << cw);
            }
        }
    }
}

TEST_CASE("statusword encoding is invertible")
{
    for (auto s : kAllCia402States) {
        CHECK(decode_statusword(statusword_for(s)) == s);
    }
    CHECK(statusword_for(Cia402State::OperationEnabled) == 0x27);
    CHECK(decode_statusword(0x0237) == Cia402State::OperationEnabled);  // extra high bits ignored
    CHECK_FALSE(decode_statusword(0x0000).has_value());
}

TEST_CASE("servo integrates velocity only while enabled in CSV")
{
    ServoDrive d;
    servo_step(d, csv(controlword::kShutdown, 1000), 0.001);
    CHECK(d.position == 0);
    enable(d);
    std::int64_t expected = 0;
    for (int i = 0; i < 100; ++i) {
        const std::int32_t v = (i % 7) * 333 - 1000;
        const auto fb = servo_step(d, csv(controlword::kEnableOperation, v), 0.001);
        expected += std::llround(v * 0.001);
        CHECK(fb.velocity_actual == v);
    }
    CHECK(d.position == expected);
    CHECK(d.tx_pdo().position_actual == static_cast<std::int32_t>(expected));

    servo_step(d, csv(controlword::kDisableVoltage, 5000), 0.001);
    const auto held = d.position;
    servo_step(d, csv(controlword::kDisableVoltage, 5000), 0.001);
    CHECK(d.position == held);
    CHECK(d.velocity == 0);
}

TEST_CASE("unsupported mode faults the drive and fault reset recovers")
{
    ServoDrive d;
    enable(d);
    ServoRxPdo rx = csv(controlword::kEnableOperation, 100);
    rx.mode_of_operation = 3;
    servo_step(d, rx, 0.001);
    CHECK(d.cia402_state == Cia402State::Fault);
    CHECK(d.fault_code == fault::kUnsupportedMode);
    CHECK(d.tx_pdo().statusword == statusword::kFault);

    servo_step(d, csv(controlword::kFaultReset, 0), 0.001);
    CHECK(d.cia402_state == Cia402State::SwitchOnDisabled);
    CHECK(d.fault_code == fault::kNone);

    inject_fault(d);
    CHECK(d.cia402_state == Cia402State::Fault);
    CHECK(d.fault_code == fault::kInjected);
}

TEST_CASE("IO slave inputs and outputs")
{
    DigitalIoSlave io;
    inject_input(io, io_input_from_name("estop"), true);
    inject_input(io, 0u, true);
    auto in = io_step(io, IoRxPdo{0x3C});
    CHECK(in.emergency_stop());
    CHECK(in.limit_min());
    CHECK_FALSE(in.limit_max());
    CHECK(io.outputs.digital_outputs == 0x3C);
    inject_input(io, IoInput::EmergencyStop, false);
    CHECK_FALSE(io_step(io, {}).emergency_stop());
    CHECK(io_input_from_bit(1) == IoInput::LimitMax);
    CHECK_THROWS_AS(io_input_from_bit(3), std::invalid_argument);
    CHECK_THROWS_AS(io_input_from_name("horn"), std::invalid_argument);
}

TEST_CASE("positional and broadcast register access")
{
    Bus bus = Bus::default_ring();
    auto count = bus_cycle({Datagram::make(Command::BRD, 0, 2)}, bus);
    CHECK(count[0].wkc == 4);

    // APRD to the third slave: identity read.
    auto id = bus_cycle(
        {Datagram::make(Command::APRD, make_node_address(auto_increment_address(3), reg::kIdentity),
                        reg::kIdentitySize)},
        bus);
    CHECK(id[0].wkc == 1);
    CHECK(load_le<std::uint32_t>(id[0].payload, 0) == kIoIdentity.vendor_id);
    CHECK(load_le<std::uint16_t>(id[0].payload, 8) == 4);

    // Station address assignment, then configured-address read.
    Datagram w = Datagram::make(Command::APWR,
                                make_node_address(auto_increment_address(1), reg::kStationAddress), 2);
    store_le<std::uint16_t>(w.payload, 0, 0x1001);
    CHECK(bus_cycle({w}, bus)[0].wkc == 1);
    CHECK(esc_of(bus.slave(1)).station_address == 0x1001);
    auto st = bus_cycle({Datagram::make(Command::FPRD, make_node_address(0x1001, reg::kAlStatus), 2)},
                        bus);
    CHECK(st[0].wkc == 1);
    CHECK(load_le<std::uint16_t>(st[0].payload, 0) == 0x01);

    // Identity is read-only.
    Datagram forge = Datagram::make(Command::FPWR, make_node_address(0x1001, reg::kIdentity), 4);
    store_le<std::uint32_t>(forge.payload, 0, 0xDEADBEEF);
    bus_cycle({forge}, bus);
    auto again = bus_cycle(
        {Datagram::make(Command::FPRD, make_node_address(0x1001, reg::kIdentity), 4)}, bus);
    CHECK(load_le<std::uint32_t>(again[0].payload, 0) == kServoIdentity.vendor_id);
}

TEST_CASE("offline slaves are transparent")
{
    Bus bus = Bus::default_ring();
    bus.set_online(1, false);
    CHECK(bus_cycle({Datagram::make(Command::BRD, 0, 2)}, bus)[0].wkc == 3);
    // Position 1 now resolves to what was ring position 2.
    auto id = bus_cycle({Datagram::make(Command::APRD,
                                        make_node_address(auto_increment_address(2), reg::kIdentity),
                                        reg::kIdentitySize)},
                        bus);
    CHECK(load_le<std::uint32_t>(id[0].payload, 0) == kIoIdentity.vendor_id);
}

TEST_CASE("AL control validation")
{
    Bus bus = Bus::from_kinds(std::vector{SlaveKind::Servo});
    auto write_al = [&](std::uint16_t value) {
        Datagram d = Datagram::make(Command::APWR, make_node_address(0, reg::kAlControl), 2);
        store_le<std::uint16_t>(d.payload, 0, value);
        bus_cycle({d}, bus);
        return esc_of(bus.slave(0));
    };
    CHECK(write_al(0x03).al_status_code == al_code::kUnknownState);
    CHECK(write_al(0x04).al_status_code == al_code::kInvalidStateChange);
    CHECK(write_al(0x02).al_state == AlState::PreOp);
    CHECK(write_al(0x04).al_status_code == al_code::kInvalidOutputConfig);

    bus.refuse_al_state(0, AlState::Init);
    const auto e = write_al(0x01);
    CHECK(e.al_error);
    CHECK(e.al_status_code == al_code::kUnspecified);
    CHECK(e.al_state == AlState::PreOp);
}

TEST_CASE("propagation delay scales with traversed hops")
{
    Bus bus = Bus::from_kinds(std::vector{SlaveKind::Servo, SlaveKind::Servo, SlaveKind::Io},
                              std::chrono::nanoseconds{250});
    bus_cycle({Datagram::make(Command::BRD, 0, 2)}, bus);
    CHECK(bus.last_propagation_delay().count() % 250 == 0);
    CHECK(bus.last_propagation_delay().count() >= 3 * 250);
    CHECK_THROWS_AS(bus.servo(2), std::invalid_argument);
    CHECK_THROWS_AS(bus.slave(3), std::out_of_range);
}
