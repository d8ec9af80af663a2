#include <doctest.h>

#include <algorithm>
#include <random>

#include "ecatsim/master.hpp"
#include "oracles.hpp"

using namespace ecatsim;

namespace {

Master operational(Bus bus)
{
    Master m(std::move(bus));
    m.scan();
    m.configure();
    m.request_al_state(AlState::PreOp);
    m.request_al_state(AlState::SafeOp);
    m.request_al_state(AlState::Op);
    return m;
}

}  // namespace

TEST_CASE("scan of the default ring")
{
    Master m(Bus::default_ring());
    const auto& slaves = m.scan();
    REQUIRE(slaves.size() == 4);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(slaves[i].kind() == SlaveKind::Servo);
        CHECK(slaves[i].rx_bytes + slaves[i].tx_bytes == 28);
        CHECK(slaves[i].station_address == 0x1000 + i);
    }
    CHECK(slaves[3].kind() == SlaveKind::Io);
    CHECK(slaves[3].rx_bytes + slaves[3].tx_bytes == 8);
    CHECK(m.state().phase == MasterPhase::Scanned);
}

TEST_CASE("empty ring is a bus error")
{
    Master m(Bus(std::vector<Slave>{}));
    CHECK_THROWS_AS(m.scan(), BusError);
}

TEST_CASE("domain entries tile the image without gaps or overlaps")
{
    std::mt19937 rng(7);
    for (int iter = 0; iter < 200; ++iter) {
        std::vector<SlaveInfo> slaves;
        const std::size_t n = 1 + rng() % 16;
        std::size_t expected_total = 0;
        std::uint16_t expected_wkc = 0;
        for (std::size_t i = 0; i < n; ++i) {
            SlaveInfo s;
            s.ring_position = i;
            s.rx_bytes = static_cast<std::uint16_t>(rng() % 3 == 0 ? 0 : rng() % 40);
            s.tx_bytes = static_cast<std::uint16_t>(rng() % 3 == 0 ? 0 : rng() % 40);
            expected_total += s.rx_bytes + s.tx_bytes;
            if (s.has_pdo()) expected_wkc += 3;
            slaves.push_back(s);
        }
        const Domain d = build_domain(slaves);
        REQUIRE(d.total_size == expected_total);
        REQUIRE(d.image.size() == expected_total);
        REQUIRE(d.expected_wkc == expected_wkc);

        // Interval cover: sorted by offset, each entry starts where the last ended.
        auto entries = d.entries;
        std::sort(entries.begin(), entries.end(),
                  [](const DomainEntry& a, const DomainEntry& b) { return a.offset < b.offset; });
        std::size_t cursor = 0;
        for (const auto& e : entries) {
            REQUIRE(e.offset == cursor);
            REQUIRE(e.length > 0);
            cursor += e.length;
        }
        REQUIRE(cursor == expected_total);
        // Ring order, outputs first.
        REQUIRE(std::is_sorted(d.entries.begin(), d.entries.end(),
                               [](const DomainEntry& a, const DomainEntry& b) {
                                   return std::pair(a.ring_position, a.direction) <
                                          std::pair(b.ring_position, b.direction);
                               }));
    }
}

TEST_CASE("default domain layout")
{
    Master m(Bus::default_ring());
    m.scan();
    const auto& d = m.configure();
    CHECK(d.total_size == 92);
    CHECK(d.expected_wkc == 12);
    CHECK(d.find(1, PdoDirection::Output)->offset == 28);
    CHECK(d.find(1, PdoDirection::Input)->offset == 42);
    CHECK(d.find(3, PdoDirection::Output)->offset == 84);
    CHECK(d.find(3, PdoDirection::Input)->offset == 88);
    CHECK(d.describe().find("88") != std::string::npos);
}

TEST_CASE("AL state walk and errors")
{
    Master m(Bus::default_ring());
    CHECK_THROWS_AS(m.request_al_state(AlState::PreOp), std::logic_error);
    m.scan();
    CHECK_THROWS_AS(m.request_al_state(AlState::SafeOp), std::logic_error);
    m.request_al_state(AlState::PreOp);
    CHECK_THROWS_AS(m.request_al_state(AlState::SafeOp), std::logic_error);  // not configured
    m.configure();
    CHECK_THROWS_AS(m.request_al_state(AlState::Op), std::logic_error);  // skips SAFEOP

    m.bus().refuse_al_state(2, AlState::SafeOp);
    try {
        m.request_al_state(AlState::SafeOp);
        FAIL("expected AlTransitionError");
    } catch (const AlTransitionError& e) {
        CHECK(e.ring_position() == 2);
        CHECK(e.al_status_code() == al_code::kUnspecified);
        CHECK(std::string(e.what()).find("0x1002") != std::string::npos);
    }
    CHECK(m.al_state() == AlState::PreOp);

    m.bus().refuse_al_state(2, AlState::SafeOp, false);
    m.request_al_state(AlState::SafeOp);
    m.request_al_state(AlState::Op);
    CHECK(m.state().phase == MasterPhase::Operational);
    m.request_al_state(AlState::Init);
    CHECK(m.al_state() == AlState::Init);
    CHECK(m.state().phase == MasterPhase::Configured);
}

TEST_CASE("exchange moves outputs to slaves and inputs back")
{
    Master m = operational(Bus::default_ring());
    auto out = m.domain().outputs(0);
    ServoRxPdo cmd;
    cmd.controlword = controlword::kShutdown;
    cmd.mode_of_operation = kModeCyclicSyncVelocity;
    const auto bytes = pack_servo_rx(cmd);
    std::copy(bytes.begin(), bytes.end(), out.begin());
    inject_input(m.bus().io(3), IoInput::LimitMax, true);

    const auto r = m.exchange();
    CHECK(r.wkc == 12);
    CHECK_FALSE(r.degraded);
    CHECK(m.bus().servo(0).cia402_state == Cia402State::ReadyToSwitchOn);
    CHECK(unpack_io_tx(m.domain().inputs(3)).limit_max());
    m.exchange();
    CHECK(unpack_servo_tx(m.domain().inputs(0)).statusword == statusword::kReadyToSwitchOn);
    CHECK(m.state().cycle_counter == 2);
}

TEST_CASE("exchange below OP is degraded")
{
    Master m(Bus::default_ring());
    m.scan();
    m.configure();
    m.request_al_state(AlState::PreOp);
    m.request_al_state(AlState::SafeOp);
    const auto r = m.exchange();
    CHECK(r.wkc == 4);
    CHECK(r.degraded);
    CHECK(m.state().degraded_cycles == 1);
}

TEST_CASE("working counter matches the sum of per-slave increments")
{
    std::mt19937 rng(2024);
    for (int iter = 0; iter < 200; ++iter) {
        const std::size_t n = 1 + rng() % 16;
        std::vector<SlaveKind> kinds;
        for (std::size_t i = 0; i < n; ++i) {
            kinds.push_back(rng() % 2 ? SlaveKind::Servo : SlaveKind::Io);
        }
        Master m = operational(Bus::from_kinds(kinds));
        unsigned expected = 0;
        for (std::size_t i = 0; i < n; ++i) {
            auto& e = esc_of(m.bus().slave(i));
            if (rng() % 4 == 0) e.online = false;
            if (rng() % 5 == 0) e.al_state = (rng() % 2) ? AlState::SafeOp : AlState::PreOp;
            expected += oracle::lrw_increment(e);
        }
        const auto r = m.exchange();
        REQUIRE(r.wkc == expected);
        REQUIRE(r.degraded == (expected != 3 * n));
    }
}
