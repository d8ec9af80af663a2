#pragma once

// Fieldbus master modelled on the IgH master/domain split: scan the ring,
// lay every slave's process data out in a single logical image (domain), walk
// the slaves through INIT -> PREOP -> SAFEOP -> OP, then exchange the image
// once per cycle with a single LRW datagram.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecatsim/codec.hpp"
#include "ecatsim/slave_sim.hpp"

namespace ecatsim {

class BusError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class AlTransitionError : public BusError {
public:
    AlTransitionError(std::string what, std::size_t ring_position, std::uint16_t al_status_code)
        : BusError(std::move(what)), ring_position_(ring_position), code_(al_status_code)
    {
    }
    std::size_t ring_position() const { return ring_position_; }
    std::uint16_t al_status_code() const { return code_; }

private:
    std::size_t ring_position_;
    std::uint16_t code_;
};

inline constexpr std::uint16_t kStationAddressBase = 0x1000;

struct SlaveInfo {
    std::size_t ring_position = 0;
    std::uint16_t station_address = 0;
    Identity identity;
    AlState al_state = AlState::Init;
    std::uint16_t rx_bytes = 0;
    std::uint16_t tx_bytes = 0;

    // Servo or IO, inferred from the identity; nullopt for unknown devices.
    std::optional<SlaveKind> kind() const;
    bool has_pdo() const { return rx_bytes + tx_bytes > 0; }

    friend bool operator==(const SlaveInfo&, const SlaveInfo&) = default;
};

enum class PdoDirection : std::uint8_t { Output, Input };

struct DomainEntry {
    std::size_t ring_position = 0;
    PdoDirection direction = PdoDirection::Output;
    std::size_t offset = 0;
    std::size_t length = 0;

    friend bool operator==(const DomainEntry&, const DomainEntry&) = default;
};

struct Domain {
    std::size_t total_size = 0;
    std::vector<DomainEntry> entries;
    std::vector<std::uint8_t> image;
    std::uint16_t last_wkc = 0;
    std::uint16_t expected_wkc = 0;

    const DomainEntry* find(std::size_t ring_position, PdoDirection direction) const;

    // Views into the image for one slave. Throw std::out_of_range if the slave
    // has no entry in that direction.
    std::span<std::uint8_t> outputs(std::size_t ring_position);
    std::span<const std::uint8_t> inputs(std::size_t ring_position) const;

    // Offset table as text, one line per entry.
    std::string describe() const;
};

// Lays entries out gaplessly in ring order, outputs before inputs for each
// slave. expected_wkc is 3 per PDO-bearing slave (LRW: read +1, write +2).
Domain build_domain(std::span<const SlaveInfo> slaves);

struct ExchangeResult {
    std::uint16_t wkc = 0;
    bool degraded = false;
};

enum class MasterPhase : std::uint8_t { Idle, Scanned, Configured, Operational };

std::string_view to_string(MasterPhase p);

struct MasterState {
    MasterPhase phase = MasterPhase::Idle;
    std::uint64_t cycle_counter = 0;
    // Result of the most recent exchange.
    bool degraded = false;
    std::uint64_t degraded_cycles = 0;
};

class Master {
public:
    explicit Master(Bus bus);

    Bus& bus() { return bus_; }
    const Bus& bus() const { return bus_; }

    // Counts slaves with a broadcast read, assigns station addresses
    // 0x1000 + position and reads every slave's identity and AL state.
    // Throws BusError on an empty ring or an unanswered datagram.
    const std::vector<SlaveInfo>& scan();

    // Builds the domain from the last scan and writes each slave's logical
    // window. Requires a prior scan.
    Domain& configure();

    // Moves every slave to `target`. Upward transitions must be one step at a
    // time; any state may go back to INIT or down. Throws std::logic_error for
    // a disallowed request and AlTransitionError naming the first slave that
    // did not reach the target.
    void request_al_state(AlState target);

    // One LRW over the whole image. Never throws; a working counter below
    // expectation is reported as degraded.
    ExchangeResult exchange();

    const std::vector<SlaveInfo>& slaves() const { return slaves_; }
    Domain& domain() { return domain_; }
    const Domain& domain() const { return domain_; }
    const MasterState& state() const { return state_; }
    AlState al_state() const { return al_state_; }

private:
    Datagram& single(Command cmd, std::uint32_t address, std::size_t length);
    void send_single();

    Bus bus_;
    std::vector<SlaveInfo> slaves_;
    Domain domain_;
    MasterState state_;
    AlState al_state_ = AlState::Init;
    std::vector<Datagram> service_frame_;
    std::vector<Datagram> cyclic_frame_;
};

}  // namespace ecatsim
