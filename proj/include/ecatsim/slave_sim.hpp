#pragma once

// Simulated slave ring: servo drives running a CiA 402 power state machine in
// cyclic synchronous velocity mode, and a digital IO slave carrying the limit
// switches and the emergency stop.
//
// Each slave exposes a small register file addressed by positional (APRD/
// APWR), configured-address (FPRD/FPWR) and broadcast (BRD) datagrams, and a
// logical process data window addressed by LRD/LWR/LRW.

#include <array>
#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "ecatsim/codec.hpp"

namespace ecatsim {

// ---------------------------------------------------------------------------
// Application layer (AL) state machine
// ---------------------------------------------------------------------------

enum class AlState : std::uint8_t {
    Init = 0x01,
    PreOp = 0x02,
    SafeOp = 0x04,
    Op = 0x08,
};

std::string_view to_string(AlState s);
std::optional<AlState> al_state_from_code(std::uint8_t code);

// 0 for Init .. 3 for Op.
int al_rank(AlState s);

// Register map of the simulated slave controller.
namespace reg {
inline constexpr std::uint16_t kIdentity = 0x0000;        // vendor u32, product u32, rx u16, tx u16
inline constexpr std::uint16_t kIdentitySize = 12;
inline constexpr std::uint16_t kStationAddress = 0x0010;  // u16
inline constexpr std::uint16_t kAlControl = 0x0120;       // u16: state | 0x10 error ack
inline constexpr std::uint16_t kAlStatus = 0x0130;        // u16: state | 0x10 error flag
inline constexpr std::uint16_t kAlStatusCode = 0x0134;    // u16
inline constexpr std::uint16_t kLogicalMap = 0x0600;      // u32 rx offset, u32 tx offset
inline constexpr std::uint16_t kLogicalMapSize = 8;
inline constexpr std::size_t kSpaceSize = 0x0700;
}  // namespace reg

inline constexpr std::uint16_t kAlErrorFlag = 0x0010;
inline constexpr std::uint32_t kUnmapped = 0xFFFFFFFFu;

namespace al_code {
inline constexpr std::uint16_t kNone = 0x0000;
inline constexpr std::uint16_t kUnspecified = 0x0001;
inline constexpr std::uint16_t kInvalidStateChange = 0x0011;
inline constexpr std::uint16_t kUnknownState = 0x0012;
inline constexpr std::uint16_t kInvalidOutputConfig = 0x001D;
}  // namespace al_code

struct Identity {
    std::uint32_t vendor_id = 0;
    std::uint32_t product_code = 0;

    friend bool operator==(const Identity&, const Identity&) = default;
};

inline constexpr Identity kServoIdentity{0x000000FB, 0x63500000};
inline constexpr Identity kIoIdentity{0x0000079A, 0x00DEFEDE};

enum class SlaveKind : std::uint8_t { Servo, Io };

std::string_view to_string(SlaveKind k);

// Slave controller state shared by all device types.
struct EscState {
    std::uint16_t station_address = 0;
    AlState al_state = AlState::Init;
    std::uint16_t al_status_code = al_code::kNone;
    bool al_error = false;
    bool online = true;
    // Bit per AL state (by code) that this slave refuses to enter.
    std::uint8_t refused_states = 0;
    std::uint32_t rx_logical = kUnmapped;
    std::uint32_t tx_logical = kUnmapped;
    std::array<std::uint8_t, reg::kSpaceSize> registers{};
};

// ---------------------------------------------------------------------------
// CiA 402 drive profile (subset)
// ---------------------------------------------------------------------------

enum class Cia402State : std::uint8_t {
    SwitchOnDisabled,
    ReadyToSwitchOn,
    SwitchedOn,
    OperationEnabled,
    Fault,
};

inline constexpr std::array<Cia402State, 5> kAllCia402States{
    Cia402State::SwitchOnDisabled, Cia402State::ReadyToSwitchOn, Cia402State::SwitchedOn,
    Cia402State::OperationEnabled, Cia402State::Fault};

std::string_view to_string(Cia402State s);

namespace controlword {
inline constexpr std::uint16_t kDisableVoltage = 0x0000;
inline constexpr std::uint16_t kShutdown = 0x0006;
inline constexpr std::uint16_t kSwitchOn = 0x0007;
inline constexpr std::uint16_t kEnableOperation = 0x000F;
inline constexpr std::uint16_t kFaultReset = 0x0080;
}  // namespace controlword

namespace statusword {
inline constexpr std::uint16_t kSwitchOnDisabled = 0x0040;
inline constexpr std::uint16_t kReadyToSwitchOn = 0x0021;
inline constexpr std::uint16_t kSwitchedOn = 0x0023;
inline constexpr std::uint16_t kOperationEnabled = 0x0027;
inline constexpr std::uint16_t kFault = 0x0008;
}  // namespace statusword

namespace fault {
inline constexpr std::uint8_t kNone = 0x00;
inline constexpr std::uint8_t kUnsupportedMode = 0x01;
inline constexpr std::uint8_t kInjected = 0xFE;
}  // namespace fault

std::uint16_t statusword_for(Cia402State s);

// Inverse of statusword_for under the standard CiA 402 masks; nullopt for
// patterns outside the supported subset.
std::optional<Cia402State> decode_statusword(std::uint16_t sw);

// One step of the power state machine. Commands are recognised with the CiA
// 402 masks (bit 7 must be clear except for fault reset). Quick stop is folded
// into disable voltage. Enable operation from ReadyToSwitchOn only reaches
// SwitchedOn, so OperationEnabled is always entered from SwitchedOn.
Cia402State cia402_transition(Cia402State s, std::uint16_t controlword);

bool is_supported_mode(std::int8_t mode);

struct ServoDrive {
    static constexpr SlaveKind kind = SlaveKind::Servo;
    static constexpr Identity identity = kServoIdentity;
    static constexpr std::size_t rx_size = kServoPdoSize;
    static constexpr std::size_t tx_size = kServoPdoSize;

    EscState esc;
    Cia402State cia402_state = Cia402State::SwitchOnDisabled;
    std::int64_t position = 0;
    std::int32_t velocity = 0;
    std::uint8_t fault_code = fault::kNone;
    std::int8_t mode_display = 0;
    std::int16_t torque_actual = 0;
    ServoPdoBytes rx_image{};
    ServoPdoBytes tx_image{};

    ServoDrive();

    ServoTxPdo tx_pdo() const;
};

// Advances the drive by one cycle of `dt` seconds under the given command and
// returns (and latches into tx_image) the resulting feedback.
//
// An unsupported mode_of_operation latches Fault with fault::kUnsupportedMode.
// While OperationEnabled in CSV mode, velocity follows the target and the
// position integrates round(velocity * dt); in every other case velocity is 0
// and position holds.
ServoTxPdo servo_step(ServoDrive& drive, const ServoRxPdo& rx, double dt);

// Forces the drive into Fault (test stimulus).
void inject_fault(ServoDrive& drive, std::uint8_t code = fault::kInjected);

enum class IoInput : std::uint8_t { LimitMin = 0, LimitMax = 1, EmergencyStop = 2 };

// Accepts "limit_min", "limit_max", "emergency_stop"/"estop".
IoInput io_input_from_name(std::string_view name);
IoInput io_input_from_bit(unsigned bit);

struct DigitalIoSlave {
    static constexpr SlaveKind kind = SlaveKind::Io;
    static constexpr Identity identity = kIoIdentity;
    static constexpr std::size_t rx_size = kIoPdoSize;
    static constexpr std::size_t tx_size = kIoPdoSize;

    EscState esc;
    IoTxPdo inputs;
    IoRxPdo outputs;
    IoPdoBytes rx_image{};
    IoPdoBytes tx_image{};
};

// Stores the outputs and returns the current (injected) inputs.
IoTxPdo io_step(DigitalIoSlave& slave, const IoRxPdo& rx);

void inject_input(DigitalIoSlave& slave, IoInput input, bool value);
// Throws std::invalid_argument for bits other than 0..2.
void inject_input(DigitalIoSlave& slave, unsigned bit, bool value);

using Slave = std::variant<ServoDrive, DigitalIoSlave>;

Slave make_slave(SlaveKind kind);
SlaveKind kind_of(const Slave& s);
EscState& esc_of(Slave& s);
const EscState& esc_of(const Slave& s);
std::span<const std::uint8_t> tx_image_of(const Slave& s);
std::span<const std::uint8_t> rx_image_of(const Slave& s);

// ---------------------------------------------------------------------------
// Ring
// ---------------------------------------------------------------------------

class Bus {
public:
    explicit Bus(std::vector<Slave> slaves,
                 std::chrono::nanoseconds per_hop_latency = std::chrono::nanoseconds{0},
                 double cycle_time_s = 0.001);

    static Bus from_kinds(std::span<const SlaveKind> kinds,
                          std::chrono::nanoseconds per_hop_latency = std::chrono::nanoseconds{0},
                          double cycle_time_s = 0.001);

    // Three servo drives followed by one IO slave.
    static Bus default_ring();

    std::size_t size() const { return slaves_.size(); }
    Slave& slave(std::size_t position);
    const Slave& slave(std::size_t position) const;
    // Throw std::invalid_argument if the slave at `position` has another type.
    ServoDrive& servo(std::size_t position);
    DigitalIoSlave& io(std::size_t position);

    void set_online(std::size_t position, bool online);
    void refuse_al_state(std::size_t position, AlState state, bool refuse = true);

    double cycle_time() const { return cycle_time_s_; }
    void set_cycle_time(double seconds);

    std::chrono::nanoseconds per_hop_latency() const { return per_hop_latency_; }
    // Simulated wire time of the last frame: hops traversed times per-hop latency.
    std::chrono::nanoseconds last_propagation_delay() const { return last_delay_; }

    // Passes the frame around the ring in place. Each online slave, in ring
    // order, applies every datagram addressed to it and bumps the working
    // counter (read +1, write +1, read-write +3). If the frame carried any
    // logical datagram, every slave that took part then runs one device cycle.
    void cycle(std::span<Datagram> frame);

private:
    std::vector<Slave> slaves_;
    std::vector<std::uint8_t> touched_;
    std::chrono::nanoseconds per_hop_latency_;
    std::chrono::nanoseconds last_delay_{0};
    double cycle_time_s_;
};

// Value-returning convenience over Bus::cycle.
std::vector<Datagram> bus_cycle(std::vector<Datagram> frame, Bus& bus);

}  // namespace ecatsim
