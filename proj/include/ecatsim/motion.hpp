#pragma once

// Multi-axis velocity control on top of the master.
//
// Two contexts share exactly one structure: the input context pushes setpoints
// into a SetpointMailbox, the real-time context takes them once per cycle.
// The real-time side (MotionController::step, ControlCycle::run_once) neither
// blocks, throws nor allocates.

#include <array>
#include <atomic>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecatsim/codec.hpp"
#include "ecatsim/master.hpp"
#include "ecatsim/slave_sim.hpp"
#include "ecatsim/triple_buffer.hpp"

namespace ecatsim {

inline constexpr std::size_t kAxisCount = 3;
inline constexpr std::int32_t kDefaultVMax = 50'000;

struct AxisSetpoint {
    std::uint8_t axis = 0;
    std::int32_t target_velocity = 0;  // counts/s
    std::int64_t timestamp_ns = 0;
    bool clamped = false;

    friend bool operator==(const AxisSetpoint&, const AxisSetpoint&) = default;
};

class SetpointMailbox {
public:
    explicit SetpointMailbox(std::int32_t v_max = kDefaultVMax);

    std::int32_t v_max() const { return v_max_; }

    // Input context. Latest wins per axis. Velocities beyond +-v_max are
    // clamped and the stored setpoint is flagged; returns true in that case.
    // Throws std::out_of_range for an axis >= kAxisCount.
    bool push(AxisSetpoint s);

    // Real-time context. The newest unread setpoint for `axis`, if any.
    std::optional<AxisSetpoint> take(std::size_t axis) noexcept;

    std::uint64_t clamp_count() const { return clamp_count_.load(std::memory_order_relaxed); }

private:
    std::int32_t v_max_;
    std::array<TripleBuffer<AxisSetpoint>, kAxisCount> slots_;
    std::atomic<std::uint64_t> clamp_count_{0};
};

inline bool push_setpoint(SetpointMailbox& mailbox, const AxisSetpoint& s)
{
    return mailbox.push(s);
}

struct SafetyStatus {
    bool e_stop = false;
    bool limit_min = false;
    bool limit_max = false;
    bool degraded_comm = false;

    bool stop_required() const { return e_stop || degraded_comm; }

    friend bool operator==(const SafetyStatus&, const SafetyStatus&) = default;
};

// Without an IO slave the switch inputs read as released.
SafetyStatus derive_safety(const std::optional<IoTxPdo>& io, const ExchangeResult& exchange);

struct ControlStatus {
    std::uint64_t cycles = 0;
    std::uint64_t safety_stop_cycles = 0;
    std::uint64_t limit_clamps = 0;
    std::uint64_t fault_resets = 0;
    std::uint8_t enabled_mask = 0;
    std::uint8_t fault_mask = 0;
    bool stop_active = false;
    std::array<std::int32_t, kAxisCount> commanded{};
};

// Per cycle and axis:
//  - e-stop or degraded communication: velocity 0, DisableVoltage, and the
//    retained setpoint is dropped;
//  - drive not OperationEnabled: next controlword of the enable ladder
//    (Fault -> 0x80, SwitchOnDisabled -> 0x06, ReadyToSwitchOn -> 0x07,
//    SwitchedOn -> 0x0F), velocity 0;
//  - otherwise CSV mode with the latest setpoint;
//  - an active limit_min forces negative velocities to 0, limit_max positive
//    ones, on every axis.
class MotionController {
public:
    explicit MotionController(std::size_t axis_count = kAxisCount);

    std::size_t axis_count() const { return axis_count_; }

    // Disabled controllers command DisableVoltage on every axis.
    void set_disabled(bool disabled) noexcept { disabled_ = disabled; }
    bool disabled() const { return disabled_; }

    // `feedback` and `commands` must hold axis_count() elements.
    void step(SetpointMailbox& mailbox, const SafetyStatus& safety,
              std::span<const ServoTxPdo> feedback, std::span<ServoRxPdo> commands) noexcept;

    std::array<ServoRxPdo, kAxisCount> control_step(
        SetpointMailbox& mailbox, const SafetyStatus& safety,
        const std::array<ServoTxPdo, kAxisCount>& feedback) noexcept;

    const ControlStatus& status() const { return status_; }

private:
    std::size_t axis_count_;
    bool disabled_ = false;
    std::array<std::int32_t, kAxisCount> retained_{};
    ControlStatus status_;
};

// Next enable-ladder controlword for a drive reporting `sw`.
std::uint16_t enable_ladder_controlword(std::uint16_t sw);

// Test stimulus delivered to the real-time context: the complete digital input
// word of the IO slave and a bit per ring position that is taken offline.
struct Stimulus {
    std::uint8_t digital_inputs = 0;
    std::uint32_t offline_mask = 0;

    friend bool operator==(const Stimulus&, const Stimulus&) = default;
};

using StimulusMailbox = TripleBuffer<Stimulus>;

struct CycleOutcome {
    ExchangeResult exchange;
    SafetyStatus safety;
};

// The composed real-time cycle body: exchange, decode feedback, derive the
// safety status, run the controller and stage the commands for the next
// exchange.
class ControlCycle {
public:
    // The master must be configured. Axes are the servo drives in ring order
    // (at most kAxisCount); the first IO slave supplies the safety inputs.
    ControlCycle(Master& master, SetpointMailbox& mailbox, MotionController& controller,
                 StimulusMailbox* stimuli = nullptr);

    CycleOutcome run_once() noexcept;

    std::size_t axis_count() const { return servo_positions_.size(); }
    std::span<const std::size_t> servo_positions() const { return servo_positions_; }
    std::optional<std::size_t> io_position() const { return io_position_; }

    std::span<const ServoTxPdo> feedback() const
    {
        return std::span<const ServoTxPdo>(feedback_.data(), servo_positions_.size());
    }
    std::span<const ServoRxPdo> commands() const
    {
        return std::span<const ServoRxPdo>(commands_.data(), servo_positions_.size());
    }
    const CycleOutcome& last() const { return last_; }

    Master& master() { return master_; }
    MotionController& controller() { return controller_; }

private:
    void apply_stimulus(const Stimulus& s) noexcept;

    Master& master_;
    SetpointMailbox& mailbox_;
    MotionController& controller_;
    StimulusMailbox* stimuli_;
    std::vector<std::size_t> servo_positions_;
    std::optional<std::size_t> io_position_;
    std::array<ServoTxPdo, kAxisCount> feedback_{};
    std::array<ServoRxPdo, kAxisCount> commands_{};
    CycleOutcome last_;
};

class EnableTimeout : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Runs cycles until every axis reports OperationEnabled. Returns the number of
// cycles used; throws EnableTimeout listing the stuck axes and their
// statuswords after `max_cycles`.
int enable_all(ControlCycle& cycle, int max_cycles = 8);

// Commands DisableVoltage until every axis reports SwitchOnDisabled. Returns
// false if that did not happen within `max_cycles`.
bool disable_all(ControlCycle& cycle, int max_cycles = 8);

}  // namespace ecatsim
