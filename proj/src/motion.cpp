#include "ecatsim/motion.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace ecatsim {

SetpointMailbox::SetpointMailbox(std::int32_t v_max) : v_max_(v_max)
{
    if (v_max <= 0) {
        throw std::invalid_argument("v_max must be positive");
    }
}

bool SetpointMailbox::push(AxisSetpoint s)
{
    if (s.axis >= kAxisCount) {
        throw std::out_of_range(fmt::format("axis {} out of range (0..{})", s.axis,
                                            kAxisCount - 1));
    }
    const auto clamped = std::clamp(s.target_velocity, -v_max_, v_max_);
    s.clamped = clamped != s.target_velocity;
    s.target_velocity = clamped;
    if (s.clamped) {
        clamp_count_.fetch_add(1, std::memory_order_relaxed);
    }
    slots_[s.axis].write(s);
    return s.clamped;
}

std::optional<AxisSetpoint> SetpointMailbox::take(std::size_t axis) noexcept
{
    if (axis >= kAxisCount) {
        return std::nullopt;
    }
    AxisSetpoint s;
    if (slots_[axis].read(s)) {
        return s;
    }
    return std::nullopt;
}

SafetyStatus derive_safety(const std::optional<IoTxPdo>& io, const ExchangeResult& exchange)
{
    SafetyStatus s;
    if (io) {
        s.e_stop = io->emergency_stop();
        s.limit_min = io->limit_min();
        s.limit_max = io->limit_max();
    }
    s.degraded_comm = exchange.degraded;
    return s;
}

std::uint16_t enable_ladder_controlword(std::uint16_t sw)
{
    const auto state = decode_statusword(sw);
    if (!state) {
        return controlword::kDisableVoltage;
    }
    switch (*state) {
    case Cia402State::Fault: return controlword::kFaultReset;
    case Cia402State::SwitchOnDisabled: return controlword::kShutdown;
    case Cia402State::ReadyToSwitchOn: return controlword::kSwitchOn;
    case Cia402State::SwitchedOn: return controlword::kEnableOperation;
    case Cia402State::OperationEnabled: return controlword::kEnableOperation;
    }
    return controlword::kDisableVoltage;
}

MotionController::MotionController(std::size_t axis_count) : axis_count_(axis_count)
{
    if (axis_count > kAxisCount) {
        throw std::invalid_argument(
            fmt::format("{} axes requested, at most {} supported", axis_count, kAxisCount));
    }
}

void MotionController::step(SetpointMailbox& mailbox, const SafetyStatus& safety,
                            std::span<const ServoTxPdo> feedback,
                            std::span<ServoRxPdo> commands) noexcept
{
    ++status_.cycles;
    const bool stop = safety.stop_required();
    status_.stop_active = stop;
    if (stop) {
        ++status_.safety_stop_cycles;
    }
    status_.enabled_mask = 0;
    status_.fault_mask = 0;

    const std::size_t n = std::min({axis_count_, feedback.size(), commands.size()});
    for (std::size_t axis = 0; axis < n; ++axis) {
        // Always drain so stale setpoints never survive a stop.
        if (auto s = mailbox.take(axis)) {
            retained_[axis] = s->target_velocity;
        }

        ServoRxPdo cmd;
        cmd.mode_of_operation = kModeCyclicSyncVelocity;

        if (stop || disabled_) {
            retained_[axis] = 0;
            cmd.controlword = controlword::kDisableVoltage;
            cmd.target_velocity = 0;
            commands[axis] = cmd;
            status_.commanded[axis] = 0;
            continue;
        }

        const auto state = decode_statusword(feedback[axis].statusword);
        if (state == Cia402State::OperationEnabled) {
            status_.enabled_mask |= static_cast<std::uint8_t>(1u << axis);
            std::int32_t v = retained_[axis];
            if ((safety.limit_min && v < 0) || (safety.limit_max && v > 0)) {
                v = 0;
                ++status_.limit_clamps;
            }
            cmd.controlword = controlword::kEnableOperation;
            cmd.target_velocity = v;
        } else {
            if (state == Cia402State::Fault) {
                status_.fault_mask |= static_cast<std::uint8_t>(1u << axis);
                ++status_.fault_resets;
            }
            cmd.controlword = enable_ladder_controlword(feedback[axis].statusword);
            cmd.target_velocity = 0;
        }
        commands[axis] = cmd;
        status_.commanded[axis] = cmd.target_velocity;
    }
}

std::array<ServoRxPdo, kAxisCount> MotionController::control_step(
    SetpointMailbox& mailbox, const SafetyStatus& safety,
    const std::array<ServoTxPdo, kAxisCount>& feedback) noexcept
{
    std::array<ServoRxPdo, kAxisCount> out{};
    step(mailbox, safety, feedback, out);
    return out;
}

ControlCycle::ControlCycle(Master& master, SetpointMailbox& mailbox, MotionController& controller,
                           StimulusMailbox* stimuli)
    : master_(master), mailbox_(mailbox), controller_(controller), stimuli_(stimuli)
{
    if (master.state().phase == MasterPhase::Idle || master.state().phase == MasterPhase::Scanned) {
        throw std::logic_error("control cycle requires a configured master");
    }
    for (const auto& s : master.slaves()) {
        const auto kind = s.kind();
        if (kind == SlaveKind::Servo) {
            servo_positions_.push_back(s.ring_position);
        } else if (kind == SlaveKind::Io && !io_position_) {
            io_position_ = s.ring_position;
        }
    }
    if (servo_positions_.size() > kAxisCount) {
        throw std::invalid_argument(fmt::format("{} servo drives on the ring, at most {} supported",
                                                servo_positions_.size(), kAxisCount));
    }
    if (servo_positions_.size() > controller.axis_count()) {
        throw std::invalid_argument("controller has fewer axes than the ring has servo drives");
    }
    for (std::size_t i = 0; i < servo_positions_.size(); ++i) {
        feedback_[i] = unpack_servo_tx(master.domain().inputs(servo_positions_[i]));
    }
}

void ControlCycle::apply_stimulus(const Stimulus& s) noexcept
{
    auto& bus = master_.bus();
    if (io_position_) {
        if (auto* io = std::get_if<DigitalIoSlave>(&bus.slave(*io_position_))) {
            for (unsigned bit = 0; bit < 3; ++bit) {
                inject_input(*io, static_cast<IoInput>(bit), (s.digital_inputs >> bit) & 1u);
            }
        }
    }
    const std::size_t n = std::min<std::size_t>(bus.size(), 32);
    for (std::size_t pos = 0; pos < n; ++pos) {
        esc_of(bus.slave(pos)).online = !((s.offline_mask >> pos) & 1u);
    }
}

CycleOutcome ControlCycle::run_once() noexcept
{
    if (stimuli_) {
        Stimulus s;
        if (stimuli_->read(s)) {
            apply_stimulus(s);
        }
    }

    auto& domain = master_.domain();
    const auto exchange = master_.exchange();

    const std::size_t n = servo_positions_.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto* e = domain.find(servo_positions_[i], PdoDirection::Input);
        feedback_[i] = unpack_servo_tx(
            std::span<const std::uint8_t>(domain.image).subspan(e->offset, e->length));
    }
    std::optional<IoTxPdo> io;
    if (io_position_) {
        const auto* e = domain.find(*io_position_, PdoDirection::Input);
        io = IoTxPdo{domain.image[e->offset]};
    }

    const auto safety = derive_safety(io, exchange);
    controller_.step(mailbox_, safety, std::span<const ServoTxPdo>(feedback_.data(), n),
                     std::span<ServoRxPdo>(commands_.data(), n));

    for (std::size_t i = 0; i < n; ++i) {
        const auto* e = domain.find(servo_positions_[i], PdoDirection::Output);
        const auto bytes = pack_servo_rx(commands_[i]);
        std::copy(bytes.begin(), bytes.end(),
                  domain.image.begin() + static_cast<std::ptrdiff_t>(e->offset));
    }

    last_ = {exchange, safety};
    return last_;
}

namespace {

bool all_axes_in(const ControlCycle& cycle, Cia402State wanted)
{
    const auto fb = cycle.feedback();
    return std::all_of(fb.begin(), fb.end(), [&](const ServoTxPdo& tx) {
        return decode_statusword(tx.statusword) == wanted;
    });
}

}  // namespace

int enable_all(ControlCycle& cycle, int max_cycles)
{
    for (int i = 1; i <= max_cycles; ++i) {
        cycle.run_once();
        if (all_axes_in(cycle, Cia402State::OperationEnabled)) {
            return i;
        }
    }
    std::string stuck;
    const auto fb = cycle.feedback();
    for (std::size_t axis = 0; axis < fb.size(); ++axis) {
        if (decode_statusword(fb[axis].statusword) != Cia402State::OperationEnabled) {
            if (!stuck.empty()) stuck += ", ";
            stuck += fmt::format("axis {} (ring position {}) statusword 0x{:04X}", axis,
                                 cycle.servo_positions()[axis], fb[axis].statusword);
        }
    }
    throw EnableTimeout(fmt::format("axes not OperationEnabled after {} cycles: {}", max_cycles,
                                    stuck));
}

bool disable_all(ControlCycle& cycle, int max_cycles)
{
    cycle.controller().set_disabled(true);
    for (int i = 0; i < max_cycles; ++i) {
        cycle.run_once();
        if (all_axes_in(cycle, Cia402State::SwitchOnDisabled)) {
            return true;
        }
    }
    return false;
}

}  // namespace ecatsim
