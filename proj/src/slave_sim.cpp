#include "ecatsim/slave_sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace ecatsim {

std::string_view to_string(AlState s)
{
    switch (s) {
    case AlState::Init: return "INIT";
    case AlState::PreOp: return "PREOP";
    case AlState::SafeOp: return "SAFEOP";
    case AlState::Op: return "OP";
    }
    return "?";
}

std::optional<AlState> al_state_from_code(std::uint8_t code)
{
    switch (code) {
    case 0x01: return AlState::Init;
    case 0x02: return AlState::PreOp;
    case 0x04: return AlState::SafeOp;
    case 0x08: return AlState::Op;
    default: return std::nullopt;
    }
}

int al_rank(AlState s)
{
    switch (s) {
    case AlState::Init: return 0;
    case AlState::PreOp: return 1;
    case AlState::SafeOp: return 2;
    case AlState::Op: return 3;
    }
    return 0;
}

std::string_view to_string(SlaveKind k)
{
    return k == SlaveKind::Servo ? "servo" : "io";
}

std::string_view to_string(Cia402State s)
{
    switch (s) {
    case Cia402State::SwitchOnDisabled: return "SwitchOnDisabled";
    case Cia402State::ReadyToSwitchOn: return "ReadyToSwitchOn";
    case Cia402State::SwitchedOn: return "SwitchedOn";
    case Cia402State::OperationEnabled: return "OperationEnabled";
    case Cia402State::Fault: return "Fault";
    }
    return "?";
}

std::uint16_t statusword_for(Cia402State s)
{
    switch (s) {
    case Cia402State::SwitchOnDisabled: return statusword::kSwitchOnDisabled;
    case Cia402State::ReadyToSwitchOn: return statusword::kReadyToSwitchOn;
    case Cia402State::SwitchedOn: return statusword::kSwitchedOn;
    case Cia402State::OperationEnabled: return statusword::kOperationEnabled;
    case Cia402State::Fault: return statusword::kFault;
    }
    return 0;
}

std::optional<Cia402State> decode_statusword(std::uint16_t sw)
{
    if ((sw & 0x004F) == 0x0040) return Cia402State::SwitchOnDisabled;
    if ((sw & 0x006F) == 0x0021) return Cia402State::ReadyToSwitchOn;
    if ((sw & 0x006F) == 0x0023) return Cia402State::SwitchedOn;
    if ((sw & 0x006F) == 0x0027) return Cia402State::OperationEnabled;
    if ((sw & 0x004F) == 0x0008) return Cia402State::Fault;
    return std::nullopt;
}

namespace {

enum class DriveCommand { None, Shutdown, SwitchOn, EnableOperation, DisableVoltage };

struct CommandPattern {
    std::uint16_t mask;
    std::uint16_t value;
    DriveCommand command;
};

// CiA 402 controlword patterns. Quick stop (x0x1x) maps to DisableVoltage.
constexpr std::array<CommandPattern, 5> kCommandPatterns{{
    {0x0087, 0x0006, DriveCommand::Shutdown},
    {0x008F, 0x0007, DriveCommand::SwitchOn},
    {0x008F, 0x000F, DriveCommand::EnableOperation},
    {0x0082, 0x0000, DriveCommand::DisableVoltage},
    {0x0086, 0x0002, DriveCommand::DisableVoltage},
}};

DriveCommand classify(std::uint16_t cw)
{
    for (const auto& p : kCommandPatterns) {
        if ((cw & p.mask) == p.value) {
            return p.command;
        }
    }
    return DriveCommand::None;
}

}  // namespace

Cia402State cia402_transition(Cia402State s, std::uint16_t cw)
{
    using S = Cia402State;
    if (s == S::Fault) {
        return (cw & controlword::kFaultReset) ? S::SwitchOnDisabled : S::Fault;
    }
    switch (classify(cw)) {
    case DriveCommand::DisableVoltage:
        return S::SwitchOnDisabled;
    case DriveCommand::Shutdown:
        return s == S::SwitchOnDisabled || s == S::SwitchedOn || s == S::OperationEnabled
                   ? S::ReadyToSwitchOn
                   : s;
    case DriveCommand::SwitchOn:
        return s == S::ReadyToSwitchOn || s == S::OperationEnabled ? S::SwitchedOn : s;
    case DriveCommand::EnableOperation:
        if (s == S::SwitchedOn) return S::OperationEnabled;
        if (s == S::ReadyToSwitchOn) return S::SwitchedOn;
        return s;
    case DriveCommand::None:
        return s;
    }
    return s;
}

bool is_supported_mode(std::int8_t mode)
{
    return mode == kModeNone || mode == kModeCyclicSyncVelocity;
}

ServoDrive::ServoDrive()
{
    tx_image = pack_servo_tx(tx_pdo());
}

ServoTxPdo ServoDrive::tx_pdo() const
{
    ServoTxPdo tx;
    tx.statusword = statusword_for(cia402_state);
    tx.position_actual = static_cast<std::int32_t>(position);
    tx.velocity_actual = velocity;
    tx.torque_actual = torque_actual;
    tx.mode_display = mode_display;
    tx.fault_code = fault_code;
    return tx;
}

ServoTxPdo servo_step(ServoDrive& drive, const ServoRxPdo& rx, double dt)
{
    if (drive.cia402_state != Cia402State::Fault && !is_supported_mode(rx.mode_of_operation)) {
        drive.cia402_state = Cia402State::Fault;
        drive.fault_code = fault::kUnsupportedMode;
    } else {
        const auto next = cia402_transition(drive.cia402_state, rx.controlword);
        if (drive.cia402_state == Cia402State::Fault && next != Cia402State::Fault) {
            drive.fault_code = fault::kNone;
        }
        drive.cia402_state = next;
    }

    drive.mode_display = rx.mode_of_operation;
    if (drive.cia402_state == Cia402State::OperationEnabled &&
        rx.mode_of_operation == kModeCyclicSyncVelocity) {
        drive.velocity = rx.target_velocity;
        drive.position += std::llround(static_cast<double>(drive.velocity) * dt);
        drive.torque_actual = rx.torque_offset;
    } else {
        drive.velocity = 0;
        drive.torque_actual = 0;
    }

    const auto tx = drive.tx_pdo();
    drive.tx_image = pack_servo_tx(tx);
    return tx;
}

void inject_fault(ServoDrive& drive, std::uint8_t code)
{
    drive.cia402_state = Cia402State::Fault;
    drive.fault_code = code;
    drive.velocity = 0;
    drive.tx_image = pack_servo_tx(drive.tx_pdo());
}

IoInput io_input_from_name(std::string_view name)
{
    if (name == "limit_min") return IoInput::LimitMin;
    if (name == "limit_max") return IoInput::LimitMax;
    if (name == "emergency_stop" || name == "estop") return IoInput::EmergencyStop;
    throw std::invalid_argument(fmt::format("unknown digital input '{}'", name));
}

IoInput io_input_from_bit(unsigned bit)
{
    if (bit > 2) {
        throw std::invalid_argument(fmt::format("unknown digital input bit {}", bit));
    }
    return static_cast<IoInput>(bit);
}

IoTxPdo io_step(DigitalIoSlave& slave, const IoRxPdo& rx)
{
    slave.outputs = rx;
    slave.tx_image = pack_io_tx(slave.inputs);
    return slave.inputs;
}

void inject_input(DigitalIoSlave& slave, IoInput input, bool value)
{
    const auto mask = static_cast<std::uint8_t>(1u << static_cast<unsigned>(input));
    if (value) {
        slave.inputs.digital_inputs |= mask;
    } else {
        slave.inputs.digital_inputs &= static_cast<std::uint8_t>(~mask);
    }
}

void inject_input(DigitalIoSlave& slave, unsigned bit, bool value)
{
    inject_input(slave, io_input_from_bit(bit), value);
}

Slave make_slave(SlaveKind kind)
{
    if (kind == SlaveKind::Servo) {
        return ServoDrive{};
    }
    return DigitalIoSlave{};
}

SlaveKind kind_of(const Slave& s)
{
    return std::visit([](const auto& d) { return std::decay_t<decltype(d)>::kind; }, s);
}

EscState& esc_of(Slave& s)
{
    return std::visit([](auto& d) -> EscState& { return d.esc; }, s);
}

const EscState& esc_of(const Slave& s)
{
    return std::visit([](const auto& d) -> const EscState& { return d.esc; }, s);
}

std::span<const std::uint8_t> tx_image_of(const Slave& s)
{
    return std::visit([](const auto& d) { return std::span<const std::uint8_t>(d.tx_image); }, s);
}

std::span<const std::uint8_t> rx_image_of(const Slave& s)
{
    return std::visit([](const auto& d) { return std::span<const std::uint8_t>(d.rx_image); }, s);
}

namespace {

bool ranges_overlap(std::uint64_t a, std::uint64_t a_len, std::uint64_t b, std::uint64_t b_len)
{
    return a < b + b_len && b < a + a_len;
}

// Copies the intersection of a slave window [win, win+img.size()) and a
// datagram window [addr, addr+payload.size()).
template <typename F>
bool for_overlap(std::uint32_t win, std::size_t win_len, std::uint32_t addr, std::size_t len,
                 F&& f)
{
    if (win == kUnmapped || !ranges_overlap(win, win_len, addr, len)) {
        return false;
    }
    const std::uint64_t lo = std::max<std::uint64_t>(win, addr);
    const std::uint64_t hi = std::min<std::uint64_t>(std::uint64_t{win} + win_len,
                                                     std::uint64_t{addr} + len);
    f(static_cast<std::size_t>(lo - win), static_cast<std::size_t>(lo - addr),
      static_cast<std::size_t>(hi - lo));
    return true;
}

ServoRxPdo servo_rx_from_image(const ServoPdoBytes& b)
{
    // The pad byte is ignored here; a device does not fault on it.
    ServoRxPdo p;
    p.controlword = load_le<std::uint16_t>(b, 0);
    p.target_position = load_le<std::int32_t>(b, 2);
    p.target_velocity = load_le<std::int32_t>(b, 6);
    p.mode_of_operation = load_le<std::int8_t>(b, 10);
    p.torque_offset = load_le<std::int16_t>(b, 12);
    return p;
}

template <typename Device>
void sync_registers(Device& dev)
{
    auto& e = dev.esc;
    std::span<std::uint8_t> r(e.registers);
    store_le<std::uint32_t>(r, reg::kIdentity, Device::identity.vendor_id);
    store_le<std::uint32_t>(r, reg::kIdentity + 4, Device::identity.product_code);
    store_le<std::uint16_t>(r, reg::kIdentity + 8, static_cast<std::uint16_t>(Device::rx_size));
    store_le<std::uint16_t>(r, reg::kIdentity + 10, static_cast<std::uint16_t>(Device::tx_size));
    store_le<std::uint16_t>(r, reg::kStationAddress, e.station_address);
    std::uint16_t status = static_cast<std::uint16_t>(e.al_state);
    if (e.al_error) {
        status |= kAlErrorFlag;
    }
    store_le<std::uint16_t>(r, reg::kAlStatus, status);
    store_le<std::uint16_t>(r, reg::kAlStatusCode, e.al_status_code);
    store_le<std::uint32_t>(r, reg::kLogicalMap, e.rx_logical);
    store_le<std::uint32_t>(r, reg::kLogicalMap + 4, e.tx_logical);
}

void on_al_change(ServoDrive& d, AlState, AlState now)
{
    if (now != AlState::Op) {
        d.cia402_state = Cia402State::SwitchOnDisabled;
        d.velocity = 0;
        d.torque_actual = 0;
        d.tx_image = pack_servo_tx(d.tx_pdo());
    }
}

void on_al_change(DigitalIoSlave& d, AlState, AlState now)
{
    if (now != AlState::Op) {
        d.outputs = {};
    }
}

template <typename Device>
void handle_al_control(Device& dev, std::uint16_t value)
{
    auto& e = dev.esc;
    const auto requested = al_state_from_code(static_cast<std::uint8_t>(value & 0x0F));
    auto fail = [&](std::uint16_t code) {
        e.al_error = true;
        e.al_status_code = code;
    };
    if (!requested) {
        fail(al_code::kUnknownState);
        return;
    }
    if (e.refused_states & static_cast<std::uint8_t>(*requested)) {
        fail(al_code::kUnspecified);
        return;
    }
    if (al_rank(*requested) > al_rank(e.al_state) + 1) {
        fail(al_code::kInvalidStateChange);
        return;
    }
    if (al_rank(*requested) >= al_rank(AlState::SafeOp) &&
        (e.rx_logical == kUnmapped || e.tx_logical == kUnmapped)) {
        fail(al_code::kInvalidOutputConfig);
        return;
    }
    const auto old = e.al_state;
    e.al_state = *requested;
    e.al_error = false;
    e.al_status_code = al_code::kNone;
    if (old != *requested) {
        on_al_change(dev, old, *requested);
    }
}

bool touches(std::size_t ado, std::size_t len, std::size_t reg_addr, std::size_t reg_len)
{
    return ranges_overlap(ado, len, reg_addr, reg_len);
}

template <typename Device>
void write_registers(Device& dev, std::size_t ado, std::span<const std::uint8_t> data)
{
    auto& e = dev.esc;
    sync_registers(dev);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const std::size_t a = ado + i;
        const bool read_only = a < reg::kIdentity + reg::kIdentitySize ||
                               (a >= reg::kAlStatus && a < reg::kAlStatusCode + 2);
        if (!read_only) {
            e.registers[a] = data[i];
        }
    }
    std::span<const std::uint8_t> r(e.registers);
    if (touches(ado, data.size(), reg::kStationAddress, 2)) {
        e.station_address = load_le<std::uint16_t>(r, reg::kStationAddress);
    }
    if (touches(ado, data.size(), reg::kLogicalMap, reg::kLogicalMapSize)) {
        e.rx_logical = load_le<std::uint32_t>(r, reg::kLogicalMap);
        e.tx_logical = load_le<std::uint32_t>(r, reg::kLogicalMap + 4);
    }
    if (touches(ado, data.size(), reg::kAlControl, 2)) {
        handle_al_control(dev, load_le<std::uint16_t>(r, reg::kAlControl));
    }
}

template <typename Device>
void refresh_inputs(Device&)
{
}

template <>
void refresh_inputs(DigitalIoSlave& d)
{
    d.tx_image = pack_io_tx(d.inputs);
}

// Returns true if the slave took part in a logical exchange.
template <typename Device>
bool process(Device& dev, Datagram& d)
{
    auto& e = dev.esc;
    const auto cmd = d.header.command;
    const std::size_t len = d.payload.size();

    if (is_logical(cmd)) {
        const bool wants_read = cmd == Command::LRD || cmd == Command::LRW;
        const bool wants_write = cmd == Command::LWR || cmd == Command::LRW;
        const std::uint32_t addr = d.header.address;
        bool read_ok = false;
        bool write_ok = false;

        if (wants_read && al_rank(e.al_state) >= al_rank(AlState::SafeOp)) {
            refresh_inputs(dev);
            read_ok = for_overlap(e.tx_logical, Device::tx_size, addr, len,
                                  [&](std::size_t img, std::size_t pl, std::size_t n) {
                                      std::copy_n(dev.tx_image.begin() + img, n,
                                                  d.payload.begin() + pl);
                                  });
        }
        if (wants_write && e.al_state == AlState::Op) {
            write_ok = for_overlap(e.rx_logical, Device::rx_size, addr, len,
                                   [&](std::size_t img, std::size_t pl, std::size_t n) {
                                       std::copy_n(d.payload.begin() + pl, n,
                                                   dev.rx_image.begin() + img);
                                   });
        }
        if (cmd == Command::LRW) {
            d.wkc = static_cast<std::uint16_t>(d.wkc + (read_ok ? 1 : 0) + (write_ok ? 2 : 0));
        } else if (read_ok || write_ok) {
            d.wkc = static_cast<std::uint16_t>(d.wkc + 1);
        }
        // Device cycles run for every mapped slave in SAFEOP or OP.
        return al_rank(e.al_state) >= al_rank(AlState::SafeOp) &&
               (e.rx_logical != kUnmapped || e.tx_logical != kUnmapped);
    }

    bool addressed = false;
    std::uint16_t adp = node_of(d.header.address);
    const std::uint16_t ado = register_of(d.header.address);
    switch (cmd) {
    case Command::APRD:
    case Command::APWR:
        addressed = adp == 0;
        ++adp;
        break;
    case Command::BRD:
        addressed = true;
        ++adp;
        break;
    case Command::FPRD:
    case Command::FPWR:
        addressed = adp == e.station_address;
        break;
    default:
        break;
    }
    d.header.address = make_node_address(adp, ado);

    if (!addressed || std::size_t{ado} + len > reg::kSpaceSize) {
        return false;
    }
    if (cmd == Command::APWR || cmd == Command::FPWR) {
        write_registers(dev, ado, d.payload);
    } else {
        sync_registers(dev);
        for (std::size_t i = 0; i < len; ++i) {
            if (cmd == Command::BRD) {
                d.payload[i] |= e.registers[ado + i];
            } else {
                d.payload[i] = e.registers[ado + i];
            }
        }
    }
    d.wkc = static_cast<std::uint16_t>(d.wkc + 1);
    return false;
}

void device_cycle(ServoDrive& d, double dt)
{
    const ServoRxPdo rx = d.esc.al_state == AlState::Op ? servo_rx_from_image(d.rx_image)
                                                        : ServoRxPdo{};
    servo_step(d, rx, dt);
}

void device_cycle(DigitalIoSlave& d, double)
{
    if (d.esc.al_state == AlState::Op) {
        io_step(d, IoRxPdo{d.rx_image[0]});
    } else {
        refresh_inputs(d);
    }
}

}  // namespace

Bus::Bus(std::vector<Slave> slaves, std::chrono::nanoseconds per_hop_latency,
         double cycle_time_s)
    : slaves_(std::move(slaves)),
      touched_(slaves_.size(), 0),
      per_hop_latency_(per_hop_latency),
      cycle_time_s_(cycle_time_s)
{
    if (per_hop_latency.count() < 0) {
        throw std::invalid_argument("per-hop latency must be non-negative");
    }
    set_cycle_time(cycle_time_s);
}

Bus Bus::from_kinds(std::span<const SlaveKind> kinds, std::chrono::nanoseconds per_hop_latency,
                    double cycle_time_s)
{
    std::vector<Slave> slaves;
    slaves.reserve(kinds.size());
    for (auto k : kinds) {
        slaves.push_back(make_slave(k));
    }
    return Bus(std::move(slaves), per_hop_latency, cycle_time_s);
}

Bus Bus::default_ring()
{
    constexpr std::array kinds{SlaveKind::Servo, SlaveKind::Servo, SlaveKind::Servo,
                               SlaveKind::Io};
    return from_kinds(kinds);
}

Slave& Bus::slave(std::size_t position)
{
    if (position >= slaves_.size()) {
        throw std::out_of_range(fmt::format("no slave at ring position {}", position));
    }
    return slaves_[position];
}

const Slave& Bus::slave(std::size_t position) const
{
    if (position >= slaves_.size()) {
        throw std::out_of_range(fmt::format("no slave at ring position {}", position));
    }
    return slaves_[position];
}

ServoDrive& Bus::servo(std::size_t position)
{
    auto* p = std::get_if<ServoDrive>(&slave(position));
    if (!p) {
        throw std::invalid_argument(fmt::format("slave {} is not a servo drive", position));
    }
    return *p;
}

DigitalIoSlave& Bus::io(std::size_t position)
{
    auto* p = std::get_if<DigitalIoSlave>(&slave(position));
    if (!p) {
        throw std::invalid_argument(fmt::format("slave {} is not an IO slave", position));
    }
    return *p;
}

void Bus::set_online(std::size_t position, bool online)
{
    esc_of(slave(position)).online = online;
}

void Bus::refuse_al_state(std::size_t position, AlState state, bool refuse)
{
    auto& e = esc_of(slave(position));
    const auto bit = static_cast<std::uint8_t>(state);
    if (refuse) {
        e.refused_states |= bit;
    } else {
        e.refused_states &= static_cast<std::uint8_t>(~bit);
    }
}

void Bus::set_cycle_time(double seconds)
{
    if (!(seconds > 0.0)) {
        throw std::invalid_argument("cycle time must be positive");
    }
    cycle_time_s_ = seconds;
}

void Bus::cycle(std::span<Datagram> frame)
{
    const bool any_logical = std::any_of(frame.begin(), frame.end(), [](const Datagram& d) {
        return is_logical(d.header.command);
    });
    std::fill(touched_.begin(), touched_.end(), 0);

    std::int64_t hops = 0;
    for (std::size_t pos = 0; pos < slaves_.size(); ++pos) {
        auto& s = slaves_[pos];
        if (!esc_of(s).online) {
            continue;
        }
        ++hops;
        for (auto& d : frame) {
            const bool took_part = std::visit([&](auto& dev) { return process(dev, d); }, s);
            touched_[pos] |= took_part ? 1 : 0;
        }
    }

    if (any_logical) {
        for (std::size_t pos = 0; pos < slaves_.size(); ++pos) {
            if (touched_[pos]) {
                std::visit([&](auto& dev) { device_cycle(dev, cycle_time_s_); }, slaves_[pos]);
            }
        }
    }
    last_delay_ = per_hop_latency_ * hops;
}

std::vector<Datagram> bus_cycle(std::vector<Datagram> frame, Bus& bus)
{
    bus.cycle(frame);
    return frame;
}

}  // namespace ecatsim
