#include "ecatsim/master.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace ecatsim {

std::optional<SlaveKind> SlaveInfo::kind() const
{
    if (identity == kServoIdentity) return SlaveKind::Servo;
    if (identity == kIoIdentity) return SlaveKind::Io;
    return std::nullopt;
}

std::string_view to_string(MasterPhase p)
{
    switch (p) {
    case MasterPhase::Idle: return "Idle";
    case MasterPhase::Scanned: return "Scanned";
    case MasterPhase::Configured: return "Configured";
    case MasterPhase::Operational: return "Operational";
    }
    return "?";
}

const DomainEntry* Domain::find(std::size_t ring_position, PdoDirection direction) const
{
    for (const auto& e : entries) {
        if (e.ring_position == ring_position && e.direction == direction) {
            return &e;
        }
    }
    return nullptr;
}

std::span<std::uint8_t> Domain::outputs(std::size_t ring_position)
{
    const auto* e = find(ring_position, PdoDirection::Output);
    if (!e) {
        throw std::out_of_range(fmt::format("slave {} has no outputs in the domain", ring_position));
    }
    return std::span<std::uint8_t>(image).subspan(e->offset, e->length);
}

std::span<const std::uint8_t> Domain::inputs(std::size_t ring_position) const
{
    const auto* e = find(ring_position, PdoDirection::Input);
    if (!e) {
        throw std::out_of_range(fmt::format("slave {} has no inputs in the domain", ring_position));
    }
    return std::span<const std::uint8_t>(image).subspan(e->offset, e->length);
}

std::string Domain::describe() const
{
    std::string s = fmt::format("domain: {} bytes, expected wkc {}\n", total_size, expected_wkc);
    s += "offset  length  slave  direction\n";
    for (const auto& e : entries) {
        s += fmt::format("{:>6}  {:>6}  {:>5}  {}\n", e.offset, e.length, e.ring_position,
                         e.direction == PdoDirection::Output ? "output" : "input");
    }
    return s;
}

Domain build_domain(std::span<const SlaveInfo> slaves)
{
    Domain d;
    std::size_t offset = 0;
    std::size_t pdo_slaves = 0;
    for (const auto& s : slaves) {
        if (s.rx_bytes > 0) {
            d.entries.push_back({s.ring_position, PdoDirection::Output, offset, s.rx_bytes});
            offset += s.rx_bytes;
        }
        if (s.tx_bytes > 0) {
            d.entries.push_back({s.ring_position, PdoDirection::Input, offset, s.tx_bytes});
            offset += s.tx_bytes;
        }
        if (s.has_pdo()) {
            ++pdo_slaves;
        }
    }
    d.total_size = offset;
    d.image.assign(offset, 0);
    d.expected_wkc = static_cast<std::uint16_t>(3 * pdo_slaves);
    return d;
}

Master::Master(Bus bus) : bus_(std::move(bus))
{
    service_frame_.resize(1);
}

Datagram& Master::single(Command cmd, std::uint32_t address, std::size_t length)
{
    service_frame_[0] = Datagram::make(cmd, address, length);
    return service_frame_[0];
}

void Master::send_single()
{
    bus_.cycle(service_frame_);
}

const std::vector<SlaveInfo>& Master::scan()
{
    single(Command::BRD, make_node_address(0, reg::kIdentity), 2);
    send_single();
    const std::size_t count = service_frame_[0].wkc;
    if (count == 0) {
        throw BusError("bus scan found no slaves");
    }

    std::vector<SlaveInfo> found;
    found.reserve(count);
    for (std::size_t pos = 0; pos < count; ++pos) {
        const auto station = static_cast<std::uint16_t>(kStationAddressBase + pos);
        const auto adp = auto_increment_address(static_cast<std::uint16_t>(pos));

        auto& w = single(Command::APWR, make_node_address(adp, reg::kStationAddress), 2);
        store_le<std::uint16_t>(w.payload, 0, station);
        send_single();
        if (service_frame_[0].wkc != 1) {
            throw BusError(fmt::format("slave at ring position {} did not accept station address",
                                       pos));
        }

        single(Command::FPRD, make_node_address(station, reg::kIdentity), reg::kIdentitySize);
        send_single();
        if (service_frame_[0].wkc != 1) {
            throw BusError(fmt::format("slave at ring position {} did not answer identity read",
                                       pos));
        }
        std::span<const std::uint8_t> id(service_frame_[0].payload);
        SlaveInfo info;
        info.ring_position = pos;
        info.station_address = station;
        info.identity.vendor_id = load_le<std::uint32_t>(id, 0);
        info.identity.product_code = load_le<std::uint32_t>(id, 4);
        info.rx_bytes = load_le<std::uint16_t>(id, 8);
        info.tx_bytes = load_le<std::uint16_t>(id, 10);

        single(Command::FPRD, make_node_address(station, reg::kAlStatus), 2);
        send_single();
        if (service_frame_[0].wkc != 1) {
            throw BusError(fmt::format("slave at ring position {} did not answer AL status read",
                                       pos));
        }
        const auto code =
            static_cast<std::uint8_t>(load_le<std::uint16_t>(service_frame_[0].payload, 0) & 0x0F);
        info.al_state = al_state_from_code(code).value_or(AlState::Init);
        found.push_back(info);
    }

    slaves_ = std::move(found);
    al_state_ = std::min_element(slaves_.begin(), slaves_.end(),
                                 [](const SlaveInfo& a, const SlaveInfo& b) {
                                     return al_rank(a.al_state) < al_rank(b.al_state);
                                 })
                    ->al_state;
    domain_ = Domain{};
    cyclic_frame_.clear();
    state_.phase = MasterPhase::Scanned;
    return slaves_;
}

Domain& Master::configure()
{
    if (state_.phase == MasterPhase::Idle) {
        throw std::logic_error("configure() requires a completed bus scan");
    }
    if (state_.phase == MasterPhase::Operational) {
        throw std::logic_error("configure() is not allowed while operational");
    }
    Domain d = build_domain(slaves_);

    for (const auto& s : slaves_) {
        const auto* out = d.find(s.ring_position, PdoDirection::Output);
        const auto* in = d.find(s.ring_position, PdoDirection::Input);
        auto& w = single(Command::FPWR, make_node_address(s.station_address, reg::kLogicalMap),
                         reg::kLogicalMapSize);
        store_le<std::uint32_t>(w.payload, 0,
                                out ? static_cast<std::uint32_t>(out->offset) : kUnmapped);
        store_le<std::uint32_t>(w.payload, 4,
                                in ? static_cast<std::uint32_t>(in->offset) : kUnmapped);
        send_single();
        if (service_frame_[0].wkc != 1) {
            throw BusError(fmt::format("slave at ring position {} did not accept its process data "
                                       "mapping",
                                       s.ring_position));
        }
    }

    cyclic_frame_.clear();
    if (d.total_size > 0) {
        cyclic_frame_.push_back(Datagram::make(Command::LRW, 0, d.total_size));
    }
    domain_ = std::move(d);
    state_.phase = MasterPhase::Configured;
    return domain_;
}

void Master::request_al_state(AlState target)
{
    if (state_.phase == MasterPhase::Idle) {
        throw std::logic_error("AL state change requires a completed bus scan");
    }
    if (al_rank(target) > al_rank(al_state_) + 1) {
        throw std::logic_error(fmt::format("AL state change {} -> {} skips intermediate states",
                                           to_string(al_state_), to_string(target)));
    }
    if (al_rank(target) >= al_rank(AlState::SafeOp) && state_.phase == MasterPhase::Scanned) {
        throw std::logic_error(
            fmt::format("AL state {} requires configured process data", to_string(target)));
    }

    for (const auto& s : slaves_) {
        auto& w = single(Command::FPWR, make_node_address(s.station_address, reg::kAlControl), 2);
        store_le<std::uint16_t>(w.payload, 0, static_cast<std::uint16_t>(target));
        send_single();
    }

    std::optional<AlTransitionError> first_error;
    for (auto& s : slaves_) {
        single(Command::FPRD, make_node_address(s.station_address, reg::kAlStatus), 6);
        send_single();
        const auto& rd = service_frame_[0];
        if (rd.wkc != 1) {
            if (!first_error) {
                first_error.emplace(
                    fmt::format("slave at ring position {} (station 0x{:04X}) did not respond "
                                "while entering {}",
                                s.ring_position, s.station_address, to_string(target)),
                    s.ring_position, 0);
            }
            continue;
        }
        const auto status = load_le<std::uint16_t>(rd.payload, 0);
        const auto code = load_le<std::uint16_t>(rd.payload, 4);
        const auto reported = al_state_from_code(static_cast<std::uint8_t>(status & 0x0F));
        if (reported) {
            s.al_state = *reported;
        }
        if ((status & kAlErrorFlag) || reported != target) {
            if (!first_error) {
                first_error.emplace(
                    fmt::format("slave at ring position {} (station 0x{:04X}) refused {} "
                                "(state {}, AL status code 0x{:04X})",
                                s.ring_position, s.station_address, to_string(target),
                                reported ? to_string(*reported) : "?", code),
                    s.ring_position, code);
            }
        }
    }
    if (first_error) {
        throw *first_error;
    }

    al_state_ = target;
    if (target == AlState::Op) {
        state_.phase = MasterPhase::Operational;
    } else if (state_.phase == MasterPhase::Operational) {
        state_.phase = MasterPhase::Configured;
    }
}

ExchangeResult Master::exchange()
{
    ++state_.cycle_counter;
    if (cyclic_frame_.empty()) {
        state_.degraded = domain_.expected_wkc != 0;
        return {0, state_.degraded};
    }

    auto& d = cyclic_frame_[0];
    std::copy(domain_.image.begin(), domain_.image.end(), d.payload.begin());
    d.header.address = 0;
    d.wkc = 0;
    bus_.cycle(cyclic_frame_);

    for (const auto& e : domain_.entries) {
        if (e.direction == PdoDirection::Input) {
            std::copy_n(d.payload.begin() + static_cast<std::ptrdiff_t>(e.offset), e.length,
                        domain_.image.begin() + static_cast<std::ptrdiff_t>(e.offset));
        }
    }

    domain_.last_wkc = d.wkc;
    ExchangeResult r{d.wkc, d.wkc != domain_.expected_wkc};
    state_.degraded = r.degraded;
    if (r.degraded) {
        ++state_.degraded_cycles;
    }
    return r;
}

}  // namespace ecatsim
