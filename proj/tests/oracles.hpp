#pragma once

// Reference computations the tests compare the library against. Each one is
// written from the documented behaviour, not from the implementation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "ecatsim/codec.hpp"
#include "ecatsim/slave_sim.hpp"

namespace oracle {

// Wire bytes of one datagram, straight from the byte table.
inline std::vector<std::uint8_t> encode(const ecatsim::Datagram& d, bool more)
{
    std::vector<std::uint8_t> b;
    b.push_back(static_cast<std::uint8_t>(d.header.command));
    b.push_back(d.header.index);
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(d.header.address >> (8 * i)));
    const unsigned len = static_cast<unsigned>(d.payload.size()) | (more ? 0x8000u : 0u);
    b.push_back(static_cast<std::uint8_t>(len & 0xFF));
    b.push_back(static_cast<std::uint8_t>(len >> 8));
    b.push_back(0);
    b.push_back(0);
    b.insert(b.end(), d.payload.begin(), d.payload.end());
    b.push_back(static_cast<std::uint8_t>(d.wkc & 0xFF));
    b.push_back(static_cast<std::uint8_t>(d.wkc >> 8));
    return b;
}

// Drive profile: decode the command from individual controlword bits, then
// apply the transition table.
enum class Cmd { DisableVoltage, QuickStop, Shutdown, SwitchOn, EnableOp, FaultReset };

inline Cmd decode_command(std::uint16_t cw)
{
    const bool so = cw & 0x01, ev = cw & 0x02, qs = cw & 0x04, eo = cw & 0x08, fr = cw & 0x80;
    if (fr) return Cmd::FaultReset;
    if (!ev) return Cmd::DisableVoltage;
    if (!qs) return Cmd::QuickStop;
    if (!so) return Cmd::Shutdown;
    return eo ? Cmd::EnableOp : Cmd::SwitchOn;
}

inline ecatsim::Cia402State cia402_next(ecatsim::Cia402State s, std::uint16_t cw)
{
    using S = ecatsim::Cia402State;
    const Cmd c = decode_command(cw);
    if (s == S::Fault) return c == Cmd::FaultReset ? S::SwitchOnDisabled : S::Fault;
    if (c == Cmd::FaultReset) return s;
    if (c == Cmd::DisableVoltage || c == Cmd::QuickStop) return S::SwitchOnDisabled;
    switch (s) {
    case S::SwitchOnDisabled:
        return c == Cmd::Shutdown ? S::ReadyToSwitchOn : s;
    case S::ReadyToSwitchOn:
        return (c == Cmd::SwitchOn || c == Cmd::EnableOp) ? S::SwitchedOn : s;
    case S::SwitchedOn:
        if (c == Cmd::Shutdown) return S::ReadyToSwitchOn;
        return c == Cmd::EnableOp ? S::OperationEnabled : s;
    case S::OperationEnabled:
        if (c == Cmd::Shutdown) return S::ReadyToSwitchOn;
        return c == Cmd::SwitchOn ? S::SwitchedOn : s;
    default:
        return s;
    }
}

// Working counter contribution of one slave to an LRW spanning its whole
// process data: +1 for the read (SAFEOP and up), +2 for the write (OP only).
inline unsigned lrw_increment(const ecatsim::EscState& e)
{
    if (!e.online) return 0;
    switch (e.al_state) {
    case ecatsim::AlState::Op: return 3;
    case ecatsim::AlState::SafeOp: return 1;
    default: return 0;
    }
}

struct Moments {
    double mean, std, min, max;
};

// Two-pass population statistics.
inline Moments two_pass(const std::vector<double>& xs)
{
    double sum = 0;
    for (double x : xs) sum += x;
    const double mean = sum / static_cast<double>(xs.size());
    double sq = 0;
    for (double x : xs) sq += (x - mean) * (x - mean);
    return {mean, std::sqrt(sq / static_cast<double>(xs.size())),
            *std::min_element(xs.begin(), xs.end()), *std::max_element(xs.begin(), xs.end())};
}

inline bool close_rel(double a, double b, double rel)
{
    const double scale = std::max(std::fabs(a), std::fabs(b));
    return std::fabs(a - b) <= rel * scale || std::fabs(a - b) < 1e-12;
}

}  // namespace oracle
