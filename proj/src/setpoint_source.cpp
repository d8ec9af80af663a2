#include "ecatsim/setpoint_source.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace ecatsim {

namespace {

template <typename T>
bool parse_int(std::string_view s, T& out)
{
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    const auto* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc{} && p == end;
}

}  // namespace

TrajectoryScript::TrajectoryScript(std::vector<ScriptEvent> events) : events_(std::move(events))
{
    for (std::size_t i = 1; i < events_.size(); ++i) {
        if (events_[i].time_ms < events_[i - 1].time_ms) {
            throw ScriptError("script events are not in time order");
        }
    }
}

TrajectoryScript TrajectoryScript::parse(std::istream& in, const std::string& origin)
{
    std::vector<ScriptEvent> events;
    std::string line;
    std::size_t lineno = 0;
    auto fail = [&](const std::string& msg) {
        throw ScriptError(fmt::format("{}:{}: {}", origin, lineno, msg));
    };

    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        std::istringstream ls(line);
        std::vector<std::string> tok;
        for (std::string t; ls >> t;) {
            tok.push_back(t);
        }
        if (tok.empty()) {
            continue;
        }
        if (tok.size() < 2) {
            fail("expected '<time_ms> <axis> <velocity>' or '<time_ms> <directive> [arg]'");
        }

        ScriptEvent ev;
        if (!parse_int(tok[0], ev.time_ms) || ev.time_ms < 0) {
            fail(fmt::format("invalid time '{}'", tok[0]));
        }
        const std::string& what = tok[1];
        unsigned axis = 0;
        if (parse_int(what, axis)) {
            if (tok.size() != 3) fail("setpoint needs '<time_ms> <axis> <velocity>'");
            if (axis >= kAxisCount) fail(fmt::format("axis {} out of range (0..{})", axis,
                                                     kAxisCount - 1));
            ev.action = ScriptAction::Setpoint;
            ev.axis = static_cast<std::uint8_t>(axis);
            if (!parse_int(tok[2], ev.velocity)) fail(fmt::format("invalid velocity '{}'", tok[2]));
        } else if (what == "estop" || what == "limit_min" || what == "limit_max") {
            ev.action = what == "estop"       ? ScriptAction::EStop
                        : what == "limit_min" ? ScriptAction::LimitMin
                                              : ScriptAction::LimitMax;
            if (tok.size() > 3) fail(fmt::format("too many arguments for '{}'", what));
            if (tok.size() == 3) {
                if (tok[2] == "1" || tok[2] == "on") {
                    ev.value = true;
                } else if (tok[2] == "0" || tok[2] == "off") {
                    ev.value = false;
                } else {
                    fail(fmt::format("expected 0 or 1 after '{}', got '{}'", what, tok[2]));
                }
            }
        } else if (what == "offline" || what == "online") {
            ev.action = what == "offline" ? ScriptAction::Offline : ScriptAction::Online;
            if (tok.size() != 3 || !parse_int(tok[2], ev.position) || ev.position >= 32) {
                fail(fmt::format("'{}' needs a ring position 0..31", what));
            }
        } else {
            fail(fmt::format("unknown directive '{}'", what));
        }

        if (!events.empty() && ev.time_ms < events.back().time_ms) {
            fail(fmt::format("time {} ms is earlier than the previous event ({} ms)", ev.time_ms,
                             events.back().time_ms));
        }
        events.push_back(ev);
    }
    return TrajectoryScript(std::move(events));
}

TrajectoryScript TrajectoryScript::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ScriptError(fmt::format("cannot open trajectory file '{}'", path.string()));
    }
    return parse(in, path.string());
}

ScriptPlayer::ScriptPlayer(const TrajectoryScript& script) : script_(script) {}

std::int64_t ScriptPlayer::next_due_ns() const
{
    if (finished()) return -1;
    return script_.events()[next_].time_ms * 1'000'000;
}

std::size_t ScriptPlayer::deliver_due(std::int64_t elapsed_ns, SetpointMailbox& setpoints,
                                      StimulusMailbox& stimuli)
{
    std::size_t delivered = 0;
    bool stimulus_changed = false;
    const auto events = script_.events();
    while (next_ < events.size() && events[next_].time_ms * 1'000'000 <= elapsed_ns) {
        const auto& ev = events[next_++];
        ++delivered;
        auto set_bit = [&](std::uint8_t mask, bool on) {
            stimulus_.digital_inputs = on ? static_cast<std::uint8_t>(stimulus_.digital_inputs | mask)
                                          : static_cast<std::uint8_t>(stimulus_.digital_inputs & ~mask);
            stimulus_changed = true;
        };
        switch (ev.action) {
        case ScriptAction::Setpoint:
            setpoints.push({ev.axis, ev.velocity, ev.time_ms * 1'000'000, false});
            break;
        case ScriptAction::EStop: set_bit(io_bits::kEmergencyStop, ev.value); break;
        case ScriptAction::LimitMin: set_bit(io_bits::kLimitMin, ev.value); break;
        case ScriptAction::LimitMax: set_bit(io_bits::kLimitMax, ev.value); break;
        case ScriptAction::Offline:
            stimulus_.offline_mask |= (1u << ev.position);
            stimulus_changed = true;
            break;
        case ScriptAction::Online:
            stimulus_.offline_mask &= ~(1u << ev.position);
            stimulus_changed = true;
            break;
        }
    }
    if (stimulus_changed) {
        stimuli.write(stimulus_);
    }
    return delivered;
}

JogKeymap::JogKeymap(std::int32_t step, std::int32_t v_max) : step_(step), v_max_(v_max)
{
    if (step <= 0 || v_max <= 0) {
        throw std::invalid_argument("jog step and v_max must be positive");
    }
}

JogAction JogKeymap::apply(char key, SetpointMailbox& mailbox, std::int64_t timestamp_ns)
{
    auto push_axis = [&](std::size_t axis) {
        mailbox.push({static_cast<std::uint8_t>(axis), velocities_[axis], timestamp_ns, false});
    };
    switch (key) {
    case '1':
    case '2':
    case '3':
        selected_ = static_cast<std::size_t>(key - '1');
        return JogAction::Updated;
    case '+':
    case '=':
    case '-': {
        const std::int64_t delta = key == '-' ? -step_ : step_;
        velocities_[selected_] = static_cast<std::int32_t>(
            std::clamp<std::int64_t>(velocities_[selected_] + delta, -v_max_, v_max_));
        push_axis(selected_);
        return JogAction::Updated;
    }
    case ' ':
        velocities_.fill(0);
        for (std::size_t axis = 0; axis < kAxisCount; ++axis) {
            push_axis(axis);
        }
        return JogAction::Updated;
    case 'q':
    case 'Q':
        return JogAction::Quit;
    default:
        return JogAction::None;
    }
}

}  // namespace ecatsim
