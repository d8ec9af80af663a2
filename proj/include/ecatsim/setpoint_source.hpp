#pragma once

// Setpoint sources for the input context: a scripted trajectory file and the
// keyboard jog keymap.
//
// Trajectory file, one event per line (blank lines and '#' comments ignored):
//
//   <time_ms> <axis> <velocity>      setpoint for axis 0..2 in counts/s
//   <time_ms> estop [0|1]            emergency stop input (default 1)
//   <time_ms> limit_min [0|1]        limit switch inputs
//   <time_ms> limit_max [0|1]
//   <time_ms> offline <position>     take a ring position offline
//   <time_ms> online <position>      bring it back
//
// Events must be in non-decreasing time order.

#include <array>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecatsim/motion.hpp"

namespace ecatsim {

class ScriptError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ScriptAction : std::uint8_t {
    Setpoint,
    EStop,
    LimitMin,
    LimitMax,
    Offline,
    Online,
};

struct ScriptEvent {
    std::int64_t time_ms = 0;
    ScriptAction action = ScriptAction::Setpoint;
    std::uint8_t axis = 0;
    std::int32_t velocity = 0;
    bool value = true;
    std::uint32_t position = 0;

    friend bool operator==(const ScriptEvent&, const ScriptEvent&) = default;
};

class TrajectoryScript {
public:
    TrajectoryScript() = default;
    explicit TrajectoryScript(std::vector<ScriptEvent> events);

    // `origin` names the source in error messages.
    static TrajectoryScript parse(std::istream& in, const std::string& origin = "<script>");
    static TrajectoryScript load(const std::filesystem::path& path);

    std::span<const ScriptEvent> events() const { return events_; }
    std::int64_t end_time_ms() const { return events_.empty() ? 0 : events_.back().time_ms; }

private:
    std::vector<ScriptEvent> events_;
};

// Replays a script against elapsed time. Setpoints go to the setpoint mailbox;
// input and link events are folded into a complete Stimulus word and published
// through the stimulus mailbox.
class ScriptPlayer {
public:
    explicit ScriptPlayer(const TrajectoryScript& script);

    // Delivers every event with time_ms * 1e6 <= elapsed_ns not delivered yet.
    // Returns the number of events delivered.
    std::size_t deliver_due(std::int64_t elapsed_ns, SetpointMailbox& setpoints,
                            StimulusMailbox& stimuli);

    bool finished() const { return next_ >= script_.events().size(); }
    // Elapsed time of the next pending event; -1 once finished.
    std::int64_t next_due_ns() const;

private:
    const TrajectoryScript& script_;
    std::size_t next_ = 0;
    Stimulus stimulus_;
};

enum class JogAction : std::uint8_t { None, Updated, Quit };

// Keys: '1' '2' '3' select an axis, '+' (or '=') / '-' step its velocity,
// space zeroes all axes, 'q' quits. Every velocity change is pushed to the
// mailbox.
class JogKeymap {
public:
    JogKeymap(std::int32_t step, std::int32_t v_max);

    JogAction apply(char key, SetpointMailbox& mailbox, std::int64_t timestamp_ns = 0);

    std::size_t selected_axis() const { return selected_; }
    const std::array<std::int32_t, kAxisCount>& velocities() const { return velocities_; }

private:
    std::int32_t step_;
    std::int32_t v_max_;
    std::size_t selected_ = 0;
    std::array<std::int32_t, kAxisCount> velocities_{};
};

}  // namespace ecatsim
