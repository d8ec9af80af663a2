#pragma once

// Command implementations behind the ecatsim tool. Each cmd_* validates the
// configuration before touching the bus or the filesystem and returns a
// process exit code.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ecatsim/config.hpp"
#include "ecatsim/master.hpp"
#include "ecatsim/motion.hpp"
#include "ecatsim/timing.hpp"

namespace ecatsim {

enum ExitCode : int {
    kExitOk = 0,
    kExitConfig = 1,
    kExitBus = 2,
    kExitDegraded = 3,
};

// Master, controller and mailboxes wired together and brought to OP.
struct Session {
    explicit Session(const Config& config);

    Master master;
    SetpointMailbox mailbox;
    MotionController controller;
    StimulusMailbox stimuli;
    std::optional<ControlCycle> cycle;
    int enable_cycles = 0;
};

// Scans, configures and walks the ring to OP; with `enable_axes` the drives
// are also enabled. Throws BusError (or a subclass) and EnableTimeout.
std::unique_ptr<Session> bring_up(const Config& config, bool enable_axes);

// Puts the drives into SwitchOnDisabled and the ring back to INIT. Returns
// true if every drive confirmed SwitchOnDisabled.
bool shut_down(Session& session, std::ostream& log);

struct RunReport {
    CyclicResult timing;
    std::vector<std::int64_t> final_positions;
    std::optional<TimingStats> stats;
    SchedulerOutcome scheduler;
    int enable_cycles = 0;
    bool degraded_shutdown = false;
    bool drives_disabled = false;
    std::uint64_t safety_stop_cycles = 0;
};

// Clock for a configuration: virtual or CLOCK_MONOTONIC.
std::unique_ptr<Clock> make_clock(const Config& config);

// Full run: bring-up, cyclic loop with the configured setpoint source,
// shutdown. Throws ConfigError/ScriptError, BusError, EnableTimeout.
RunReport execute_run(const Config& config, std::ostream& log);

// Timing-only run with a no-op or simulated-bus body.
RunReport execute_bench(const Config& config, std::ostream& log);

// Writes report.txt, report.csv, samples.csv and histogram.csv to `dir`.
// Returns the statistics when there were enough samples for them.
std::optional<TimingStats> write_artifacts(const std::filesystem::path& dir,
                                           std::span<const TimingSample> samples,
                                           double nominal_period_us, double histogram_bin_us);

// Slave table for `scan`.
std::string render_scan(std::span<const SlaveInfo> slaves);

int cmd_scan(const Config& config, std::ostream& out, std::ostream& err);
int cmd_run(const Config& config, std::ostream& out, std::ostream& err);
int cmd_bench(const Config& config, std::ostream& out, std::ostream& err);
// Reads keys from `input_fd`; a terminal is switched to raw mode. End of
// input behaves like 'q'.
int cmd_jog(const Config& config, int input_fd, std::ostream& out, std::ostream& err);
int cmd_codec_dump(const std::string& hex, std::ostream& out, std::ostream& err);

}  // namespace ecatsim
