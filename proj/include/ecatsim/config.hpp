#pragma once

// Declarative run configuration.
//
//   # comment
//   nominal_period_us = 1000
//   duration_s        = 180
//   decimation        = 10
//   v_max             = 50000
//   priority          = 98
//   policy            = realtime-if-available   # or best-effort
//   setpoint_source   = script:trajectory.txt   # or jog, none
//   output_dir        = ecatsim-out
//   virtual_clock     = false
//   per_hop_latency_ns = 0
//   jog_step          = 1000
//   histogram_bin_us  = 1.0
//   degraded_shutdown_cycles = 100
//   bench_body        = bus                     # or noop
//   slave = servo                               # repeated, ring order,
//   slave = io 0x1003                           # optional station address
//   topology = servo servo servo io             # alternative one-line form
//
// Any `slave`/`topology` line replaces the default ring (three servo drives
// then one IO slave). Relative script paths resolve against the config file.

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecatsim/slave_sim.hpp"
#include "ecatsim/timing.hpp"

namespace ecatsim {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SlaveEntry {
    SlaveKind kind = SlaveKind::Servo;
    std::optional<std::uint16_t> station_address;

    friend bool operator==(const SlaveEntry&, const SlaveEntry&) = default;
};

enum class SetpointSourceKind : std::uint8_t { None, Script, Jog };
enum class BenchBody : std::uint8_t { Bus, Noop };

struct Config {
    std::vector<SlaveEntry> topology = {
        {SlaveKind::Servo, std::nullopt},
        {SlaveKind::Servo, std::nullopt},
        {SlaveKind::Servo, std::nullopt},
        {SlaveKind::Io, std::nullopt},
    };
    std::int64_t nominal_period_us = 1000;
    double duration_s = 180.0;
    std::uint32_t decimation = 10;
    std::int32_t v_max = 50'000;
    SchedulerHint scheduler;
    SetpointSourceKind setpoint_source = SetpointSourceKind::None;
    std::filesystem::path script_path;
    std::filesystem::path output_dir = "ecatsim-out";
    bool virtual_clock = false;
    std::int64_t per_hop_latency_ns = 0;
    std::int32_t jog_step = 1000;
    double histogram_bin_us = 1.0;
    std::uint32_t degraded_shutdown_cycles = 100;
    BenchBody bench_body = BenchBody::Bus;

    // Throws ConfigError describing the first violation.
    void validate() const;

    CyclicConfig cyclic() const;
    std::vector<SlaveKind> slave_kinds() const;
    std::size_t servo_count() const;
};

Config parse_config(std::istream& in, const std::string& origin = "<config>",
                    const std::filesystem::path& base_dir = {});
Config load_config(const std::filesystem::path& path);

}  // namespace ecatsim
