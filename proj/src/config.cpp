#include "ecatsim/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "ecatsim/master.hpp"

namespace ecatsim {

namespace {

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_integer(const std::string& text, const std::string& where)
{
    std::string_view s = text;
    int base = 10;
    if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
        s.remove_prefix(2);
        base = 16;
    }
    T value{};
    const auto* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, value, base);
    if (s.empty() || ec != std::errc{} || p != end) {
        throw ConfigError(fmt::format("{}: invalid integer '{}'", where, text));
    }
    return value;
}

double parse_double(const std::string& text, const std::string& where)
{
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != text.size() || text.empty() || !std::isfinite(v)) {
        throw ConfigError(fmt::format("{}: invalid number '{}'", where, text));
    }
    return v;
}

bool parse_bool(const std::string& text, const std::string& where)
{
    if (text == "true" || text == "yes" || text == "1" || text == "on") return true;
    if (text == "false" || text == "no" || text == "0" || text == "off") return false;
    throw ConfigError(fmt::format("{}: expected true or false, got '{}'", where, text));
}

SlaveKind parse_kind(const std::string& text, const std::string& where)
{
    if (text == "servo") return SlaveKind::Servo;
    if (text == "io") return SlaveKind::Io;
    throw ConfigError(fmt::format("{}: unknown slave type '{}' (expected servo or io)", where,
                                  text));
}

std::vector<std::string> split_ws(const std::string& s)
{
    std::istringstream is(s);
    std::vector<std::string> out;
    for (std::string t; is >> t;) out.push_back(t);
    return out;
}

}  // namespace

void Config::validate() const
{
    if (topology.empty()) {
        throw ConfigError("topology is empty: at least one slave is required");
    }
    for (std::size_t pos = 0; pos < topology.size(); ++pos) {
        const auto& s = topology[pos];
        const auto assigned = static_cast<std::uint16_t>(kStationAddressBase + pos);
        if (s.station_address && *s.station_address != assigned) {
            throw ConfigError(fmt::format(
                "slave {}: station address 0x{:04X} does not match the assigned 0x{:04X}", pos,
                *s.station_address, assigned));
        }
    }
    if (topology.size() > 32) {
        throw ConfigError("at most 32 slaves are supported");
    }
    if (nominal_period_us <= 0) throw ConfigError("nominal_period_us must be positive");
    if (!(duration_s >= 0.0)) throw ConfigError("duration_s must be non-negative");
    if (decimation == 0) throw ConfigError("decimation must be at least 1");
    if (v_max <= 0) throw ConfigError("v_max must be positive");
    if (scheduler.priority < 1 || scheduler.priority > 99) {
        throw ConfigError("priority must be within 1..99");
    }
    if (setpoint_source == SetpointSourceKind::Script) {
        if (script_path.empty()) throw ConfigError("setpoint_source script: needs a path");
        if (!std::filesystem::is_regular_file(script_path)) {
            throw ConfigError(fmt::format("trajectory file '{}' not found", script_path.string()));
        }
    }
    if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
    if (per_hop_latency_ns < 0) throw ConfigError("per_hop_latency_ns must be non-negative");
    if (jog_step <= 0) throw ConfigError("jog_step must be positive");
    if (!(histogram_bin_us > 0.0)) throw ConfigError("histogram_bin_us must be positive");
    if (degraded_shutdown_cycles == 0) {
        throw ConfigError("degraded_shutdown_cycles must be at least 1");
    }
}

CyclicConfig Config::cyclic() const
{
    CyclicConfig c;
    c.nominal_period_us = nominal_period_us;
    c.duration_s = duration_s;
    c.decimation = decimation;
    c.scheduler = scheduler;
    return c;
}

std::vector<SlaveKind> Config::slave_kinds() const
{
    std::vector<SlaveKind> kinds;
    kinds.reserve(topology.size());
    for (const auto& s : topology) kinds.push_back(s.kind);
    return kinds;
}

std::size_t Config::servo_count() const
{
    return static_cast<std::size_t>(std::count_if(
        topology.begin(), topology.end(), [](const SlaveEntry& s) { return s.kind == SlaveKind::Servo; }));
}

Config parse_config(std::istream& in, const std::string& origin,
                    const std::filesystem::path& base_dir)
{
    Config c;
    bool topology_given = false;
    std::string line;
    std::size_t lineno = 0;

    while (std::getline(in, line)) {
        ++lineno;
        const std::string where = fmt::format("{}:{}", origin, lineno);
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(fmt::format("{}: expected 'key = value'", where));
        }
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));

        auto reset_topology = [&] {
            if (!topology_given) {
                c.topology.clear();
                topology_given = true;
            }
        };

        if (key == "slave") {
            reset_topology();
            const auto tok = split_ws(value);
            if (tok.empty() || tok.size() > 2) {
                throw ConfigError(fmt::format("{}: expected 'slave = <servo|io> [station]'", where));
            }
            SlaveEntry e{parse_kind(tok[0], where), std::nullopt};
            if (tok.size() == 2) {
                e.station_address = parse_integer<std::uint16_t>(tok[1], where);
            }
            c.topology.push_back(e);
        } else if (key == "topology") {
            reset_topology();
            for (const auto& t : split_ws(value)) {
                c.topology.push_back({parse_kind(t, where), std::nullopt});
            }
        } else if (key == "nominal_period_us") {
            c.nominal_period_us = parse_integer<std::int64_t>(value, where);
        } else if (key == "duration_s") {
            c.duration_s = parse_double(value, where);
        } else if (key == "decimation") {
            c.decimation = parse_integer<std::uint32_t>(value, where);
        } else if (key == "v_max") {
            c.v_max = parse_integer<std::int32_t>(value, where);
        } else if (key == "priority") {
            c.scheduler.priority = parse_integer<int>(value, where);
        } else if (key == "policy") {
            if (value == "best-effort") {
                c.scheduler.policy = SchedulerPolicy::BestEffort;
            } else if (value == "realtime-if-available") {
                c.scheduler.policy = SchedulerPolicy::RealtimeIfAvailable;
            } else {
                throw ConfigError(fmt::format(
                    "{}: policy must be best-effort or realtime-if-available", where));
            }
        } else if (key == "setpoint_source") {
            if (value == "none") {
                c.setpoint_source = SetpointSourceKind::None;
            } else if (value == "jog") {
                c.setpoint_source = SetpointSourceKind::Jog;
            } else if (value.rfind("script:", 0) == 0) {
                c.setpoint_source = SetpointSourceKind::Script;
                std::filesystem::path p = trim(value.substr(7));
                if (p.empty()) throw ConfigError(fmt::format("{}: script: needs a path", where));
                c.script_path = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
            } else {
                throw ConfigError(fmt::format(
                    "{}: setpoint_source must be none, jog or script:<path>", where));
            }
        } else if (key == "output_dir") {
            c.output_dir = value;
        } else if (key == "virtual_clock") {
            c.virtual_clock = parse_bool(value, where);
        } else if (key == "per_hop_latency_ns") {
            c.per_hop_latency_ns = parse_integer<std::int64_t>(value, where);
        } else if (key == "jog_step") {
            c.jog_step = parse_integer<std::int32_t>(value, where);
        } else if (key == "histogram_bin_us") {
            c.histogram_bin_us = parse_double(value, where);
        } else if (key == "degraded_shutdown_cycles") {
            c.degraded_shutdown_cycles = parse_integer<std::uint32_t>(value, where);
        } else if (key == "bench_body") {
            if (value == "bus") {
                c.bench_body = BenchBody::Bus;
            } else if (value == "noop") {
                c.bench_body = BenchBody::Noop;
            } else {
                throw ConfigError(fmt::format("{}: bench_body must be bus or noop", where));
            }
        } else {
            throw ConfigError(fmt::format("{}: unknown key '{}'", where, key));
        }
    }
    return c;
}

Config load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(fmt::format("cannot open config file '{}'", path.string()));
    }
    return parse_config(in, path.string(), path.parent_path());
}

}  // namespace ecatsim
