#include <doctest.h>

#include <sstream>

#include "ecatsim/config.hpp"

using namespace ecatsim;

namespace {

Config parse(const std::string& text, const std::filesystem::path& base = {})
{
    std::istringstream in(text);
    return parse_config(in, "cfg", base);
}

}  // namespace

TEST_CASE("defaults describe the reference rig")
{
    Config c;
    CHECK_NOTHROW(c.validate());
    CHECK(c.topology.size() == 4);
    CHECK(c.servo_count() == 3);
    CHECK(c.nominal_period_us == 1000);
    CHECK(c.decimation == 10);
    CHECK(c.cyclic().sample_capacity() == 18'000);
    CHECK(parse("").topology == c.topology);
}

TEST_CASE("full key set")
{
    const auto c = parse(
        "slave = servo\n"
        "slave = io 0x1001\n"
        "nominal_period_us = 500\n"
        "duration_s = 2.5\n"
        "decimation = 4\n"
        "v_max = 1000\n"
        "priority = 80\n"
        "policy = best-effort\n"
        "output_dir = out\n"
        "virtual_clock = yes\n"
        "per_hop_latency_ns = 300\n"
        "jog_step = 50\n"
        "histogram_bin_us = 0.5\n"
        "degraded_shutdown_cycles = 7\n"
        "bench_body = noop\n",
        "/base");
    REQUIRE(c.topology.size() == 2);
    CHECK(c.topology[1].kind == SlaveKind::Io);
    CHECK(c.topology[1].station_address == 0x1001);
    CHECK(c.nominal_period_us == 500);
    CHECK(c.duration_s == 2.5);
    CHECK(c.scheduler.priority == 80);
    CHECK(c.scheduler.policy == SchedulerPolicy::BestEffort);
    CHECK(c.virtual_clock);
    CHECK(c.per_hop_latency_ns == 300);
    CHECK(c.bench_body == BenchBody::Noop);
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("setpoint source resolves relative script paths")
{
    const auto c = parse("setpoint_source = script:traj.txt\n", "/etc/rig");
    CHECK(c.setpoint_source == SetpointSourceKind::Script);
    CHECK(c.script_path == std::filesystem::path("/etc/rig/traj.txt"));
    CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("not found"), ConfigError);
    CHECK(parse("setpoint_source = jog").setpoint_source == SetpointSourceKind::Jog);
}

TEST_CASE("parse errors")
{
    CHECK_THROWS_WITH_AS(parse("bogus = 1\n"), doctest::Contains("cfg:1"), ConfigError);
    CHECK_THROWS_AS(parse("no equals sign\n"), ConfigError);
    CHECK_THROWS_AS(parse("slave = stepper\n"), ConfigError);
    CHECK_THROWS_AS(parse("decimation = ten\n"), ConfigError);
    CHECK_THROWS_AS(parse("duration_s = 1s\n"), ConfigError);
    CHECK_THROWS_AS(parse("policy = fifo\n"), ConfigError);
    CHECK_THROWS_AS(parse("virtual_clock = maybe\n"), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/ecatsim.cfg"), ConfigError);
}

TEST_CASE("validation errors")
{
    CHECK_THROWS_WITH_AS(parse("topology =\n").validate(), doctest::Contains("topology is empty"),
                         ConfigError);
    CHECK_THROWS_AS(parse("slave = servo 0x2000\n").validate(), ConfigError);
    CHECK_THROWS_AS(parse("priority = 0\n").validate(), ConfigError);
    CHECK_THROWS_AS(parse("nominal_period_us = 0\n").validate(), ConfigError);
    CHECK_THROWS_AS(parse("duration_s = -1\n").validate(), ConfigError);
    CHECK_THROWS_AS(parse("decimation = 0\n").validate(), ConfigError);
    CHECK_THROWS_AS(parse("histogram_bin_us = 0\n").validate(), ConfigError);
    std::string many;
    for (int i = 0; i < 33; ++i) many += "slave = io\n";
    CHECK_THROWS_AS(parse(many).validate(), ConfigError);
}
