#include <unistd.h>

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ecatsim/app.hpp"

namespace {

struct Overrides {
    std::string config_path;
    std::optional<double> duration_s;
    std::optional<std::int64_t> period_us;
    bool virtual_clock = false;
    std::optional<std::string> output_dir;
};

void add_common(CLI::App* cmd, Overrides& o, bool timed)
{
    cmd->add_option("--config", o.config_path, "Configuration file");
    cmd->add_option("--period-us", o.period_us, "Nominal cycle period in microseconds");
    cmd->add_flag("--virtual-clock", o.virtual_clock, "Run on simulated time");
    if (timed) {
        cmd->add_option("--duration", o.duration_s, "Run length in seconds");
        cmd->add_option("--out", o.output_dir, "Directory for report artifacts");
    }
}

ecatsim::Config resolve(const Overrides& o)
{
    ecatsim::Config c = o.config_path.empty() ? ecatsim::Config{} : ecatsim::load_config(o.config_path);
    if (o.duration_s) c.duration_s = *o.duration_s;
    if (o.period_us) c.nominal_period_us = *o.period_us;
    if (o.virtual_clock) c.virtual_clock = true;
    if (o.output_dir) c.output_dir = *o.output_dir;
    c.validate();
    return c;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Simulated EtherCAT ring with a cyclic master and CSV motion control"};
    app.require_subcommand(1);

    Overrides o;
    auto* scan = app.add_subcommand("scan", "List the slaves on the ring");
    auto* run = app.add_subcommand("run", "Bring up the ring and run the setpoint source");
    auto* bench = app.add_subcommand("bench", "Measure loop timing");
    auto* jog = app.add_subcommand("jog", "Drive the axes from the keyboard");
    add_common(scan, o, false);
    add_common(run, o, true);
    add_common(bench, o, true);
    add_common(jog, o, false);

    auto* codec = app.add_subcommand("codec", "Frame codec utilities");
    codec->require_subcommand(1);
    std::string hex;
    auto* dump = codec->add_subcommand("dump", "Decode a hex frame and print its datagrams");
    dump->add_option("hex", hex, "Frame bytes in hex")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : ecatsim::kExitConfig;
    }

    if (dump->parsed()) {
        return ecatsim::cmd_codec_dump(hex, std::cout, std::cerr);
    }

    ecatsim::Config config;
    try {
        config = resolve(o);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return ecatsim::kExitConfig;
    }

    try {
        if (scan->parsed()) return ecatsim::cmd_scan(config, std::cout, std::cerr);
        if (run->parsed()) return ecatsim::cmd_run(config, std::cout, std::cerr);
        if (bench->parsed()) return ecatsim::cmd_bench(config, std::cout, std::cerr);
        if (jog->parsed()) return ecatsim::cmd_jog(config, STDIN_FILENO, std::cout, std::cerr);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return ecatsim::kExitBus;
    }
    return ecatsim::kExitConfig;
}
