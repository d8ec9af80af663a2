#include "ecatsim/app.hpp"

#include <poll.h>
#include <termios.h>
#include <unistd.h>

#include <atomic>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "ecatsim/codec.hpp"
#include "ecatsim/setpoint_source.hpp"

namespace ecatsim {

namespace {

Bus make_bus(const Config& config)
{
    const auto kinds = config.slave_kinds();
    return Bus::from_kinds(kinds, std::chrono::nanoseconds{config.per_hop_latency_ns},
                           static_cast<double>(config.nominal_period_us) * 1e-6);
}

void validate_for_motion(const Config& config)
{
    config.validate();
    if (config.servo_count() > kAxisCount) {
        throw ConfigError(fmt::format("{} servo drives configured, at most {} axes are supported",
                                      config.servo_count(), kAxisCount));
    }
}

void write_file(const std::filesystem::path& path, const std::string& content)
{
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
    }
    f << content;
}

std::vector<std::int64_t> servo_positions(Session& s)
{
    std::vector<std::int64_t> out;
    for (auto pos : s.cycle->servo_positions()) {
        out.push_back(s.master.bus().servo(pos).position);
    }
    return out;
}

// Raw, non-echoing terminal input for the lifetime of the guard.
class RawTerminal {
public:
    explicit RawTerminal(int fd) : fd_(fd)
    {
        if (::isatty(fd) && ::tcgetattr(fd, &saved_) == 0) {
            termios raw = saved_;
            raw.c_lflag &= static_cast<tcflag_t>(~(ICANON | ECHO));
            raw.c_cc[VMIN] = 1;
            raw.c_cc[VTIME] = 0;
            active_ = ::tcsetattr(fd, TCSANOW, &raw) == 0;
        }
    }
    ~RawTerminal()
    {
        if (active_) {
            ::tcsetattr(fd_, TCSANOW, &saved_);
        }
    }
    RawTerminal(const RawTerminal&) = delete;
    RawTerminal& operator=(const RawTerminal&) = delete;

private:
    int fd_;
    termios saved_{};
    bool active_ = false;
};

template <typename F>
int guarded(std::ostream& err, F&& f)
{
    try {
        return f();
    } catch (const ConfigError& e) {
        fmt::print(err, "config error: {}\n", e.what());
        return kExitConfig;
    } catch (const ScriptError& e) {
        fmt::print(err, "config error: {}\n", e.what());
        return kExitConfig;
    } catch (const EnableTimeout& e) {
        fmt::print(err, "bring-up error: {}\n", e.what());
        return kExitBus;
    } catch (const BusError& e) {
        fmt::print(err, "bus error: {}\n", e.what());
        return kExitBus;
    } catch (const ClockError& e) {
        fmt::print(err, "clock error: {}\n", e.what());
        return kExitBus;
    }
}

void print_positions(std::ostream& out, const std::vector<std::int64_t>& positions)
{
    for (std::size_t axis = 0; axis < positions.size(); ++axis) {
        fmt::print(out, "axis {} position {}\n", axis, positions[axis]);
    }
}

}  // namespace

Session::Session(const Config& config)
    : master(make_bus(config)),
      mailbox(config.v_max),
      controller(std::min(config.servo_count(), kAxisCount))
{
}

std::unique_ptr<Session> bring_up(const Config& config, bool enable_axes)
{
    auto s = std::make_unique<Session>(config);
    s->master.scan();
    s->master.configure();
    s->master.request_al_state(AlState::Init);
    s->master.request_al_state(AlState::PreOp);
    s->master.request_al_state(AlState::SafeOp);
    s->master.request_al_state(AlState::Op);
    s->cycle.emplace(s->master, s->mailbox, s->controller, &s->stimuli);
    if (enable_axes && s->cycle->axis_count() > 0) {
        s->enable_cycles = enable_all(*s->cycle);
    }
    return s;
}

bool shut_down(Session& session, std::ostream& log)
{
    bool disabled = true;
    if (session.cycle) {
        disabled = disable_all(*session.cycle);
        if (!disabled) {
            fmt::print(log, "warning: not every drive confirmed SwitchOnDisabled\n");
        }
    }
    try {
        session.master.request_al_state(AlState::SafeOp);
        session.master.request_al_state(AlState::PreOp);
        session.master.request_al_state(AlState::Init);
    } catch (const std::exception& e) {
        fmt::print(log, "warning: ring shutdown incomplete: {}\n", e.what());
    }
    return disabled;
}

std::unique_ptr<Clock> make_clock(const Config& config)
{
    if (config.virtual_clock) {
        return std::make_unique<VirtualClock>();
    }
    return std::make_unique<MonotonicClock>();
}

RunReport execute_run(const Config& config, std::ostream& log)
{
    validate_for_motion(config);
    if (config.setpoint_source == SetpointSourceKind::Jog) {
        throw ConfigError("setpoint_source jog is interactive; use the jog command");
    }
    std::optional<TrajectoryScript> script;
    if (config.setpoint_source == SetpointSourceKind::Script) {
        script = TrajectoryScript::load(config.script_path);
    }

    const auto cyclic = config.cyclic();
    auto clock = make_clock(config);
    auto session = bring_up(config, true);
    auto& cycle = *session->cycle;

    RunReport report;
    report.enable_cycles = session->enable_cycles;
    report.scheduler = config.virtual_clock
                           ? SchedulerOutcome{false, false, "virtual clock"}
                           : apply_scheduler_hint(config.scheduler);
    fmt::print(log, "scheduler: {}\n", report.scheduler.detail);
    fmt::print(log, "drives enabled after {} cycles\n", report.enable_cycles);

    std::optional<ScriptPlayer> player;
    if (script) {
        player.emplace(*script);
    }

    // Under the virtual clock the script is replayed inline so runs are
    // reproducible; otherwise it is fed from a separate input thread.
    const bool inline_script = player && config.virtual_clock;
    std::jthread feeder;
    std::atomic<std::int64_t> start_ns{clock->now_ns()};
    if (player && !inline_script) {
        feeder = std::jthread([&](std::stop_token st) {
            MonotonicClock wall;
            while (!st.stop_requested() && !player->finished()) {
                const auto elapsed = wall.now_ns() - start_ns.load();
                const auto due = player->next_due_ns();
                if (elapsed >= due) {
                    player->deliver_due(elapsed, session->mailbox, session->stimuli);
                } else {
                    std::this_thread::sleep_for(std::chrono::nanoseconds(
                        std::min<std::int64_t>(due - elapsed, 1'000'000)));
                }
            }
        });
    }

    auto* vclock = dynamic_cast<VirtualClock*>(clock.get());
    std::uint32_t consecutive_degraded = 0;
    std::int64_t cycle_index = 0;
    const std::int64_t period_ns = cyclic.period_ns();
    start_ns = clock->now_ns();

    report.timing = run_cyclic(cyclic, *clock, [&]() -> bool {
        if (inline_script) {
            player->deliver_due(cycle_index * period_ns, session->mailbox, session->stimuli);
        }
        ++cycle_index;
        const auto outcome = cycle.run_once();
        if (vclock) {
            vclock->advance(session->master.bus().last_propagation_delay().count());
        }
        consecutive_degraded = outcome.exchange.degraded ? consecutive_degraded + 1 : 0;
        if (consecutive_degraded >= config.degraded_shutdown_cycles) {
            report.degraded_shutdown = true;
            return false;
        }
        return true;
    });

    if (feeder.joinable()) {
        feeder.request_stop();
        feeder.join();
    }

    report.safety_stop_cycles = session->controller.status().safety_stop_cycles;
    report.final_positions = servo_positions(*session);
    report.drives_disabled = shut_down(*session, log);
    return report;
}

RunReport execute_bench(const Config& config, std::ostream& log)
{
    validate_for_motion(config);
    const auto cyclic = config.cyclic();
    auto clock = make_clock(config);

    RunReport report;
    report.scheduler = config.virtual_clock
                           ? SchedulerOutcome{false, false, "virtual clock"}
                           : apply_scheduler_hint(config.scheduler);
    fmt::print(log, "scheduler: {}\n", report.scheduler.detail);

    if (config.bench_body == BenchBody::Noop) {
        report.timing = run_cyclic(cyclic, *clock, [] {});
        return report;
    }

    auto session = bring_up(config, true);
    report.enable_cycles = session->enable_cycles;
    auto* vclock = dynamic_cast<VirtualClock*>(clock.get());
    auto& cycle = *session->cycle;
    report.timing = run_cyclic(cyclic, *clock, [&] {
        cycle.run_once();
        if (vclock) {
            vclock->advance(session->master.bus().last_propagation_delay().count());
        }
    });
    report.safety_stop_cycles = session->controller.status().safety_stop_cycles;
    report.final_positions = servo_positions(*session);
    report.drives_disabled = shut_down(*session, log);
    return report;
}

std::optional<TimingStats> write_artifacts(const std::filesystem::path& dir,
                                           std::span<const TimingSample> samples,
                                           double nominal_period_us, double histogram_bin_us)
{
    std::filesystem::create_directories(dir);
    write_file(dir / "samples.csv", render_samples_csv(samples));

    if (samples.size() < 2) {
        write_file(dir / "report.txt",
                   fmt::format("no timing statistics: {} samples collected, at least 2 required\n",
                               samples.size()));
        write_file(dir / "report.csv", "metric,avg_us,std_us,min_us,max_us,samples\n");
        std::filesystem::remove(dir / "histogram.csv");
        return std::nullopt;
    }
    const auto stats = compute_stats(samples, nominal_period_us);
    write_file(dir / "report.txt", render_report(stats));
    write_file(dir / "report.csv", render_stats_csv(stats));
    write_file(dir / "histogram.csv",
               export_histogram(samples, histogram_bin_us, TimingMetric::Jitter));
    return stats;
}

std::string render_scan(std::span<const SlaveInfo> slaves)
{
    std::string s = fmt::format("{:<4} {:<6} {:<8} {:<10} {:<10} {:>3} {:>3} {:>4} {}\n", "pos",
                                "type", "station", "vendor", "product", "rx", "tx", "pdo", "state");
    for (const auto& info : slaves) {
        const auto kind = info.kind();
        s += fmt::format("{:<4} {:<6} 0x{:04X}   0x{:08X} 0x{:08X} {:>3} {:>3} {:>4} {}\n",
                         info.ring_position, kind ? to_string(*kind) : "?", info.station_address,
                         info.identity.vendor_id, info.identity.product_code, info.rx_bytes,
                         info.tx_bytes, info.rx_bytes + info.tx_bytes, to_string(info.al_state));
    }
    return s;
}

int cmd_scan(const Config& config, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        config.validate();
        Master master(make_bus(config));
        const auto& slaves = master.scan();
        out << render_scan(slaves);
        const auto domain = build_domain(slaves);
        fmt::print(out, "{} slaves, process image {} bytes, expected working counter {}\n",
                   slaves.size(), domain.total_size, domain.expected_wkc);
        return kExitOk;
    });
}

namespace {

int finish_timed_command(const Config& config, const RunReport& report, std::ostream& out,
                         std::ostream& err)
{
    const auto stats = write_artifacts(config.output_dir, report.timing.samples,
                                       static_cast<double>(config.nominal_period_us),
                                       config.histogram_bin_us);
    fmt::print(out, "cycles {} samples {} overruns {}\n", report.timing.cycles,
               report.timing.samples.size(), report.timing.overruns);
    print_positions(out, report.final_positions);
    if (stats) {
        out << render_report(*stats);
    } else {
        fmt::print(err, "no timing statistics: {} samples collected, at least 2 required\n",
                   report.timing.samples.size());
    }
    fmt::print(out, "artifacts written to {}\n", config.output_dir.string());
    if (report.degraded_shutdown) {
        fmt::print(err,
                   "runtime error: working counter below expectation for {} consecutive cycles, "
                   "loop stopped\n",
                   config.degraded_shutdown_cycles);
        return kExitDegraded;
    }
    return kExitOk;
}

}  // namespace

int cmd_run(const Config& config, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        const auto report = execute_run(config, out);
        fmt::print(out, "safety stop cycles {}\n", report.safety_stop_cycles);
        return finish_timed_command(config, report, out, err);
    });
}

int cmd_bench(const Config& config, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        const auto report = execute_bench(config, out);
        return finish_timed_command(config, report, out, err);
    });
}

int cmd_jog(const Config& config, int input_fd, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        validate_for_motion(config);
        auto clock = make_clock(config);
        auto session = bring_up(config, true);
        auto& cycle = *session->cycle;
        if (!config.virtual_clock) {
            fmt::print(out, "scheduler: {}\n", apply_scheduler_hint(config.scheduler).detail);
        }
        fmt::print(out,
                   "jog: 1/2/3 select axis, +/- change velocity by {}, space stops all, q quits\n",
                   config.jog_step);
        out.flush();

        JogKeymap keymap(config.jog_step, config.v_max);
        std::atomic<bool> quit{false};
        std::mutex out_mutex;
        RawTerminal raw(input_fd);

        std::jthread input([&](std::stop_token st) {
            MonotonicClock wall;
            while (!st.stop_requested()) {
                pollfd pfd{input_fd, POLLIN, 0};
                const int rc = ::poll(&pfd, 1, 50);
                if (rc < 0 && errno == EINTR) continue;
                if (rc < 0) break;
                if (rc == 0) continue;
                char key = 0;
                const auto n = ::read(input_fd, &key, 1);
                if (n <= 0) break;  // end of input
                const auto action = keymap.apply(key, session->mailbox, wall.now_ns());
                if (action == JogAction::Quit) break;
                if (action == JogAction::Updated) {
                    std::lock_guard lock(out_mutex);
                    const auto& v = keymap.velocities();
                    fmt::print(out, "axis {} selected, velocities {} {} {}\n",
                               keymap.selected_axis(), v[0], v[1], v[2]);
                    out.flush();
                }
            }
            quit = true;
        });

        // Open-ended absolute-deadline loop; jog records no timing samples.
        auto* vclock = dynamic_cast<VirtualClock*>(clock.get());
        const std::int64_t period_ns = config.cyclic().period_ns();
        std::int64_t deadline = clock->now_ns();
        while (!quit.load(std::memory_order_relaxed)) {
            clock->sleep_until_ns(deadline);
            cycle.run_once();
            if (vclock) {
                vclock->advance(session->master.bus().last_propagation_delay().count());
            }
            deadline += period_ns;
        }
        input.request_stop();
        input.join();

        const bool disabled = shut_down(*session, out);
        std::lock_guard lock(out_mutex);
        print_positions(out, servo_positions(*session));
        for (std::size_t axis = 0; axis < cycle.axis_count(); ++axis) {
            const auto state = session->master.bus().servo(cycle.servo_positions()[axis]).cia402_state;
            fmt::print(out, "axis {} {}\n", axis, to_string(state));
        }
        fmt::print(out, "{}\n", disabled ? "all drives disabled" : "drives NOT confirmed disabled");
        return disabled ? kExitOk : kExitBus;
    });
}

int cmd_codec_dump(const std::string& hex, std::ostream& out, std::ostream& err)
{
    try {
        const auto bytes = parse_hex(hex);
        const auto frame = decode_frame(bytes);
        out << describe_frame(frame);
        return kExitOk;
    } catch (const CodecError& e) {
        fmt::print(err, "decode error: {}\n", e.what());
        return kExitConfig;
    }
}

}  // namespace ecatsim
