#pragma once

// Cyclic executive and loop-timing instrumentation.
//
// The loop wakes at absolute deadlines start + i * period, so a late wake is
// followed by a shorter period instead of shifting every later cycle. Every
// `decimation`-th cycle records a TimingSample into a buffer sized before the
// loop starts.

#include <chrono>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace ecatsim {

class ClockError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TimingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class SchedulerPolicy : std::uint8_t { BestEffort, RealtimeIfAvailable };

struct SchedulerHint {
    int priority = 98;
    SchedulerPolicy policy = SchedulerPolicy::RealtimeIfAvailable;
};

struct SchedulerOutcome {
    bool realtime = false;
    bool memory_locked = false;
    std::string detail;
};

// Tries SCHED_FIFO at the hinted priority and mlockall() for the calling
// thread when the policy asks for it. Never fails; the outcome says what stuck.
SchedulerOutcome apply_scheduler_hint(const SchedulerHint& hint);

struct CyclicConfig {
    std::int64_t nominal_period_us = 1000;
    double duration_s = 180.0;
    std::uint32_t decimation = 10;
    SchedulerHint scheduler;

    // Throws std::invalid_argument on a non-positive period, negative
    // duration or zero decimation.
    void validate() const;
    std::int64_t period_ns() const { return nominal_period_us * 1000; }
    std::int64_t cycle_count() const;
    // Samples a full run records.
    std::size_t sample_capacity() const;
};

struct TimingSample {
    std::uint64_t cycle_index = 0;
    // Monotonic timestamps in ns.
    std::int64_t t_wake_previous = 0;
    std::int64_t t_wake_actual = 0;
    std::int64_t t_cycle_start = 0;
    std::int64_t t_cycle_end = 0;
    // Derived, microseconds.
    double period_us = 0;
    double jitter_us = 0;
    double exec_us = 0;
};

// Fills in the derived fields: period = wake - previous wake,
// jitter = |period - nominal|, exec = end - start.
TimingSample make_timing_sample(std::uint64_t cycle_index, std::int64_t t_wake_previous,
                                std::int64_t t_wake_actual, std::int64_t t_cycle_start,
                                std::int64_t t_cycle_end, std::int64_t nominal_period_ns);

class Clock {
public:
    virtual ~Clock() = default;
    virtual std::int64_t now_ns() = 0;
    virtual void sleep_until_ns(std::int64_t deadline_ns) = 0;
    virtual std::int64_t resolution_ns() const = 0;
};

// CLOCK_MONOTONIC with absolute clock_nanosleep. Throws ClockError on failure.
class MonotonicClock final : public Clock {
public:
    MonotonicClock();
    std::int64_t now_ns() override;
    void sleep_until_ns(std::int64_t deadline_ns) override;
    std::int64_t resolution_ns() const override { return resolution_ns_; }

private:
    std::int64_t resolution_ns_ = 1;
};

// Deterministic simulated time. Sleeping jumps to the deadline (plus an
// optional random wake latency); advance() models time spent computing.
class VirtualClock final : public Clock {
public:
    explicit VirtualClock(std::int64_t start_ns = 0) : now_(start_ns) {}

    std::int64_t now_ns() override { return now_; }
    void sleep_until_ns(std::int64_t deadline_ns) override;
    std::int64_t resolution_ns() const override { return 1; }

    void advance(std::int64_t ns) { now_ += ns; }

    // Every wake lands uniformly in [deadline, deadline + max_latency_ns].
    void set_wake_latency(std::int64_t max_latency_ns, std::uint64_t seed);

private:
    std::int64_t now_;
    std::int64_t max_latency_ns_ = 0;
    std::mt19937_64 rng_;
};

struct CyclicResult {
    std::vector<TimingSample> samples;
    std::uint64_t cycles = 0;
    // Cycles that ended after the next deadline.
    std::uint64_t overruns = 0;
    bool stopped_by_body = false;
};

// Runs `body` once per cycle for config.cycle_count() cycles, or until a body
// returning bool returns false. Cycle i (from 0) wakes at start + i * period;
// cycles with (i + 1) % decimation == 0 and i > 0 are recorded.
template <typename Body>
CyclicResult run_cyclic(const CyclicConfig& config, Clock& clock, Body&& body)
{
    config.validate();
    CyclicResult result;
    result.samples.reserve(config.sample_capacity());

    const std::int64_t period = config.period_ns();
    const std::int64_t cycles = config.cycle_count();
    const std::int64_t start = clock.now_ns();
    std::int64_t previous_wake = 0;

    for (std::int64_t i = 0; i < cycles; ++i) {
        const std::int64_t deadline = start + i * period;
        clock.sleep_until_ns(deadline);
        const std::int64_t wake = clock.now_ns();
        const std::int64_t t_start = clock.now_ns();

        bool keep_going = true;
        if constexpr (std::is_same_v<std::invoke_result_t<Body&>, bool>) {
            keep_going = body();
        } else {
            body();
        }

        const std::int64_t t_end = clock.now_ns();
        ++result.cycles;
        if (t_end > deadline + period) {
            ++result.overruns;
        }
        const auto idx = static_cast<std::uint64_t>(i);
        if (i > 0 && (idx + 1) % config.decimation == 0 &&
            result.samples.size() < result.samples.capacity()) {
            result.samples.push_back(
                make_timing_sample(idx, previous_wake, wake, t_start, t_end, period));
        }
        previous_wake = wake;
        if (!keep_going) {
            result.stopped_by_body = true;
            break;
        }
    }
    return result;
}

struct MetricStats {
    double avg = 0;
    double std = 0;  // population
    double min = 0;
    double max = 0;
};

struct TimingStats {
    MetricStats period;
    MetricStats jitter;
    MetricStats exec;
    std::size_t sample_count = 0;
    double nominal_period_us = 1000.0;
};

// Throws TimingError for fewer than two samples.
TimingStats compute_stats(std::span<const TimingSample> samples, double nominal_period_us);

// Fixed-format table: rows T_period, T_jitter, T_exec; columns
// "Avg. ± St.D" and "Min / Max"; microseconds with three decimals, exact
// zeros as "0".
std::string render_report(const TimingStats& stats);
// metric,avg_us,std_us,min_us,max_us,samples
std::string render_stats_csv(const TimingStats& stats);
// cycle_index,period_us,jitter_us,exec_us
std::string render_samples_csv(std::span<const TimingSample> samples);

enum class TimingMetric : std::uint8_t { Period, Jitter, Exec };

double metric_value(const TimingSample& s, TimingMetric m);

struct Histogram {
    double first_bin_start = 0;
    double bin_width = 1;
    std::vector<std::uint64_t> counts;

    std::uint64_t total() const;
};

// Bins of `bin_width` starting at floor(min / width) * width and covering
// [min, max]. Non-finite values are dropped. Throws std::invalid_argument for
// a non-positive width and TimingError when nothing is left to bin.
Histogram build_histogram(std::span<const double> values, double bin_width);

// bin_start_us,bin_end_us,count
std::string render_histogram_csv(const Histogram& h);

std::string export_histogram(std::span<const TimingSample> samples, double bin_width_us,
                             TimingMetric metric = TimingMetric::Jitter);

}  // namespace ecatsim
