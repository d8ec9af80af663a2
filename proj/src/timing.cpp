#include "ecatsim/timing.hpp"

#include <sched.h>
#include <sys/mman.h>
#include <time.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <limits>

#include <fmt/format.h>

namespace ecatsim {

SchedulerOutcome apply_scheduler_hint(const SchedulerHint& hint)
{
    SchedulerOutcome out;
    if (hint.policy == SchedulerPolicy::BestEffort) {
        out.detail = "best-effort scheduling (default policy)";
        return out;
    }

    sched_param param{};
    const int lo = sched_get_priority_min(SCHED_FIFO);
    const int hi = sched_get_priority_max(SCHED_FIFO);
    param.sched_priority = std::clamp(hint.priority, lo, hi);
    if (sched_setscheduler(0, SCHED_FIFO, &param) == 0) {
        out.realtime = true;
        out.detail = fmt::format("SCHED_FIFO priority {}", param.sched_priority);
    } else {
        out.detail = fmt::format("SCHED_FIFO priority {} unavailable ({}), running best-effort",
                                 param.sched_priority, std::strerror(errno));
    }
    if (mlockall(MCL_CURRENT | MCL_FUTURE) == 0) {
        out.memory_locked = true;
    } else {
        out.detail += fmt::format("; mlockall failed ({})", std::strerror(errno));
    }
    return out;
}

void CyclicConfig::validate() const
{
    if (nominal_period_us <= 0) {
        throw std::invalid_argument("nominal period must be positive");
    }
    if (!(duration_s >= 0.0) || !std::isfinite(duration_s)) {
        throw std::invalid_argument("duration must be a non-negative number of seconds");
    }
    if (decimation == 0) {
        throw std::invalid_argument("decimation must be at least 1");
    }
}

std::int64_t CyclicConfig::cycle_count() const
{
    const auto total_ns = static_cast<std::int64_t>(std::llround(duration_s * 1e9));
    return total_ns / period_ns();
}

std::size_t CyclicConfig::sample_capacity() const
{
    const std::int64_t cycles = cycle_count();
    std::int64_t n = cycles / decimation;
    if (decimation == 1 && n > 0) {
        --n;  // cycle 0 has no period
    }
    return static_cast<std::size_t>(std::max<std::int64_t>(n, 0));
}

TimingSample make_timing_sample(std::uint64_t cycle_index, std::int64_t t_wake_previous,
                                std::int64_t t_wake_actual, std::int64_t t_cycle_start,
                                std::int64_t t_cycle_end, std::int64_t nominal_period_ns)
{
    TimingSample s;
    s.cycle_index = cycle_index;
    s.t_wake_previous = t_wake_previous;
    s.t_wake_actual = t_wake_actual;
    s.t_cycle_start = t_cycle_start;
    s.t_cycle_end = t_cycle_end;
    const std::int64_t period_ns = t_wake_actual - t_wake_previous;
    s.period_us = static_cast<double>(period_ns) / 1000.0;
    s.jitter_us = static_cast<double>(std::llabs(period_ns - nominal_period_ns)) / 1000.0;
    s.exec_us = static_cast<double>(t_cycle_end - t_cycle_start) / 1000.0;
    return s;
}

namespace {

std::int64_t to_ns(const timespec& ts)
{
    return static_cast<std::int64_t>(ts.tv_sec) * 1'000'000'000 + ts.tv_nsec;
}

}  // namespace

MonotonicClock::MonotonicClock()
{
    timespec res{};
    if (clock_getres(CLOCK_MONOTONIC, &res) != 0) {
        throw ClockError(fmt::format("clock_getres(CLOCK_MONOTONIC) failed: {}",
                                     std::strerror(errno)));
    }
    resolution_ns_ = std::max<std::int64_t>(to_ns(res), 1);
}

std::int64_t MonotonicClock::now_ns()
{
    timespec ts{};
    if (clock_gettime(CLOCK_MONOTONIC, &ts) != 0) {
        throw ClockError(fmt::format("clock_gettime(CLOCK_MONOTONIC) failed: {}",
                                     std::strerror(errno)));
    }
    return to_ns(ts);
}

void MonotonicClock::sleep_until_ns(std::int64_t deadline_ns)
{
    timespec ts{};
    ts.tv_sec = static_cast<time_t>(deadline_ns / 1'000'000'000);
    ts.tv_nsec = static_cast<long>(deadline_ns % 1'000'000'000);
    int rc;
    do {
        rc = clock_nanosleep(CLOCK_MONOTONIC, TIMER_ABSTIME, &ts, nullptr);
    } while (rc == EINTR);
    if (rc != 0) {
        throw ClockError(fmt::format("clock_nanosleep failed: {}", std::strerror(rc)));
    }
}

void VirtualClock::sleep_until_ns(std::int64_t deadline_ns)
{
    if (deadline_ns > now_) {
        now_ = deadline_ns;
    }
    if (max_latency_ns_ > 0) {
        std::uniform_int_distribution<std::int64_t> dist(0, max_latency_ns_);
        now_ += dist(rng_);
    }
}

void VirtualClock::set_wake_latency(std::int64_t max_latency_ns, std::uint64_t seed)
{
    if (max_latency_ns < 0) {
        throw std::invalid_argument("wake latency must be non-negative");
    }
    max_latency_ns_ = max_latency_ns;
    rng_.seed(seed);
}

namespace {

// Welford's running mean / variance plus extremes.
struct Accumulator {
    std::size_t n = 0;
    double mean = 0;
    double m2 = 0;
    double min = std::numeric_limits<double>::infinity();
    double max = -std::numeric_limits<double>::infinity();

    void add(double x)
    {
        ++n;
        const double delta = x - mean;
        mean += delta / static_cast<double>(n);
        m2 += delta * (x - mean);
        min = std::min(min, x);
        max = std::max(max, x);
    }

    MetricStats finish() const
    {
        MetricStats m;
        m.avg = mean;
        m.std = n > 0 ? std::sqrt(std::max(m2 / static_cast<double>(n), 0.0)) : 0.0;
        m.min = min;
        m.max = max;
        // Guard the min <= avg <= max invariant against last-ulp rounding.
        m.avg = std::clamp(m.avg, m.min, m.max);
        return m;
    }
};

}  // namespace

TimingStats compute_stats(std::span<const TimingSample> samples, double nominal_period_us)
{
    if (samples.size() < 2) {
        throw TimingError(fmt::format("statistics need at least 2 samples, got {}",
                                      samples.size()));
    }
    Accumulator period, jitter, exec;
    for (const auto& s : samples) {
        period.add(s.period_us);
        jitter.add(s.jitter_us);
        exec.add(s.exec_us);
    }
    TimingStats st;
    st.period = period.finish();
    st.jitter = jitter.finish();
    st.exec = exec.finish();
    st.sample_count = samples.size();
    st.nominal_period_us = nominal_period_us;
    return st;
}

namespace {

// Exact zeros print as "0", everything else with three decimals.
std::string us(double v)
{
    return v == 0.0 ? std::string("0") : fmt::format("{:.3f}", v);
}

std::string avg_std(const MetricStats& m)
{
    return us(m.avg) + " ± " + us(m.std);
}

std::string min_max(const MetricStats& m)
{
    return us(m.min) + " / " + us(m.max);
}

// Left-aligns to `width` display columns (UTF-8 aware; the table uses "±").
std::string pad(std::string_view text, std::size_t width)
{
    std::size_t columns = 0;
    for (unsigned char c : text) {
        if ((c & 0xC0) != 0x80) ++columns;
    }
    std::string out(text);
    out.append(columns < width ? width - columns : 1, ' ');
    return out;
}

}  // namespace

std::string render_report(const TimingStats& st)
{
    std::string s;
    s += "Real-time loop timing\n";
    s += fmt::format("samples: {}  nominal period: {:.3f} us\n\n", st.sample_count,
                     st.nominal_period_us);
    auto row = [&](std::string_view name, std::string_view a, std::string_view b) {
        s += pad(name, 15) + pad(a, 24) + std::string(b) + "\n";
    };
    row("Metric", "Avg. ± St.D", "Min / Max");
    row("T_period (us)", avg_std(st.period), min_max(st.period));
    row("T_jitter (us)", avg_std(st.jitter), min_max(st.jitter));
    row("T_exec (us)", avg_std(st.exec), min_max(st.exec));
    return s;
}

std::string render_stats_csv(const TimingStats& st)
{
    std::string s = "metric,avg_us,std_us,min_us,max_us,samples\n";
    auto row = [&](std::string_view name, const MetricStats& m) {
        s += fmt::format("{},{:.3f},{:.3f},{:.3f},{:.3f},{}\n", name, m.avg, m.std, m.min, m.max,
                         st.sample_count);
    };
    row("T_period", st.period);
    row("T_jitter", st.jitter);
    row("T_exec", st.exec);
    return s;
}

std::string render_samples_csv(std::span<const TimingSample> samples)
{
    std::string s = "cycle_index,period_us,jitter_us,exec_us\n";
    s.reserve(s.size() + samples.size() * 40);
    for (const auto& x : samples) {
        s += fmt::format("{},{:.3f},{:.3f},{:.3f}\n", x.cycle_index, x.period_us, x.jitter_us,
                         x.exec_us);
    }
    return s;
}

double metric_value(const TimingSample& s, TimingMetric m)
{
    switch (m) {
    case TimingMetric::Period: return s.period_us;
    case TimingMetric::Jitter: return s.jitter_us;
    case TimingMetric::Exec: return s.exec_us;
    }
    return 0;
}

std::uint64_t Histogram::total() const
{
    std::uint64_t t = 0;
    for (auto c : counts) t += c;
    return t;
}

Histogram build_histogram(std::span<const double> values, double bin_width)
{
    if (!(bin_width > 0.0) || !std::isfinite(bin_width)) {
        throw std::invalid_argument("histogram bin width must be positive");
    }
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    std::size_t finite = 0;
    for (double v : values) {
        if (std::isfinite(v)) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            ++finite;
        }
    }
    if (finite == 0) {
        throw TimingError("histogram has no finite values to bin");
    }

    Histogram h;
    h.bin_width = bin_width;
    h.first_bin_start = std::floor(lo / bin_width) * bin_width;
    const auto bins = static_cast<std::size_t>(std::floor((hi - h.first_bin_start) / bin_width)) + 1;
    h.counts.assign(bins, 0);
    for (double v : values) {
        if (!std::isfinite(v)) continue;
        auto idx = static_cast<std::size_t>(std::floor((v - h.first_bin_start) / bin_width));
        h.counts[std::min(idx, bins - 1)] += 1;
    }
    return h;
}

std::string render_histogram_csv(const Histogram& h)
{
    std::string s = "bin_start_us,bin_end_us,count\n";
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
        const double start = h.first_bin_start + static_cast<double>(i) * h.bin_width;
        s += fmt::format("{:.3f},{:.3f},{}\n", start, start + h.bin_width, h.counts[i]);
    }
    return s;
}

std::string export_histogram(std::span<const TimingSample> samples, double bin_width_us,
                             TimingMetric metric)
{
    std::vector<double> values;
    values.reserve(samples.size());
    for (const auto& s : samples) {
        values.push_back(metric_value(s, metric));
    }
    return render_histogram_csv(build_histogram(values, bin_width_us));
}

}  // namespace ecatsim
