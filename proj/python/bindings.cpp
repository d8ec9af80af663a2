#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "ecatsim/app.hpp"
#include "ecatsim/codec.hpp"
#include "ecatsim/config.hpp"
#include "ecatsim/master.hpp"
#include "ecatsim/timing.hpp"

namespace py = pybind11;
using namespace ecatsim;

namespace {

py::bytes to_bytes(std::span<const std::uint8_t> b)
{
    return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
}

std::vector<std::uint8_t> from_bytes(const py::bytes& b)
{
    const std::string s = b;
    return {s.begin(), s.end()};
}

}  // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Simulated EtherCAT ring, cyclic master and CSV motion control";

    py::register_exception<CodecError>(m, "CodecError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<BusError>(m, "BusError", PyExc_RuntimeError);

    py::enum_<Command>(m, "Command")
        .value("APRD", Command::APRD)
        .value("APWR", Command::APWR)
        .value("FPRD", Command::FPRD)
        .value("FPWR", Command::FPWR)
        .value("BRD", Command::BRD)
        .value("LRD", Command::LRD)
        .value("LWR", Command::LWR)
        .value("LRW", Command::LRW);

    py::class_<Datagram>(m, "Datagram")
        .def(py::init([](Command cmd, std::uint32_t address, const py::bytes& payload,
                         std::uint8_t index, std::uint16_t wkc) {
                 auto p = from_bytes(payload);
                 Datagram d = Datagram::make(cmd, address, p.size(), index);
                 d.payload = std::move(p);
                 d.wkc = wkc;
                 return d;
             }),
             py::arg("command"), py::arg("address") = 0, py::arg("payload") = py::bytes(),
             py::arg("index") = 0, py::arg("wkc") = 0)
        .def_property_readonly("command", [](const Datagram& d) { return d.header.command; })
        .def_property_readonly("index", [](const Datagram& d) { return d.header.index; })
        .def_property_readonly("address", [](const Datagram& d) { return d.header.address; })
        .def_property_readonly("more", [](const Datagram& d) { return d.header.more; })
        .def_property_readonly("payload", [](const Datagram& d) { return to_bytes(d.payload); })
        .def_readwrite("wkc", &Datagram::wkc)
        .def("__eq__", [](const Datagram& a, const Datagram& b) {
            return a.header.command == b.header.command && a.header.index == b.header.index &&
                   a.header.address == b.header.address && a.payload == b.payload && a.wkc == b.wkc;
        });

    m.def("encode_frame", [](const std::vector<Datagram>& d) { return to_bytes(encode_frame(d)); });
    m.def("decode_frame", [](const py::bytes& b) { return decode_frame(from_bytes(b)); });

    py::class_<ServoRxPdo>(m, "ServoRxPdo")
        .def(py::init<>())
        .def_readwrite("controlword", &ServoRxPdo::controlword)
        .def_readwrite("target_position", &ServoRxPdo::target_position)
        .def_readwrite("target_velocity", &ServoRxPdo::target_velocity)
        .def_readwrite("mode_of_operation", &ServoRxPdo::mode_of_operation)
        .def_readwrite("torque_offset", &ServoRxPdo::torque_offset)
        .def("__eq__", [](const ServoRxPdo& a, const ServoRxPdo& b) { return a == b; });

    py::class_<ServoTxPdo>(m, "ServoTxPdo")
        .def(py::init<>())
        .def_readwrite("statusword", &ServoTxPdo::statusword)
        .def_readwrite("position_actual", &ServoTxPdo::position_actual)
        .def_readwrite("velocity_actual", &ServoTxPdo::velocity_actual)
        .def_readwrite("torque_actual", &ServoTxPdo::torque_actual)
        .def_readwrite("mode_display", &ServoTxPdo::mode_display)
        .def_readwrite("fault_code", &ServoTxPdo::fault_code)
        .def("__eq__", [](const ServoTxPdo& a, const ServoTxPdo& b) { return a == b; });

    m.def("pack_servo_rx", [](const ServoRxPdo& p) { return to_bytes(pack_servo_rx(p)); });
    m.def("pack_servo_tx", [](const ServoTxPdo& p) { return to_bytes(pack_servo_tx(p)); });
    m.def("unpack_servo_rx", [](const py::bytes& b) { return unpack_servo_rx(from_bytes(b)); });
    m.def("unpack_servo_tx", [](const py::bytes& b) { return unpack_servo_tx(from_bytes(b)); });

    py::enum_<Cia402State>(m, "Cia402State")
        .value("SwitchOnDisabled", Cia402State::SwitchOnDisabled)
        .value("ReadyToSwitchOn", Cia402State::ReadyToSwitchOn)
        .value("SwitchedOn", Cia402State::SwitchedOn)
        .value("OperationEnabled", Cia402State::OperationEnabled)
        .value("Fault", Cia402State::Fault);
    m.def("cia402_transition", &cia402_transition, py::arg("state"), py::arg("controlword"));

    py::enum_<AlState>(m, "AlState")
        .value("Init", AlState::Init)
        .value("PreOp", AlState::PreOp)
        .value("SafeOp", AlState::SafeOp)
        .value("Op", AlState::Op);

    py::class_<SlaveInfo>(m, "SlaveInfo")
        .def_readonly("ring_position", &SlaveInfo::ring_position)
        .def_readonly("station_address", &SlaveInfo::station_address)
        .def_readonly("al_state", &SlaveInfo::al_state)
        .def_readonly("rx_bytes", &SlaveInfo::rx_bytes)
        .def_readonly("tx_bytes", &SlaveInfo::tx_bytes)
        .def_property_readonly("kind", [](const SlaveInfo& s) -> std::string {
            const auto k = s.kind();
            return k ? std::string(to_string(*k)) : "unknown";
        });

    py::class_<Config>(m, "Config")
        .def(py::init<>())
        .def_readwrite("nominal_period_us", &Config::nominal_period_us)
        .def_readwrite("duration_s", &Config::duration_s)
        .def_readwrite("decimation", &Config::decimation)
        .def_readwrite("v_max", &Config::v_max)
        .def_readwrite("virtual_clock", &Config::virtual_clock)
        .def_readwrite("per_hop_latency_ns", &Config::per_hop_latency_ns)
        .def_property(
            "output_dir", [](const Config& c) { return c.output_dir.string(); },
            [](Config& c, const std::string& p) { c.output_dir = p; })
        .def_property_readonly("topology",
                               [](const Config& c) {
                                   std::vector<std::string> out;
                                   for (const auto& s : c.topology) out.emplace_back(to_string(s.kind));
                                   return out;
                               })
        .def("validate", &Config::validate);

    m.def("parse_config", [](const std::string& text) {
        std::istringstream in(text);
        return parse_config(in, "<string>");
    });

    m.def(
        "scan",
        [](const Config& c) {
            c.validate();
            Master master(Bus::from_kinds(c.slave_kinds()));
            return master.scan();
        },
        py::arg("config") = Config{}, "Scans the configured ring and returns one SlaveInfo per slave.");

    py::class_<MetricStats>(m, "MetricStats")
        .def_readonly("avg", &MetricStats::avg)
        .def_readonly("std", &MetricStats::std)
        .def_readonly("min", &MetricStats::min)
        .def_readonly("max", &MetricStats::max);

    py::class_<TimingStats>(m, "TimingStats")
        .def_readonly("period", &TimingStats::period)
        .def_readonly("jitter", &TimingStats::jitter)
        .def_readonly("exec", &TimingStats::exec)
        .def_readonly("sample_count", &TimingStats::sample_count);

    m.def(
        "stats_from_periods",
        [](const std::vector<double>& periods_us, double nominal_us) {
            std::vector<TimingSample> samples;
            std::int64_t t = 0;
            const auto nominal_ns = static_cast<std::int64_t>(std::llround(nominal_us * 1000));
            for (std::size_t i = 0; i < periods_us.size(); ++i) {
                const auto next = t + static_cast<std::int64_t>(std::llround(periods_us[i] * 1000));
                samples.push_back(make_timing_sample(i, t, next, next, next, nominal_ns));
                t = next;
            }
            return compute_stats(samples, nominal_us);
        },
        py::arg("periods_us"), py::arg("nominal_us") = 1000.0);

    m.def("render_report", &render_report);

    m.def(
        "run_bench",
        [](Config c) {
            std::ostringstream log;
            RunReport r;
            {
                py::gil_scoped_release release;
                r = execute_bench(c, log);
            }
            const auto stats = write_artifacts(c.output_dir, r.timing.samples,
                                               static_cast<double>(c.nominal_period_us),
                                               c.histogram_bin_us);
            py::dict out;
            out["cycles"] = r.timing.cycles;
            out["samples"] = r.timing.samples.size();
            out["stats"] = stats ? py::cast(*stats) : py::none();
            return out;
        },
        py::arg("config"), "Runs the timing benchmark and writes the report artifacts.");
}
