#include <pybind11/pybind11.h>
#include <pybind11/operators.h>
#include <pybind11/stl.h>

#include <sstream>

#include "nutty/cli.hpp"
#include "nutty/error.hpp"
#include "nutty/nmf.hpp"
#include "nutty/service.hpp"
#include "nutty/validator.hpp"

namespace py = pybind11;
using namespace nutty;

namespace {

std::vector<nmf::SetPoint> to_set_points(const std::vector<std::pair<double, double>>& pairs) {
    std::vector<nmf::SetPoint> out;
    out.reserve(pairs.size());
    for (const auto& [t, value] : pairs) out.push_back({t, value});
    return out;
}

}  // namespace

PYBIND11_MODULE(_nutty, m) {
    m.doc() = "Motion filtering, validation and the command line for nutty";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);

    py::enum_<nmf::Order>(m, "Order").value("C1", nmf::Order::C1).value("C2", nmf::Order::C2).value("C3", nmf::Order::C3);
    py::enum_<nmf::Limiter>(m, "Limiter").value("Tanh", nmf::Limiter::Tanh).value("Hard", nmf::Limiter::Hard);

    py::class_<nmf::FilterParams>(m, "FilterParams")
        .def(py::init<>())
        .def_readwrite("order", &nmf::FilterParams::order)
        .def_readwrite("limiter", &nmf::FilterParams::limiter)
        .def_readwrite("smoothness", &nmf::FilterParams::smoothness)
        .def_readwrite("responsiveness", &nmf::FilterParams::responsiveness)
        .def_readwrite("beta", &nmf::FilterParams::beta)
        .def_readwrite("p_min", &nmf::FilterParams::p_min)
        .def_readwrite("p_max", &nmf::FilterParams::p_max)
        .def_readwrite("velocity_limit", &nmf::FilterParams::velocity_limit)
        .def_readwrite("acceleration_limit", &nmf::FilterParams::acceleration_limit)
        .def_readwrite("jerk_limit", &nmf::FilterParams::jerk_limit)
        .def_readwrite("sample_rate", &nmf::FilterParams::sample_rate)
        .def_readwrite("stabilizer_enabled", &nmf::FilterParams::stabilizer_enabled)
        .def_property_readonly("dt", &nmf::FilterParams::dt)
        .def("validate", &nmf::FilterParams::validate)
        .def(py::self == py::self);

    py::class_<nmf::FilterOutput>(m, "FilterOutput")
        .def_readonly("t", &nmf::FilterOutput::t)
        .def_readonly("x", &nmf::FilterOutput::x)
        .def_readonly("v", &nmf::FilterOutput::v)
        .def_readonly("a", &nmf::FilterOutput::a)
        .def_readonly("j", &nmf::FilterOutput::j)
        .def_readonly("applied_jerk", &nmf::FilterOutput::applied_jerk);

    py::class_<nmf::MotionFilter>(m, "MotionFilter")
        .def(py::init([](const nmf::FilterParams& params, double x0) {
                 params.validate();
                 return nmf::MotionFilter(params, x0);
             }),
             py::arg("params"), py::arg("x0") = 0.0)
        .def("step", &nmf::MotionFilter::step, py::arg("set_point"))
        .def("set_params", &nmf::MotionFilter::set_params)
        .def("reset", &nmf::MotionFilter::reset, py::arg("x0"))
        .def_property_readonly("params", &nmf::MotionFilter::params)
        .def_property_readonly("x", [](const nmf::MotionFilter& f) { return f.state().x; })
        .def_property_readonly("v", [](const nmf::MotionFilter& f) { return f.state().v; })
        .def_property_readonly("a", [](const nmf::MotionFilter& f) { return f.state().a; })
        .def_property_readonly("t", [](const nmf::MotionFilter& f) { return f.state().t; });

    m.def("filter_preset", &nmf::filter_preset, py::arg("name"));
    m.def("filter_preset_names", &nmf::filter_preset_names);
    m.def("limit_hard", &nmf::limit_hard);
    m.def("limit_tanh", &nmf::limit_tanh);
    m.def("omega", py::overload_cast<double, double, double, double, int>(&nmf::omega), py::arg("v_in"),
          py::arg("x"), py::arg("p_min"), py::arg("p_max"), py::arg("beta"));
    m.def("stabilize", &nmf::stabilize, py::arg("v"), py::arg("smoothness"), py::arg("responsiveness"));
    m.def(
        "run",
        [](const nmf::FilterParams& params, double x0, const std::vector<std::pair<double, double>>& set_points,
           double duration) { return nmf::run(params, x0, to_set_points(set_points), duration); },
        py::arg("params"), py::arg("x0"), py::arg("set_points"), py::arg("duration"),
        "Fixed-rate run over (t, value) set-points with zero-order hold.");

    py::class_<StepChange>(m, "StepChange")
        .def(py::init<double, double, double>(), py::arg("from_"), py::arg("to"), py::arg("at"));
    py::class_<ResponseMetrics>(m, "ResponseMetrics")
        .def_readonly("overshoot_fraction", &ResponseMetrics::overshoot_fraction)
        .def_readonly("settle_time", &ResponseMetrics::settle_time)
        .def_readonly("oscillation_count", &ResponseMetrics::oscillation_count)
        .def_readonly("sustained_velocity", &ResponseMetrics::sustained_velocity)
        .def_readonly("peak_velocity", &ResponseMetrics::peak_velocity);
    m.def(
        "measure_response",
        [](const std::vector<nmf::FilterOutput>& outputs, const StepChange& step, std::optional<double> until) {
            return measure_response(outputs, step, until);
        },
        py::arg("outputs"), py::arg("step"), py::arg("until") = py::none());

    py::class_<Session>(m, "Session")
        .def(py::init<double>(), py::arg("rate") = 60.0)
        .def("handle", &Session::handle, py::arg("line"), "Applies one message; returns an error line or None.")
        .def("tick", &Session::tick, "Advances one frame and returns it as a JSON line.");

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            const int code = run_cli(args, out, err);
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs the command line in process; returns (exit_code, stdout, stderr).");
}
