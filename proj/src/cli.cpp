#include "nutty/cli.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <system_error>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "nutty/error.hpp"
#include "nutty/io.hpp"
#include "nutty/service.hpp"

namespace nutty {

namespace {

/// Bad flag values that CLI11 cannot see, such as an unknown preset name.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

// Preset name, or a path to a filter-params JSON file.
nmf::FilterParams resolve_params(const std::string& value) {
    if (auto preset = nmf::filter_preset(value)) return *preset;
    if (std::filesystem::is_regular_file(value)) return parse_filter_params(read_text_file(value));
    throw UsageError("--params: '" + value + "' is neither a preset nor a readable file");
}

// Writes to `path`, or to `out` when the path is "-".
void emit(const std::string& path, std::ostream& out, const std::string& text) {
    if (path == "-") {
        out << text;
    } else {
        write_text_file(path, text);
    }
}

ClipLibrary load_clips(const std::vector<std::string>& paths) {
    ClipLibrary library;
    for (const auto& path : paths) {
        if (std::filesystem::is_directory(path)) {
            std::vector<std::filesystem::path> files;
            for (const auto& entry : std::filesystem::directory_iterator(path)) {
                if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
            }
            std::sort(files.begin(), files.end());
            for (const auto& f : files) library.add(load_clip_file(f.string()));
        } else {
            library.add(load_clip_file(path));
        }
    }
    return library;
}

std::vector<AnimationFrame> load_trace(const std::string& path, const EmbodimentSpec& spec) {
    std::istringstream in(read_text_file(path));
    std::vector<AnimationFrame> frames;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        frames.push_back(frame_from_json(line, spec));
    }
    return frames;
}

int cmd_filter(const std::string& params_arg, const std::string& input, std::optional<double> rate,
               std::optional<double> duration, std::uint64_t seed, const std::string& out_path, std::ostream& out) {
    nmf::FilterParams params = resolve_params(params_arg);
    if (rate) params.sample_rate = *rate;
    params.validate();

    std::vector<nmf::SetPoint> set_points;
    if (const auto preset = nmf::input_preset(input)) {
        set_points = nmf::make_input(*preset, params.p_min, params.p_max, seed);
    } else if (std::filesystem::is_regular_file(input)) {
        set_points = parse_set_points_csv(read_text_file(input));
    } else {
        throw UsageError("--input: '" + input + "' is neither an input preset nor a readable file");
    }
    const double length = duration.value_or(std::max(set_points.back().t, 10.0));
    const double x0 = std::min(params.p_max, std::max(params.p_min, set_points.front().value));
    const auto outputs = nmf::run(params, x0, set_points, length);
    emit(out_path, out, outputs_to_csv(outputs));
    return kExitOk;
}

struct ClipTarget {
    std::string clip, trace, embodiment;
    double rate = 60.0;
};

Trajectory load_target(const ClipTarget& target, const EmbodimentSpec& spec) {
    if (!target.trace.empty()) return trajectory_from_frames(load_trace(target.trace, spec), spec);
    const AnimationClip clip = load_clip_file(target.clip);
    validate(clip, spec);
    return sample_trajectory(clip, target.rate);
}

int cmd_validate(const ClipTarget& target, const std::string& out_path, std::ostream& out) {
    const EmbodimentSpec spec = load_embodiment_file(target.embodiment);
    const auto violations = check_trajectory(load_target(target, spec), spec);
    emit(out_path, out, violation_report(violations));
    return violations.empty() ? kExitOk : kExitViolations;
}

int cmd_ghost(const ClipTarget& target, const std::optional<std::string>& params_arg, const std::string& out_dir,
              std::ostream& out) {
    const EmbodimentSpec spec = load_embodiment_file(target.embodiment);
    const Trajectory trajectory = load_target(target, spec);
    std::map<std::string, nmf::FilterParams> character;
    if (params_arg) {
        const nmf::FilterParams p = resolve_params(*params_arg);
        for (const auto& s : trajectory.series) character[s.dof] = p;
    }
    const GhostReport report = ghost(trajectory, spec, character);

    nlohmann::json doc = {{"channels", nlohmann::json::array()}, {"residual_violations", report.residual_violations.size()}};
    for (const auto& c : report.channels) {
        doc["channels"].push_back({{"dof", c.dof}, {"order", static_cast<int>(c.params.order)}, {"max_deviation", c.max_deviation}});
    }
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        for (const auto& c : report.channels) {
            write_text_file((std::filesystem::path(out_dir) / (c.dof + ".csv")).string(), outputs_to_csv(c.samples));
        }
        write_text_file((std::filesystem::path(out_dir) / "violations.jsonl").string(),
                        violation_report(report.residual_violations));
    }
    out << doc.dump() << '\n';
    return report.residual_violations.empty() ? kExitOk : kExitViolations;
}

struct RunArgs {
    std::string program, embodiment, inputs, out = "-";
    std::vector<std::string> clips;
    double rate = 60.0;
    double duration = 10.0;
};

int cmd_run(const RunArgs& args, std::ostream& out, std::ostream& err) {
    if (!(args.rate > 0.0) || !(args.duration >= 0.0)) throw UsageError("--rate and --duration must be positive");
    const EmbodimentSpec spec = load_embodiment_file(args.embodiment);
    const ClipLibrary clips = load_clips(args.clips);
    Engine engine(compile_program(read_text_file(args.program), spec, clips), spec);
    engine.set_logger([&err](const std::string& message) { err << message << '\n'; });
    std::vector<TimedInputs> script;
    if (!args.inputs.empty()) script = load_input_script(read_text_file(args.inputs));

    std::ofstream file;
    if (args.out != "-") {
        file.open(args.out, std::ios::binary);
        if (!file) throw ParseError("cannot write '" + args.out + "'");
    }
    JsonLineSink sink(args.out == "-" ? out : file);
    const double dt = 1.0 / args.rate;
    const auto ticks = static_cast<std::size_t>(std::llround(args.duration * args.rate));
    std::size_t next = 0;
    for (std::size_t i = 0; i < ticks; ++i) {
        // Inputs stamped up to the start of this tick are delivered with it.
        const double start = static_cast<double>(i) * dt;
        EngineInputs inputs;
        while (next < script.size() && script[next].t <= start + 1e-9 * dt) inputs.merge(script[next++].inputs);
        sink.write(engine.tick(inputs, dt), spec);
    }
    return kExitOk;
}

int cmd_serve(const std::string& host, int port, double rate, std::ostream& out) {
    if (port < 0 || port > 65535) throw UsageError("--port must lie in [0, 65535]");
    SessionServer server(host, static_cast<std::uint16_t>(port), rate);
    const auto bound = server.start();
    out << "listening on " << host << ":" << bound << std::endl;
    g_interrupted = false;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server.stop();
    return kExitOk;
}

}  // namespace

Trajectory trajectory_from_frames(const std::vector<AnimationFrame>& frames, const EmbodimentSpec& spec) {
    Trajectory t;
    if (frames.empty()) return t;
    t.dt = frames.front().delta_time;
    t.t0 = frames.front().time;
    for (std::size_t i = 0; i < spec.size(); ++i) {
        if (!spec.dofs()[i].continuous()) continue;
        DofSeries s{spec.dofs()[i].name, {}};
        s.values.reserve(frames.size());
        for (const auto& f : frames) {
            if (std::abs(f.delta_time - t.dt) > 1e-9 * t.dt) throw ValidationError("frames do not share one dt");
            s.values.push_back(std::get<ContinuousValue>(f.channels.at(i)).position);
        }
        t.series.push_back(std::move(s));
    }
    return t;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Motion filtering, clip validation and animation programs for expressive robots", "nutty"};
    app.require_subcommand(1);

    std::string params_arg, input, out_path = "-";
    std::optional<double> rate_opt, duration_opt;
    std::uint64_t seed = 0;
    auto* filter = app.add_subcommand("filter", "Run a motion filter over a set-point stream, writing t,x,v,a,j CSV");
    filter->add_option("--params", params_arg, "Preset name (X3D, W3n, ...) or filter-params JSON file")->required();
    filter->add_option("--input", input, "phi_l, phi_r, phi_c or a t,s CSV file")->required();
    filter->add_option("--rate", rate_opt, "Sample rate in Hz (default: the params' own rate)");
    filter->add_option("--duration", duration_opt, "Seconds to run (default: 10 or the input length)");
    filter->add_option("--seed", seed, "Seed for phi_r");
    filter->add_option("--out", out_path, "Output CSV path, - for stdout");

    ClipTarget target;
    std::string report_path = "-";
    auto* validate_cmd = app.add_subcommand("validate", "Report samples that break the embodiment's limits");
    auto* ghost_cmd = app.add_subcommand("ghost", "Write the limit-compliant ghost of a clip");
    std::optional<std::string> ghost_params;
    std::string out_dir;
    for (auto* cmd : {validate_cmd, ghost_cmd}) {
        auto* clip = cmd->add_option("--clip", target.clip, "Clip JSON file");
        auto* trace = cmd->add_option("--trace", target.trace, "Frame trace (JSON lines from run)");
        clip->excludes(trace);
        cmd->add_option("--embodiment", target.embodiment, "Embodiment JSON file")->required();
        cmd->add_option("--rate", target.rate, "Sampling rate for clips in Hz")->check(CLI::PositiveNumber);
    }
    validate_cmd->add_option("--out", report_path, "Report path, - for stdout");
    ghost_cmd->add_option("--params", ghost_params, "Filter character: preset name or params file");
    ghost_cmd->add_option("--out-dir", out_dir, "Directory for per-DoF CSVs and the residual report");

    RunArgs run_args;
    auto* run_cmd = app.add_subcommand("run", "Execute an animation program, one frame JSON line per tick");
    run_cmd->add_option("--program", run_args.program, "Program JSON file")->required();
    run_cmd->add_option("--embodiment", run_args.embodiment, "Embodiment JSON file")->required();
    run_cmd->add_option("--clips", run_args.clips, "Clip files or directories");
    run_cmd->add_option("--rate", run_args.rate, "Tick rate in Hz");
    run_cmd->add_option("--duration", run_args.duration, "Seconds to run");
    run_cmd->add_option("--inputs", run_args.inputs, "Scripted inputs (JSON lines)");
    run_cmd->add_option("--out", run_args.out, "Output path, - for stdout");

    std::string host = "127.0.0.1";
    int port = 8765;
    double serve_rate = 60.0;
    auto* serve_cmd = app.add_subcommand("serve", "Serve live filter sessions over newline-delimited JSON/TCP");
    serve_cmd->add_option("--port", port, "TCP port (0 picks a free one)");
    serve_cmd->add_option("--rate", serve_rate, "Frame rate in Hz")->check(CLI::PositiveNumber);
    serve_cmd->add_option("--host", host, "Bind address");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*filter) return cmd_filter(params_arg, input, rate_opt, duration_opt, seed, out_path, out);
        if (*validate_cmd || *ghost_cmd) {
            if (target.clip.empty() == target.trace.empty()) throw UsageError("exactly one of --clip or --trace is required");
            if (*validate_cmd) return cmd_validate(target, report_path, out);
            return cmd_ghost(target, ghost_params, out_dir, out);
        }
        if (*run_cmd) return cmd_run(run_args, out, err);
        if (*serve_cmd) return cmd_serve(host, port, serve_rate, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::system_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitEnvironment;
    } catch (const CompileError& e) {
        err << "compile error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::runtime_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::logic_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}

}  // namespace nutty
