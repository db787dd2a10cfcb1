// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <algorithm>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "json.hpp"
#include "nutty/anim_assets.hpp"
#include "nutty/cli.hpp"
#include "nutty/embodiment.hpp"
#include "nutty/engine.hpp"
#include "nutty/io.hpp"
#include "nutty/nmf.hpp"
#include "nutty/validator.hpp"

using namespace nutty;
using nlohmann::json;

namespace {

std::string data(const std::string& rel) { return std::string(NUTTY_DATA_DIR) + "/" + rel; }

struct Outcome {
    bool pass = true;
    std::string detail;

    // Records the first failure only, so the detail names the root cause.
    void require(bool ok, const std::string& what) {
        if (!ok && pass) {
            pass = false;
            detail = what;
        }
    }
};

bool close_rel(double a, double b, double rel) { return std::abs(a - b) <= rel * std::max(1.0, std::abs(b)); }

std::string num(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

// Closed forms restated independently of the library.

double ref_hard(double x, double k) { return std::min(k, std::max(-k, x)); }
double ref_tanh(double x, double k) { return k / 2.0 * std::tanh(x / (k / 2.0)); }

double ref_omega(double v, double x, double lo, double hi, int beta) {
    const double alpha = (hi - lo) / 2.0;
    const bool toward = (x > lo + alpha && v > 0) || (x < lo + alpha && v < 0);
    return toward ? v * (1.0 - std::pow((x - lo - alpha) / alpha, 2 * beta)) : v;
}

double ref_stabilize(double v, double sigma, double rho) {
    rho = std::min(rho, nmf::kMaxResponsiveness);
    if (v == 0.0) return 0.0;
    return v * (std::tanh(std::pow(std::abs(v) / (1.0 - rho), 1.0 - sigma) - std::numbers::pi) + 1.0) / 2.0;
}

Outcome closed_form() {
    Outcome o;
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> u(0, 1);

    std::vector<std::pair<double, double>> limiter_points = {{25, 20}, {-25, 20}, {5, 20}, {0, 20}, {10, 20}, {600, 20}};
    while (limiter_points.size() < 24) limiter_points.push_back({(u(rng) - 0.5) * 200, 0.1 + 50 * u(rng)});
    for (const auto& [x, k] : limiter_points) {
        o.require(nmf::limit_hard(x, k) == ref_hard(x, k), "limiter_hard at " + num(x));
        o.require(close_rel(nmf::limit_tanh(x, k), ref_tanh(x, k), 1e-9), "limiter_tanh at " + num(x));
    }
    o.require(close_rel(nmf::limit_tanh(10, 20), 10 * std::tanh(1.0), 1e-9), "limiter_tanh(10, 20)");
    o.require(std::abs(nmf::limit_tanh(600, 20) - 10.0) < 1e-9, "limiter_tanh(600, 20)");

    struct OmegaPoint {
        double v, x, lo, hi;
        int beta;
    };
    std::vector<OmegaPoint> omega_points = {{2, 5, -10, 20, 5}, {2, 20, -10, 20, 5}, {-2, 20, -10, 20, 5},
                                            {2, 12.5, -10, 20, 5}, {2, 20, -10, 20, 1}};
    while (omega_points.size() < 24) {
        const double lo = -20 * u(rng), hi = 20 * u(rng) + 0.5;
        omega_points.push_back({(u(rng) - 0.5) * 40, lo + (hi - lo) * u(rng), lo, hi, 1 + static_cast<int>(6 * u(rng))});
    }
    for (const auto& p : omega_points) {
        const double got = nmf::omega(p.v, p.x, p.lo, p.hi, p.beta);
        o.require(close_rel(got, ref_omega(p.v, p.x, p.lo, p.hi, p.beta), 1e-9), "omega at v=" + num(p.v) + " x=" + num(p.x));
    }
    o.require(nmf::omega(2, 5, -10, 20, 5) == 2.0, "omega midpoint example");
    o.require(nmf::omega(2, 20, -10, 20, 5) == 0.0, "omega edge example");
    o.require(nmf::omega(-2, 20, -10, 20, 5) == -2.0, "omega moving-away example");
    o.require(close_rel(nmf::omega(2, 12.5, -10, 20, 5), 2 * (1 - std::pow(0.5, 10)), 1e-9), "omega 1.998047 example");

    struct StabPoint {
        double v, sigma, rho;
    };
    const double half_gain_v = std::pow(std::numbers::pi, 1 / 0.9);
    std::vector<StabPoint> stab_points = {{0, 0.5, 0.5}, {600, 0.1, 0}, {100, 1.0, 0.3}, {half_gain_v, 0.1, 0}, {3, 0.95, 1.0}};
    while (stab_points.size() < 24) stab_points.push_back({(u(rng) - 0.5) * 200, u(rng), u(rng)});
    for (const auto& p : stab_points) {
        o.require(close_rel(nmf::stabilize(p.v, p.sigma, p.rho), ref_stabilize(p.v, p.sigma, p.rho), 1e-9),
                  "stabilize at v=" + num(p.v));
    }
    o.require(nmf::stabilize(0, 0.3, 0.3) == 0.0, "stabilize at zero");
    o.require(std::abs(nmf::stabilize(600, 0.1, 0) - 600) < 600 * 1e-12, "stabilize gain near 1");
    o.require(close_rel(nmf::stabilize(100, 1.0, 0.7), 100 * (std::tanh(1 - std::numbers::pi) + 1) / 2, 1e-9),
              "stabilize with sigma 1");
    o.require(close_rel(nmf::stabilize(half_gain_v, 0.1, 0), half_gain_v / 2, 1e-9), "stabilize half gain");
    if (o.pass) o.detail = "24 points per function";
    return o;
}

nmf::FilterParams random_params(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0, 1);
    nmf::FilterParams p;
    p.smoothness = u(rng);
    p.responsiveness = u(rng);
    p.beta = 1 + static_cast<int>(5 * u(rng));
    p.p_min = -1 - 15 * u(rng);
    p.p_max = 1 + 15 * u(rng);
    p.velocity_limit = 0.5 + 60 * u(rng);
    p.acceleration_limit = 2 + 800 * u(rng);
    p.jerk_limit = 20 + 50000 * u(rng);
    p.stabilizer_enabled = u(rng) < 0.8;
    return p;
}

// Piecewise-constant streams with random hold lengths, bursts of noise and
// targets beyond the range.
std::vector<double> random_stream(std::mt19937_64& rng, std::size_t ticks) {
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<double> s;
    s.reserve(ticks);
    double target = 0;
    while (s.size() < ticks) {
        const double r = u(rng);
        target = r < 0.1 ? (u(rng) < 0.5 ? -1e3 : 1e3) : (u(rng) - 0.5) * 40;
        const auto hold = 1 + static_cast<std::size_t>(u(rng) * (u(rng) < 0.3 ? 3 : 120));
        const bool noisy = u(rng) < 0.2;
        for (std::size_t i = 0; i < hold && s.size() < ticks; ++i) s.push_back(noisy ? target + (u(rng) - 0.5) * 5 : target);
    }
    return s;
}

Outcome bound_fuzzing() {
    Outcome o;
    std::mt19937_64 rng(102);
    std::vector<nmf::FilterParams> sets;
    for (int i = 0; i < 5; ++i) sets.push_back(random_params(rng));
    std::size_t runs = 0, steps = 0;
    for (int stream = 0; stream < 1000 && o.pass; ++stream) {
        const auto s = random_stream(rng, 600);
        for (auto order : {nmf::Order::C1, nmf::Order::C2, nmf::Order::C3}) {
            for (auto limiter : {nmf::Limiter::Tanh, nmf::Limiter::Hard}) {
                for (auto p : sets) {
                    p.order = order;
                    p.limiter = limiter;
                    auto state = nmf::FilterState::at_rest(p, std::clamp(s.front(), p.p_min, p.p_max));
                    for (double target : s) {
                        const auto out = nmf::step(state, target);
                        ++steps;
                        if (out.x < p.p_min || out.x > p.p_max) o.require(false, "position " + num(out.x));
                        if (std::abs(out.v) > p.velocity_limit) o.require(false, "velocity " + num(out.v) + " over " + num(p.velocity_limit) + " by " + num(std::abs(out.v) - p.velocity_limit));
                        if (order != nmf::Order::C1 && std::abs(out.a) > p.acceleration_limit)
                            o.require(false, "acceleration " + num(out.a));
                        if (order == nmf::Order::C3 && std::abs(out.applied_jerk) > p.jerk_limit)
                            o.require(false, "applied jerk " + num(out.applied_jerk));
                    }
                    ++runs;
                }
            }
        }
    }
    if (o.pass) o.detail = std::to_string(runs) + " runs, " + std::to_string(steps) + " steps, 0 violations";
    return o;
}

Outcome rest_stability() {
    Outcome o;
    std::mt19937_64 rng(103);
    std::uniform_real_distribution<double> u(0, 1);
    for (int i = 0; i < 100; ++i) {
        auto p = random_params(rng);
        p.order = static_cast<nmf::Order>(1 + i % 3);
        p.limiter = i % 2 ? nmf::Limiter::Hard : nmf::Limiter::Tanh;
        const double x = p.p_min + (p.p_max - p.p_min) * u(rng);
        auto state = nmf::FilterState::at_rest(p, x);
        for (int k = 0; k < 600; ++k) {
            const auto out = nmf::step(state, x);
            if (!(out.x == x && out.v == 0 && out.a == 0 && out.j == 0 && state.x == x && state.v == 0 && state.a == 0))
                o.require(false, "set " + std::to_string(i) + " drifted at tick " + std::to_string(k));
        }
    }
    if (o.pass) o.detail = "100 parameter sets x 600 ticks bit-identical";
    return o;
}

ResponseMetrics shape(const char* preset) {
    const auto params = *nmf::filter_preset(preset);
    const auto input = nmf::make_input(nmf::InputPreset::Linear, params.p_min, params.p_max, 0);
    const auto out = nmf::run(params, 5.0, input, 7.5);
    return measure_response(out, {5.0, -5.0, 2.5}, 7.5);
}

Outcome shape_suite() {
    Outcome o;
    const auto a = shape("X3A"), an = shape("X3An"), b = shape("X3B"), c = shape("X3C"), d = shape("X3D");
    const auto x2a = shape("X2A"), x1a = shape("X1A");
    o.require(a.overshoot_fraction < 0.01, "X3A overshoot " + num(a.overshoot_fraction));
    o.require(a.settle_time > d.settle_time, "X3A settles no slower than X3D");
    o.require(b.overshoot_fraction > 0 && b.overshoot_fraction <= 0.15, "X3B overshoot " + num(b.overshoot_fraction));
    o.require(c.oscillation_count >= 1, "X3C oscillations " + std::to_string(c.oscillation_count));
    o.require(d.overshoot_fraction < 0.05, "X3D overshoot " + num(d.overshoot_fraction));
    o.require(an.peak_velocity > a.peak_velocity, "X3An peak " + num(an.peak_velocity));
    o.require(x1a.sustained_velocity > x2a.sustained_velocity && x2a.sustained_velocity > a.sustained_velocity,
              "sustained velocity ordering");
    if (o.pass) {
        o.detail = "X3B overshoot " + num(b.overshoot_fraction) + ", X3C oscillations " + std::to_string(c.oscillation_count) +
                   ", X3D settle " + num(d.settle_time) + " s, sustained X1A/X2A/X3A " + num(x1a.sustained_velocity) + "/" +
                   num(x2a.sustained_velocity) + "/" + num(a.sustained_velocity);
    }
    return o;
}

Outcome regular_contrast() {
    Outcome o;
    const auto w = shape("W3n"), a = shape("X3A");
    o.require(w.oscillation_count > a.oscillation_count, "W3n oscillations " + std::to_string(w.oscillation_count));
    if (o.pass) o.detail = "W3n " + std::to_string(w.oscillation_count) + " vs X3A " + std::to_string(a.oscillation_count);
    return o;
}

// Dense Hermite oracle in Bernstein form with the tangent rules restated.
std::pair<double, double> oracle_tangents(const std::vector<Keyframe>& k, std::size_t i) {
    const bool first = i == 0, last = i + 1 == k.size();
    auto chord = [&](std::size_t a, std::size_t b) { return (k[b].value - k[a].value) / (k[b].time - k[a].time); };
    switch (k[i].mode) {
        case TangentMode::Custom: return {*k[i].in_tangent, *k[i].out_tangent};
        case TangentMode::Linear:
            if (first && last) return {0, 0};
            return {first ? chord(0, 1) : chord(i - 1, i), last ? chord(i - 1, i) : chord(i, i + 1)};
        case TangentMode::Smooth:
            if (first || last) return {0, 0};
            return {chord(i - 1, i + 1), chord(i - 1, i + 1)};
    }
    return {0, 0};
}

double oracle_sample(const std::vector<Keyframe>& k, double t) {
    if (t <= k.front().time) return k.front().value;
    if (t >= k.back().time) return k.back().value;
    std::size_t i = 0;
    while (k[i + 1].time <= t) ++i;
    const double h = k[i + 1].time - k[i].time;
    const double s = (t - k[i].time) / h, r = 1 - s;
    const double b0 = k[i].value, b3 = k[i + 1].value;
    const double b1 = b0 + oracle_tangents(k, i).second * h / 3, b2 = b3 - oracle_tangents(k, i + 1).first * h / 3;
    return r * r * r * b0 + 3 * r * r * s * b1 + 3 * r * s * s * b2 + s * s * s * b3;
}

Curve random_curve(std::mt19937_64& rng, bool linear_only) {
    std::uniform_real_distribution<double> u(0, 1);
    Curve c{"joint", {}};
    const int n = 2 + static_cast<int>(5 * u(rng));
    double t = u(rng);
    for (int i = 0; i < n; ++i) {
        Keyframe key{t, (u(rng) - 0.5) * 100, TangentMode::Linear, {}, {}};
        const double r = u(rng);
        if (!linear_only && r < 0.66) {
            key.mode = r < 0.33 ? TangentMode::Smooth : TangentMode::Custom;
            if (key.mode == TangentMode::Custom) {
                key.in_tangent = (u(rng) - 0.5) * 300;
                key.out_tangent = (u(rng) - 0.5) * 300;
            }
        }
        c.keys.push_back(key);
        t += 0.05 + u(rng);
    }
    return c;
}

Outcome curve_oracle() {
    Outcome o;
    std::mt19937_64 rng(104);
    std::size_t samples = 0;
    double worst = 0, worst_linear = 0;
    for (int n = 0; n < 100; ++n) {
        const Curve c = random_curve(rng, false);
        const double t0 = c.keys.front().time - 0.1, t1 = c.keys.back().time + 0.1;
        const auto count = static_cast<std::size_t>((t1 - t0) / 1e-4);
        for (std::size_t i = 0; i <= count; ++i) {
            const double t = t0 + static_cast<double>(i) * 1e-4;
            worst = std::max(worst, std::abs(sample_curve(c, t) - oracle_sample(c.keys, t)));
            ++samples;
        }
    }
    for (int n = 0; n < 100; ++n) {
        const Curve c = random_curve(rng, true);
        const auto& k = c.keys;
        const auto count = static_cast<std::size_t>((k.back().time - k.front().time) / 1e-4);
        for (std::size_t i = 0; i <= count; ++i) {
            const double t = k.front().time + static_cast<double>(i) * 1e-4;
            std::size_t j = 0;
            while (j + 2 < k.size() && k[j + 1].time <= t) ++j;
            const double lerp = k[j].value + (k[j + 1].value - k[j].value) * (t - k[j].time) / (k[j + 1].time - k[j].time);
            worst_linear = std::max(worst_linear, std::abs(sample_curve(c, t) - lerp));
        }
    }
    o.require(worst <= 1e-9, "max Hermite deviation " + num(worst));
    o.require(worst_linear <= 1e-12, "max linear deviation " + num(worst_linear));
    if (o.pass) o.detail = std::to_string(samples) + " samples, max deviation " + num(worst) + ", linear " + num(worst_linear);
    return o;
}

// A clip of one-frame jumps on a few joints of the embodiment.
AnimationClip stepped_clip(std::mt19937_64& rng, const EmbodimentSpec& spec, double rate) {
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<const DoFDescriptor*> joints;
    for (const auto& d : spec.dofs()) {
        if (d.continuous() && d.limits.velocity) joints.push_back(&d);
    }
    AnimationClip clip;
    clip.name = "stepped";
    clip.duration = 4.0;
    const auto channels = 1 + static_cast<std::size_t>(3 * u(rng));
    for (std::size_t c = 0; c < channels; ++c) {
        const auto& dof = *joints[static_cast<std::size_t>(u(rng) * static_cast<double>(joints.size()))];
        if (std::any_of(clip.curves.begin(), clip.curves.end(), [&](const Curve& x) { return x.dof == dof.name; })) continue;
        Curve curve{dof.name, {}};
        double value = dof.min + (dof.max - dof.min) * u(rng);
        curve.keys.push_back({0.0, value, TangentMode::Linear, {}, {}});
        int frame = 0;
        while (true) {
            frame += 10 + static_cast<int>(50 * u(rng));
            if (frame + 1 >= static_cast<int>(clip.duration * rate)) break;
            curve.keys.push_back({frame / rate, value, TangentMode::Linear, {}, {}});
            // At least a third of the range in one frame.
            const double next = dof.min + (dof.max - dof.min) * u(rng);
            value = std::abs(next - value) < (dof.max - dof.min) / 3 ? (value < (dof.min + dof.max) / 2 ? dof.max : dof.min)
                                                                     : next;
            curve.keys.push_back({(frame + 1) / rate, value, TangentMode::Linear, {}, {}});
        }
        curve.keys.push_back({clip.duration, value, TangentMode::Linear, {}, {}});
        clip.curves.push_back(std::move(curve));
    }
    return clip;
}

Outcome ghost_composition() {
    Outcome o;
    const auto spec = load_embodiment_file(data("embodiments/nao_h25.json"));
    std::mt19937_64 rng(105);
    std::size_t before = 0;
    for (int n = 0; n < 50; ++n) {
        const auto clip = stepped_clip(rng, spec, 60.0);
        validate(clip, spec);
        const auto trajectory = sample_trajectory(clip, 60.0);
        const auto found = check_trajectory(trajectory, spec);
        o.require(!found.empty(), "clip " + std::to_string(n) + " had no violations to correct");
        before += found.size();
        const auto report = ghost(trajectory, spec);
        o.require(report.residual_violations.empty(),
                  "clip " + std::to_string(n) + ": " + std::to_string(report.residual_violations.size()) + " residual");
        o.require(check_trajectory(report.corrected, spec).empty(), "corrected trajectory rechecks dirty");
        for (const auto& channel : report.channels) {
            const auto back = parse_outputs_csv(outputs_to_csv(channel.samples));
            bool same = back.size() == channel.samples.size();
            for (std::size_t i = 0; same && i < back.size(); ++i) {
                const auto& a = back[i];
                const auto& b = channel.samples[i];
                same = a.t == b.t && a.x == b.x && a.v == b.v && a.a == b.a && a.j == b.j;
            }
            o.require(same, "CSV export of " + channel.dof + " is lossy");
        }
    }
    if (o.pass) o.detail = "50 clips, " + std::to_string(before) + " violations before, 0 after";
    return o;
}

std::string read(const std::string& path) { return read_text_file(path); }

Outcome engine_checks() {
    Outcome o;
    const auto spec = load_embodiment_file(data("embodiments/nao_h25.json"));
    ClipLibrary lib;
    for (const char* name : {"wave", "sway"}) lib.add(load_clip_file(data(std::string("clips/") + name + ".json")));
    const auto text = read(data("programs/wave_level3.json"));
    Engine a(compile_program(text, spec, lib), spec);
    Engine b(compile_program(text, spec, lib), spec);
    for (int k = 0; k < 600; ++k) {
        EngineInputs in;
        if (k == 150) in.reals["wave_speed"] = 1.7;
        if (k == 400) in.commands.push_back("wave_speed:0.5");
        const auto& fa = a.tick(in, 1.0 / 60.0);
        const auto& fb = b.tick(in, 1.0 / 60.0);
        o.require(fa == fb, "streams diverge at tick " + std::to_string(k));
        o.require(fa.channels.size() == spec.size(), "frame misses DoFs");
        for (std::size_t i = 0; i < spec.size(); ++i) {
            const bool is_continuous = std::holds_alternative<ContinuousValue>(fa.channels[i]);
            o.require(is_continuous == spec.dofs()[i].continuous(), "channel kind mismatch on " + spec.dofs()[i].name);
        }
    }

    const auto trace = (std::filesystem::temp_directory_path() / ("nutty-acceptance-" + std::to_string(::getpid()) + ".jsonl")).string();
    std::ostringstream out, err;
    const int run = run_cli({"run", "--program", data("programs/wave_level3.json"), "--embodiment",
                             data("embodiments/nao_h25.json"), "--clips", data("clips"), "--duration", "10", "--out", trace},
                            out, err);
    o.require(run == kExitOk, "run exited " + std::to_string(run) + ": " + err.str());
    std::ostringstream vout, verr;
    const int check = run_cli({"validate", "--trace", trace, "--embodiment", data("embodiments/nao_h25.json")}, vout, verr);
    std::filesystem::remove(trace);
    o.require(check == kExitOk, "validate exited " + std::to_string(check));
    if (o.pass) o.detail = "600 identical frames, full coverage, level-3 trace validates clean";
    return o;
}

Outcome kinematronics() {
    Outcome o;
    const auto p = profile(load_embodiment_file(data("embodiments/nao_h25.json")));
    o.require(p == KinematronicsProfile{25, 3, 5, 2}, "profile differs");
    o.detail = "{" + std::to_string(p.stationary) + ", " + std::to_string(p.spatial) + ", " + std::to_string(p.display) +
               ", " + std::to_string(p.audible) + "}";
    return o;
}

Outcome performance() {
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    std::ostringstream out, err;
    const int code = run_cli({"run", "--program", data("programs/wave_level3.json"), "--embodiment",
                              data("embodiments/nao_h25.json"), "--clips", data("clips"), "--duration", "10"},
                             out, err);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    o.require(code == kExitOk, "run failed: " + err.str());
    o.require(seconds < 1.0, "took " + num(seconds) + " s");
    if (o.pass) o.detail = "10 s of frames in " + num(seconds) + " s (" + num(10.0 / seconds) + "x real time)";
    return o;
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<Outcome()> check;
        double budget_seconds;  // 0 when the criterion sets no time limit
    };
    const std::vector<Criterion> criteria = {
        {"closed-form unit checks", closed_form, 1.0},
        {"bound fuzzing", bound_fuzzing, 30.0},
        {"rest stability", rest_stability, 0.0},
        {"shape suite", shape_suite, 5.0},
        {"regular-filter contrast", regular_contrast, 0.0},
        {"curve oracle", curve_oracle, 0.0},
        {"ghost composition", ghost_composition, 0.0},
        {"engine determinism and coverage", engine_checks, 0.0},
        {"kinematronics", kinematronics, 0.0},
        {"performance", performance, 0.0},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = c.check();
        } catch (const std::exception& e) {
            outcome = {false, std::string("threw: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (c.budget_seconds > 0 && seconds >= c.budget_seconds) outcome = {false, "took " + num(seconds) + " s"};
        if (!outcome.pass) ++failed;
        std::printf("%s  %s: %s [%.3f s]\n", outcome.pass ? "PASS" : "FAIL", c.name, outcome.detail.c_str(), seconds);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
