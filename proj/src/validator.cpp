#include "nutty/validator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"
#include "nutty/error.hpp"

namespace nutty {

namespace {

// Forward differences carry a few ulps of rounding, so a ramp sitting exactly
// on a limit must not be flagged.
constexpr double kRoundingAllowance = 1e-9;

bool exceeds(double actual, double limit) { return std::abs(actual) > limit * (1.0 + kRoundingAllowance); }

std::vector<double> difference(const std::vector<double>& x, double dt) {
    std::vector<double> d;
    if (x.size() < 2) return d;
    d.reserve(x.size() - 1);
    for (std::size_t i = 0; i + 1 < x.size(); ++i) d.push_back((x[i + 1] - x[i]) / dt);
    return d;
}

void check_series(const Trajectory& trajectory, const DofSeries& series, const DoFDescriptor& dof,
                  std::vector<Violation>& out) {
    const auto& x = series.values;
    const double slack = kRoundingAllowance * (dof.max - dof.min);
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] < dof.min - slack) out.push_back({dof.name, i, trajectory.time(i), ViolationKind::Position, x[i], dof.min});
        if (x[i] > dof.max + slack) out.push_back({dof.name, i, trajectory.time(i), ViolationKind::Position, x[i], dof.max});
    }
    const std::vector<double> v = difference(x, trajectory.dt);
    const std::vector<double> a = difference(v, trajectory.dt);
    const std::vector<double> j = difference(a, trajectory.dt);
    const auto flag = [&](const std::vector<double>& d, const std::optional<double>& limit, ViolationKind kind) {
        if (!limit) return;
        for (std::size_t i = 0; i < d.size(); ++i) {
            if (exceeds(d[i], *limit)) out.push_back({dof.name, i, trajectory.time(i), kind, d[i], *limit});
        }
    };
    flag(v, dof.limits.velocity, ViolationKind::Velocity);
    flag(a, dof.limits.acceleration, ViolationKind::Acceleration);
    flag(j, dof.limits.jerk, ViolationKind::Jerk);
}

std::vector<const DoFDescriptor*> resolve(const Trajectory& trajectory, const EmbodimentSpec& spec) {
    if (!(trajectory.dt > 0.0) || !std::isfinite(trajectory.dt)) throw ValidationError("sample spacing must be positive");
    if (!std::isfinite(trajectory.t0)) throw ValidationError("start time must be finite");
    std::vector<const DoFDescriptor*> dofs;
    for (const auto& s : trajectory.series) {
        const auto* dof = spec.find(s.dof);
        if (!dof) throw ValidationError("unknown dof '" + s.dof + "'");
        if (!dof->continuous()) throw ValidationError("dof '" + s.dof + "' is discrete");
        if (s.values.size() != trajectory.samples()) throw ValidationError("dof '" + s.dof + "' has a different sample count");
        for (double x : s.values) {
            if (!std::isfinite(x)) throw ValidationError("dof '" + s.dof + "' has a non-finite sample");
        }
        dofs.push_back(dof);
    }
    return dofs;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

}  // namespace

std::string_view to_string(ViolationKind kind) {
    switch (kind) {
        case ViolationKind::Position: return "position";
        case ViolationKind::Velocity: return "velocity";
        case ViolationKind::Acceleration: return "acceleration";
        case ViolationKind::Jerk: return "jerk";
    }
    return "unknown";
}

Trajectory sample_trajectory(const AnimationClip& clip, double rate) {
    if (!(rate > 0.0) || !std::isfinite(rate)) throw ValidationError("rate must be positive");
    Trajectory out;
    out.dt = 1.0 / rate;
    const auto last = static_cast<std::size_t>(std::floor(clip.duration * rate + 1e-9));
    for (const auto& curve : clip.curves) {
        DofSeries s{curve.dof, {}};
        s.values.reserve(last + 1);
        for (std::size_t i = 0; i <= last; ++i) s.values.push_back(sample_curve(curve, out.time(i)));
        out.series.push_back(std::move(s));
    }
    return out;
}

std::vector<Violation> check_trajectory(const Trajectory& trajectory, const EmbodimentSpec& spec) {
    const auto dofs = resolve(trajectory, spec);
    std::vector<Violation> out;
    for (std::size_t k = 0; k < dofs.size(); ++k) check_series(trajectory, trajectory.series[k], *dofs[k], out);
    std::stable_sort(out.begin(), out.end(), [&](const Violation& a, const Violation& b) {
        if (a.sample_index != b.sample_index) return a.sample_index < b.sample_index;
        const auto ia = *spec.index_of(a.dof);
        const auto ib = *spec.index_of(b.dof);
        if (ia != ib) return ia < ib;
        return a.kind < b.kind;
    });
    return out;
}

nmf::FilterParams default_ghost_character() {
    nmf::FilterParams p;
    p.order = nmf::Order::C3;
    p.limiter = nmf::Limiter::Tanh;
    p.smoothness = 0.95;
    p.responsiveness = 1.0;
    p.beta = 5;
    return p;
}

nmf::FilterParams ghost_params(const DoFDescriptor& dof, const nmf::FilterParams& character, double rate) {
    const auto& lim = dof.limits;
    if (!lim.velocity) throw ValidationError("dof '" + dof.name + "' has no velocity limit to filter against");
    const int supported = lim.acceleration ? (lim.jerk ? 3 : 2) : 1;
    nmf::FilterParams p = character;
    p.order = static_cast<nmf::Order>(std::min(static_cast<int>(character.order), supported));
    p.p_min = dof.min;
    p.p_max = dof.max;
    p.velocity_limit = *lim.velocity;
    p.acceleration_limit = lim.acceleration.value_or(p.acceleration_limit);
    p.jerk_limit = lim.jerk.value_or(p.jerk_limit);
    p.sample_rate = rate;
    p.validate();
    return p;
}

GhostReport ghost(const Trajectory& trajectory, const EmbodimentSpec& spec,
                  const std::map<std::string, nmf::FilterParams>& character) {
    const auto dofs = resolve(trajectory, spec);
    GhostReport report;
    report.corrected.dt = trajectory.dt;
    report.corrected.t0 = trajectory.t0;
    const std::size_t n = trajectory.samples();
    for (std::size_t k = 0; k < dofs.size(); ++k) {
        const auto& dof = *dofs[k];
        const auto& x = trajectory.series[k].values;
        const auto it = character.find(dof.name);
        GhostChannel channel;
        channel.dof = dof.name;
        channel.params = ghost_params(dof, it != character.end() ? it->second : default_ghost_character(),
                                      1.0 / trajectory.dt);
        if (n > 0) {
            const double x0 = dof.clamp(x.front());
            channel.samples.push_back({trajectory.t0, x0, 0.0, 0.0, 0.0, 0.0});
            if (n > 1) {
                std::vector<nmf::SetPoint> set_points;
                set_points.reserve(n);
                for (std::size_t i = 0; i < n; ++i) set_points.push_back({static_cast<double>(i) * trajectory.dt, x[i]});
                for (auto o : nmf::run(channel.params, x0, set_points, static_cast<double>(n - 1) * trajectory.dt)) {
                    o.t += trajectory.t0;
                    channel.samples.push_back(o);
                }
            }
        }
        DofSeries corrected{dof.name, {}};
        corrected.values.reserve(n);
        for (std::size_t i = 0; i < channel.samples.size(); ++i) {
            corrected.values.push_back(channel.samples[i].x);
            channel.max_deviation = std::max(channel.max_deviation, std::abs(x[i] - channel.samples[i].x));
        }
        report.corrected.series.push_back(std::move(corrected));
        report.channels.push_back(std::move(channel));
    }
    report.residual_violations = check_trajectory(report.corrected, spec);
    return report;
}

ResponseMetrics measure_response(std::span<const nmf::FilterOutput> outputs, const StepChange& step,
                                 std::optional<double> until) {
    if (!(step.from != step.to)) throw ValidationError("step needs distinct from and to values");
    const double end = until.value_or(outputs.empty() ? step.at : outputs.back().t);
    std::vector<nmf::FilterOutput> seg;
    for (const auto& o : outputs) {
        if (o.t > step.at && o.t <= end) seg.push_back(o);
    }
    if (seg.empty()) throw ValidationError("no output after the step");

    const double size = std::abs(step.to - step.from);
    const double dir = step.to > step.from ? 1.0 : -1.0;
    ResponseMetrics m;

    double beyond = 0.0;
    for (const auto& o : seg) beyond = std::max(beyond, dir * (o.x - step.to));
    m.overshoot_fraction = beyond / size;

    const double band = 0.01 * size;
    m.settle_time = std::numeric_limits<double>::infinity();
    for (std::size_t i = seg.size(); i-- > 0;) {
        if (std::abs(seg[i].x - step.to) >= band) {
            if (i + 1 < seg.size()) m.settle_time = seg[i + 1].t - step.at;
            break;
        }
        if (i == 0) m.settle_time = seg[0].t - step.at;
    }

    std::size_t cross = seg.size();
    for (std::size_t i = 0; i < seg.size(); ++i) {
        if (dir * (seg[i].x - step.to) >= 0.0) {
            cross = i;
            break;
        }
    }
    int previous = 0;
    for (std::size_t i = cross; i < seg.size(); ++i) {
        const int sign = (seg[i].v > 0.0) - (seg[i].v < 0.0);
        if (sign == 0) continue;
        if (previous != 0 && sign != previous) ++m.oscillation_count;
        previous = sign;
    }

    std::vector<double> speed;
    speed.reserve(seg.size());
    for (const auto& o : seg) speed.push_back(std::abs(o.v));
    m.peak_velocity = *std::max_element(speed.begin(), speed.end());

    // Longest run of moving samples whose spread stays under 10% of its
    // maximum; rest samples break a run.
    const double moving = 1e-3 * m.peak_velocity;
    std::size_t best_begin = 0, best_length = 0;
    for (std::size_t i = 0; i < speed.size(); ++i) {
        if (speed[i] < moving) continue;
        double hi = speed[i], lo = speed[i];
        for (std::size_t j = i; j < speed.size(); ++j) {
            if (speed[j] < moving) break;
            hi = std::max(hi, speed[j]);
            lo = std::min(lo, speed[j]);
            if (hi - lo >= 0.1 * hi) break;
            if (j - i + 1 > best_length) {
                best_length = j - i + 1;
                best_begin = i;
            }
        }
    }
    if (best_length > 0) {
        m.sustained_velocity = median({speed.begin() + static_cast<std::ptrdiff_t>(best_begin),
                                       speed.begin() + static_cast<std::ptrdiff_t>(best_begin + best_length)});
    }
    return m;
}

std::string violation_report(const std::vector<Violation>& violations) {
    using nlohmann::json;
    std::string out;
    json by_kind = json::object();
    json by_dof = json::object();
    for (auto kind : {ViolationKind::Position, ViolationKind::Velocity, ViolationKind::Acceleration, ViolationKind::Jerk})
        by_kind[std::string(to_string(kind))] = 0;
    for (const auto& v : violations) {
        json line = {{"dof", v.dof},          {"sample", v.sample_index}, {"t", v.time},
                     {"kind", to_string(v.kind)}, {"actual", v.actual},   {"limit", v.limit}};
        out += line.dump() + "\n";
        by_kind[std::string(to_string(v.kind))] = by_kind[std::string(to_string(v.kind))].get<int>() + 1;
        by_dof[v.dof] = by_dof.value(v.dof, 0) + 1;
    }
    json summary = {{"summary", {{"total", violations.size()}, {"by_kind", by_kind}, {"by_dof", by_dof}}}};
    out += summary.dump() + "\n";
    return out;
}

}  // namespace nutty
