#include "nutty/nmf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "nutty/error.hpp"

namespace nutty::nmf {

namespace {

bool positive(double x) { return std::isfinite(x) && x > 0.0; }

// Fastest speed toward an edge `distance` away from which the output can
// still come to rest by shedding at most `dv` of velocity per tick. The
// distance covered while braking from v in steps of dv is bounded by
// dt·(v²/(2dv) + v/2 + dv/8), and that bound loses exactly dt·v per tick, so
// a state inside the envelope stays inside it when it brakes. The envelope
// is drawn for a slightly weaker deceleration so that braking at the full
// limit keeps a margin against rounding.
double braking_envelope(double distance, double acceleration_limit, double dt) {
    acceleration_limit *= 1.0 - 1e-7;
    const double dv = acceleration_limit * dt;
    return std::max(0.0, std::sqrt(2.0 * acceleration_limit * std::max(0.0, distance)) - 0.5 * dv);
}

// Nudges x_new by single ulps until the velocity and acceleration recomputed
// from it satisfy the hard bounds. Only rounding residue is removed here.
double settle_rounding(double x_prev, double x_new, double v_prev, double dt, double v_lo, double v_hi,
                       double a_limit) {
    for (int i = 0; i < 64; ++i) {
        const double v = (x_new - x_prev) / dt;
        const double a = (v - v_prev) / dt;
        // The difference x_new - x_prev resolves no finer than one ulp of the
        // larger operand, so nudge by that much.
        const double m = std::max({std::abs(x_prev), std::abs(x_new), std::numeric_limits<double>::min()});
        const double ulp = std::nextafter(m, INFINITY) - m;
        if (v > v_hi || a > a_limit) {
            x_new -= ulp;
        } else if (v < v_lo || a < -a_limit) {
            x_new += ulp;
        } else {
            break;
        }
    }
    return x_new;
}

}  // namespace

void FilterParams::validate() const {
    if (!(smoothness >= 0.0 && smoothness <= 1.0)) throw ValidationError("smoothness must lie in [0, 1]");
    if (!(responsiveness >= 0.0 && responsiveness <= 1.0))
        throw ValidationError("responsiveness must lie in [0, 1)");
    if (beta < 1) throw ValidationError("beta must be a positive integer");
    if (!positive(sample_rate)) throw ValidationError("sample rate must be positive");
    if (!std::isfinite(p_min) || !std::isfinite(p_max) || !(p_min < p_max))
        throw ValidationError("position range requires p_min < p_max");
    if (!positive(velocity_limit)) throw ValidationError("velocity limit must be positive");
    if (order != Order::C1 && !positive(acceleration_limit))
        throw ValidationError("acceleration limit must be positive");
    if (order == Order::C3 && !positive(jerk_limit)) throw ValidationError("jerk limit must be positive");
}

FilterState FilterState::at_rest(const FilterParams& params, double x0) {
    params.validate();
    if (!(x0 >= params.p_min && x0 <= params.p_max))
        throw ValidationError("initial position outside [p_min, p_max]");
    FilterState s;
    s.x = x0;
    s.params = params;
    s.initialized = true;
    return s;
}

double limit_hard(double x, double k) { return std::min(k, std::max(-k, x)); }

double limit_tanh(double x, double k) {
    const double half = 0.5 * k;
    const double y = half * std::tanh(x / half);
    // tanh rounds to exactly 1 for large arguments; stay strictly inside k/2.
    if (std::abs(y) >= half) return std::copysign(std::nextafter(half, 0.0), x);
    return y;
}

double limit(Limiter limiter, double x, double k) {
    return limiter == Limiter::Tanh ? limit_tanh(x, k) : limit_hard(x, k);
}

double omega(double v_in, double x, double p_min, double p_max, int beta) {
    const double alpha = 0.5 * (p_max - p_min);
    const double centre = p_min + alpha;
    if ((x > centre && v_in > 0.0) || (x < centre && v_in < 0.0)) {
        const double u = (x - p_min - alpha) / alpha;
        // 2·beta is even, so u^(2·beta) = (u²)^beta.
        return v_in * (1.0 - std::pow(u * u, beta));
    }
    return v_in;
}

double omega(double v_in, double x, const FilterParams& params) {
    return omega(v_in, x, params.p_min, params.p_max, params.beta);
}

double stabilizer_gain(double v, double smoothness, double responsiveness) {
    const double rho = std::min(responsiveness, kMaxResponsiveness);
    const double base = std::abs(v) / (1.0 - rho);
    return 0.5 * (std::tanh(std::pow(base, 1.0 - smoothness) - std::numbers::pi) + 1.0);
}

double stabilize(double v, double smoothness, double responsiveness) {
    if (v == 0.0) return 0.0;
    return v * stabilizer_gain(v, smoothness, responsiveness);
}

std::vector<double> limit_vector(std::span<const double> v, double limit_value, Limiter limiter) {
    std::vector<double> out(v.begin(), v.end());
    double norm2 = 0.0;
    for (double c : v) norm2 += c * c;
    const double norm = std::sqrt(norm2);
    if (norm == 0.0) return out;
    const double scaled = limiter == Limiter::Tanh ? limit_tanh(norm, limit_value) : std::min(norm, limit_value);
    const double s = scaled / norm;
    for (double& c : out) c *= s;
    return out;
}

FilterOutput step(FilterState& state, double set_point) {
    if (!state.initialized) throw StateError("filter state used before initialization");
    if (!std::isfinite(set_point)) throw ValidationError("set-point must be finite");

    const FilterParams& p = state.params;
    const double dt = p.dt();
    const double x_prev = state.x;
    const double v_prev = state.v;
    const double a_prev = state.a;

    const double v_induced = (set_point - x_prev) / dt;
    const double v_bounded = omega(v_induced, x_prev, p);
    const double v_target =
        p.stabilizer_enabled ? stabilize(v_bounded, p.smoothness, p.responsiveness) : v_bounded;

    // Nested saturation from the highest modelled derivative outward.
    double applied_jerk = 0.0;
    double v_next = 0.0;
    switch (p.order) {
        case Order::C3: {
            const double jerk = ((v_target - v_prev) / dt - a_prev) / dt;
            applied_jerk = limit(p.limiter, jerk, p.jerk_limit);
            const double a_next = limit(p.limiter, a_prev + applied_jerk * dt, p.acceleration_limit);
            v_next = limit(p.limiter, v_prev + a_next * dt, p.velocity_limit);
            break;
        }
        case Order::C2: {
            const double a_next = limit(p.limiter, (v_target - v_prev) / dt, p.acceleration_limit);
            v_next = limit(p.limiter, v_prev + a_next * dt, p.velocity_limit);
            break;
        }
        case Order::C1:
            v_next = limit(p.limiter, v_target, p.velocity_limit);
            break;
    }

    // Hard guards: the configured limits are the invariant bounds. The
    // position interval (velocity limit and braking envelopes) always
    // contains zero; the acceleration guard yields to it when a parameter
    // swap has left the state outside the envelope.
    double v_lo = -p.velocity_limit;
    double v_hi = p.velocity_limit;
    if (p.order != Order::C1) {
        v_hi = std::min(v_hi, braking_envelope(p.p_max - x_prev, p.acceleration_limit, dt));
        v_lo = std::max(v_lo, -braking_envelope(x_prev - p.p_min, p.acceleration_limit, dt));
        const double dv = p.acceleration_limit * dt;
        const double acc_lo = v_prev - dv;
        const double acc_hi = v_prev + dv;
        if (acc_lo > v_hi) {
            v_lo = v_hi;
        } else if (acc_hi < v_lo) {
            v_hi = v_lo;
        } else {
            v_lo = std::max(v_lo, acc_lo);
            v_hi = std::min(v_hi, acc_hi);
        }
    }
    double pick_lo = v_lo;
    double pick_hi = v_hi;
    if (p.order == Order::C3) {
        // Realized jerk guard: the nested saturation bounds the applied jerk,
        // but compressing a and v afterwards can bend the realized
        // acceleration faster. Since |a_prev| <= A this band always meets the
        // acceleration band; it yields only to the position interval. The
        // rounding pass below settles against the hard bounds only.
        const double centre = v_prev + a_prev * dt;
        const double dj = p.jerk_limit * dt * dt;
        double lo = centre - dj;
        double hi = centre + dj;
        // The velocity limit is an edge one level up: approach it only as
        // fast as the jerk limit can still bring the acceleration to rest.
        const double env_hi = v_prev + braking_envelope(p.velocity_limit - v_prev, p.jerk_limit, dt) * dt;
        const double env_lo = v_prev - braking_envelope(p.velocity_limit + v_prev, p.jerk_limit, dt) * dt;
        if (std::max(lo, env_lo) <= std::min(hi, env_hi)) {
            lo = std::max(lo, env_lo);
            hi = std::min(hi, env_hi);
        }
        if (lo > v_hi) {
            pick_lo = v_hi;
        } else if (hi < v_lo) {
            pick_hi = v_lo;
        } else {
            pick_lo = std::max(v_lo, lo);
            pick_hi = std::min(v_hi, hi);
        }
    }
    v_next = std::clamp(v_next, pick_lo, pick_hi);

    double x_next = std::clamp(x_prev + v_next * dt, p.p_min, p.p_max);
    const double a_guard = p.order == Order::C1 ? INFINITY : p.acceleration_limit;
    x_next = std::clamp(settle_rounding(x_prev, x_next, v_prev, dt, v_lo, v_hi, a_guard), p.p_min, p.p_max);

    FilterOutput out;
    out.x = x_next;
    out.v = (x_next - x_prev) / dt;
    if (p.order != Order::C1) out.a = (out.v - v_prev) / dt;
    if (p.order == Order::C3) out.j = (out.a - a_prev) / dt;
    out.applied_jerk = applied_jerk;

    state.x = out.x;
    state.v = out.v;
    state.a = out.a;
    state.t += dt;
    out.t = state.t;
    return out;
}

void MotionFilter::set_params(const FilterParams& params) {
    params.validate();
    state_.params = params;
    state_.x = std::clamp(state_.x, params.p_min, params.p_max);
    if (params.order == Order::C1) state_.a = 0.0;
}

std::vector<FilterOutput> run(const FilterParams& params, double x0, std::span<const SetPoint> set_points,
                              double duration) {
    if (set_points.empty()) throw ValidationError("set-point sequence is empty");
    if (!(duration > 0.0) || !std::isfinite(duration)) throw ValidationError("duration must be positive");
    for (std::size_t i = 1; i < set_points.size(); ++i) {
        if (set_points[i].t < set_points[i - 1].t)
            throw ValidationError("set-point timestamps must be non-decreasing");
    }

    FilterState state = FilterState::at_rest(params, x0);
    const double dt = params.dt();
    const auto ticks = static_cast<std::size_t>(std::llround(duration / dt));
    std::vector<FilterOutput> out;
    out.reserve(ticks);

    std::size_t cursor = 0;
    for (std::size_t i = 1; i <= ticks; ++i) {
        const double t = static_cast<double>(i) * dt;
        // Small slack so a set-point stamped exactly on a tick is seen on it.
        while (cursor + 1 < set_points.size() && set_points[cursor + 1].t <= t + 1e-9 * dt) ++cursor;
        FilterOutput o = step(state, set_points[cursor].value);
        o.t = t;
        out.push_back(o);
    }
    return out;
}

std::optional<InputPreset> input_preset(std::string_view name) {
    if (name == "phi_l") return InputPreset::Linear;
    if (name == "phi_r") return InputPreset::Random;
    if (name == "phi_c") return InputPreset::Circle;
    return std::nullopt;
}

std::string_view to_string(InputPreset preset) {
    switch (preset) {
        case InputPreset::Linear: return "phi_l";
        case InputPreset::Random: return "phi_r";
        case InputPreset::Circle: return "phi_c";
    }
    return "";
}

std::vector<SetPoint> make_input(InputPreset preset, double p_min, double p_max, std::uint64_t seed) {
    std::vector<SetPoint> out;
    switch (preset) {
        case InputPreset::Linear:
            out = {{0.0, 5.0}, {2.5, -5.0}, {7.5, 5.0}};
            break;
        case InputPreset::Random: {
            std::mt19937_64 rng(seed);
            for (int i = 0; i < 10; ++i) {
                // 53 random bits -> [0, 1), identical on every platform.
                const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
                out.push_back({static_cast<double>(i), p_min + u * (p_max - p_min)});
            }
            break;
        }
        case InputPreset::Circle: {
            constexpr int kPoints = 50;
            for (int i = 0; i < kPoints; ++i) {
                const double angle = 2.0 * std::numbers::pi * i / kPoints;
                out.push_back({0.2 * i, 5.0 * std::cos(angle)});
            }
            break;
        }
    }
    return out;
}

namespace {

// Hyperparameter groups: Regular (stabilizer bypassed), A slow & smooth,
// B slow & vivid, C fast & vivid, D fast & smooth, E fast & very smooth.
constexpr double kSlow[] = {20.0, 100.0, 10000.0};
constexpr double kFast[] = {90.0, 700.0, 50000.0};

}  // namespace

std::vector<std::string> filter_preset_names() {
    std::vector<std::string> names = {"W3", "W3n"};
    for (char group : {'A', 'B', 'C', 'D'}) {
        for (int order = 3; order >= 1; --order) {
            const std::string base = "X" + std::to_string(order) + group;
            names.push_back(base);
            names.push_back(base + "n");
        }
    }
    names.push_back("X3E");
    return names;
}

std::optional<FilterParams> filter_preset(std::string_view name) {
    FilterParams p;
    p.p_min = -10.0;
    p.p_max = 10.0;
    p.beta = 5;
    p.sample_rate = 60.0;

    std::string_view rest = name;
    bool hard = false;
    if (!rest.empty() && rest.back() == 'n') {
        hard = true;
        rest.remove_suffix(1);
    }
    p.limiter = hard ? Limiter::Hard : Limiter::Tanh;

    auto set_limits = [&](const double* lim) {
        p.velocity_limit = lim[0];
        p.acceleration_limit = lim[1];
        p.jerk_limit = lim[2];
    };

    if (rest == "W3") {
        p.order = Order::C3;
        p.stabilizer_enabled = false;
        set_limits(kSlow);
        return p;
    }
    if (rest.size() != 3 || rest[0] != 'X' || rest[1] < '1' || rest[1] > '3') return std::nullopt;
    p.order = static_cast<Order>(rest[1] - '0');
    switch (rest[2]) {
        case 'A': p.smoothness = 1.0, p.responsiveness = 1.0, set_limits(kSlow); break;
        case 'B': p.smoothness = 0.1, p.responsiveness = 0.0, set_limits(kSlow); break;
        case 'C': p.smoothness = 0.1, p.responsiveness = 0.0, set_limits(kFast); break;
        case 'D': p.smoothness = 0.95, p.responsiveness = 1.0, set_limits(kFast); break;
        case 'E':
            if (p.order != Order::C3 || hard) return std::nullopt;
            p.smoothness = 0.95, p.responsiveness = 0.2, set_limits(kFast);
            break;
        default: return std::nullopt;
    }
    return p;
}

}  // namespace nutty::nmf
