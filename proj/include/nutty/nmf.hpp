#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nutty::nmf {

enum class Order { C1 = 1, C2 = 2, C3 = 3 };

enum class Limiter { Tanh, Hard };

/// Largest responsiveness the stabilizer accepts. Table-style presets that
/// ask for rho = 1 are clamped to this.
inline constexpr double kMaxResponsiveness = 1.0 - 1e-6;

struct FilterParams {
    Order order = Order::C3;
    Limiter limiter = Limiter::Tanh;
    double smoothness = 0.0;      // sigma, [0, 1]
    double responsiveness = 0.0;  // rho, [0, kMaxResponsiveness]; larger values are clamped
    int beta = 5;                 // exponent of the position saturation, >= 1
    double p_min = -10.0;
    double p_max = 10.0;
    double velocity_limit = 20.0;
    double acceleration_limit = 100.0;  // C2, C3
    double jerk_limit = 10000.0;        // C3
    double sample_rate = 60.0;          // Hz
    bool stabilizer_enabled = true;

    double dt() const { return 1.0 / sample_rate; }

    /// Throws ValidationError on the first violated invariant.
    void validate() const;

    bool operator==(const FilterParams&) const = default;
};

/// Per-channel filter history. A default-constructed state is uninitialized.
struct FilterState {
    double x = 0.0;
    double v = 0.0;
    double a = 0.0;
    double t = 0.0;
    FilterParams params;
    bool initialized = false;

    /// Rest state at `x0`. Throws ValidationError if params are invalid or
    /// x0 lies outside [p_min, p_max].
    static FilterState at_rest(const FilterParams& params, double x0);
};

/// Applied motion for one tick. `applied_jerk` is the jerk the limiter let
/// through (C3 only) before the outer guards.
struct FilterOutput {
    double t = 0.0;
    double x = 0.0;
    double v = 0.0;
    double a = 0.0;
    double j = 0.0;
    double applied_jerk = 0.0;
};

// Saturation primitives.

/// Exact clamp into [-k, k].
double limit_hard(double x, double k);

/// Smooth saturation (k/2)·tanh(x/(k/2)). Unit slope at the origin; the
/// supremum is k/2, which leaves headroom below the physical limit k.
double limit_tanh(double x, double k);

double limit(Limiter limiter, double x, double k);

/// Position saturation of a velocity demand. Scales the velocity down as x
/// approaches the edge it is moving toward; movement away from the nearer
/// edge passes through.
double omega(double v_in, double x, double p_min, double p_max, int beta);
double omega(double v_in, double x, const FilterParams& params);

/// Gain of the stabilization transfer function, in (0, 1) for v != 0.
double stabilizer_gain(double v, double smoothness, double responsiveness);

/// Stabilization transfer function: v times stabilizer_gain.
double stabilize(double v, double smoothness, double responsiveness);

/// Magnitude-limits a 2-D or 3-D velocity as a whole, preserving direction.
std::vector<double> limit_vector(std::span<const double> v, double limit, Limiter limiter);

/// Advances `state` by one sample toward `set_point`.
/// Throws StateError on an uninitialized state and ValidationError on a
/// non-finite set-point.
FilterOutput step(FilterState& state, double set_point);

/// A single-channel filter. Parameters can be swapped between steps without
/// touching x/v/a.
class MotionFilter {
public:
    MotionFilter(const FilterParams& params, double x0) : state_(FilterState::at_rest(params, x0)) {}

    FilterOutput step(double set_point) { return nmf::step(state_, set_point); }

    void set_params(const FilterParams& params);
    const FilterParams& params() const { return state_.params; }
    const FilterState& state() const { return state_; }

    /// Back to rest at x0, time zero.
    void reset(double x0) { state_ = FilterState::at_rest(state_.params, x0); }

private:
    FilterState state_;
};

struct SetPoint {
    double t = 0.0;
    double value = 0.0;
};

/// Fixed-rate run with zero-order hold on the set-point sequence. Returns one
/// output per tick at t = dt, 2dt, ..., duration. Before the first set-point
/// timestamp the first value is held.
std::vector<FilterOutput> run(const FilterParams& params, double x0, std::span<const SetPoint> set_points,
                              double duration);

// Example inputs and Table-style presets.

enum class InputPreset { Linear, Random, Circle };

std::optional<InputPreset> input_preset(std::string_view name);
std::string_view to_string(InputPreset preset);

/// Linear: 5, then -5 from t = 2.5 s, back to 5 from t = 7.5 s.
/// Random: uniform in [p_min, p_max], redrawn every 1.0 s from `seed`.
/// Circle: one axis of a 50-point circle (amplitude 5), a step every 0.2 s.
std::vector<SetPoint> make_input(InputPreset preset, double p_min, double p_max, std::uint64_t seed);

std::optional<FilterParams> filter_preset(std::string_view name);
std::vector<std::string> filter_preset_names();

}  // namespace nutty::nmf
