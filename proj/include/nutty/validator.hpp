#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nutty/anim_assets.hpp"
#include "nutty/embodiment.hpp"
#include "nutty/nmf.hpp"

namespace nutty {

/// Kind of limit a sample breaks. Presentation colors: Velocity orange,
/// Acceleration pink, Jerk red; compliant samples are green. Position has no
/// color of its own.
enum class ViolationKind { Position, Velocity, Acceleration, Jerk };

std::string_view to_string(ViolationKind kind);

struct Violation {
    std::string dof;
    std::size_t sample_index = 0;
    double time = 0.0;
    ViolationKind kind = ViolationKind::Velocity;
    double actual = 0.0;
    double limit = 0.0;  // the exceeded bound; signed for Position

    bool operator==(const Violation&) const = default;
};

struct DofSeries {
    std::string dof;
    std::vector<double> values;

    bool operator==(const DofSeries&) const = default;
};

/// Positions of several DoFs sampled at a fixed rate, sample i at t0 + i·dt.
struct Trajectory {
    double dt = 1.0 / 60.0;
    double t0 = 0.0;
    std::vector<DofSeries> series;

    std::size_t samples() const { return series.empty() ? 0 : series.front().values.size(); }
    double time(std::size_t i) const { return t0 + static_cast<double>(i) * dt; }
};

/// Samples every curve of a clip at t = 0, dt, ..., duration (the last
/// sample lands on the duration when it is a whole number of ticks).
/// Discrete tracks are not sampled.
Trajectory sample_trajectory(const AnimationClip& clip, double rate);

/// Trajectory-helper. Forward differences give v, a and j; a sample is
/// flagged when |value| > limit (strict, with a 1e-9 relative rounding
/// allowance) or its position leaves the range. Only the limits a DoF
/// declares are checked. Sorted by time, then embodiment DoF order, then
/// kind. Throws ValidationError on unknown or Discrete DoFs, mismatched
/// lengths or a non-positive dt.
std::vector<Violation> check_trajectory(const Trajectory& trajectory, const EmbodimentSpec& spec);

struct GhostChannel {
    std::string dof;
    nmf::FilterParams params;  // as actually run
    std::vector<nmf::FilterOutput> samples;  // one per input sample; the first is the rest state
    double max_deviation = 0.0;
};

struct GhostReport {
    std::vector<GhostChannel> channels;
    std::vector<Violation> residual_violations;

    /// The corrected positions in the input's layout.
    Trajectory corrected;
};

/// Filter parameters for a DoF: the character (order cap, limiter,
/// smoothness, responsiveness, beta) comes from `character`, range and
/// limits from the DoF. The order is lowered to the highest one the DoF's
/// limits support. Throws ValidationError when the DoF has no velocity
/// limit.
nmf::FilterParams ghost_params(const DoFDescriptor& dof, const nmf::FilterParams& character, double rate);

/// Default ghost character: third order, tanh, smooth and responsive.
nmf::FilterParams default_ghost_character();

/// Ghost-helper. Each DoF is run through its filter with the original
/// samples as set-points, starting at rest on the first sample (clamped
/// into range). DoFs missing from `character` use default_ghost_character().
GhostReport ghost(const Trajectory& trajectory, const EmbodimentSpec& spec,
                  const std::map<std::string, nmf::FilterParams>& character = {});

struct StepChange {
    double from = 0.0;
    double to = 0.0;
    double at = 0.0;
};

struct ResponseMetrics {
    double overshoot_fraction = 0.0;
    double settle_time = 0.0;  // relative to the step; +inf if it never settles
    std::size_t oscillation_count = 0;
    double sustained_velocity = 0.0;
    double peak_velocity = 0.0;
};

/// Step-response metrics over the outputs with at < t <= until (until
/// defaults to the last output). Throws ValidationError when from == to or
/// no output falls in the window.
ResponseMetrics measure_response(std::span<const nmf::FilterOutput> outputs, const StepChange& step,
                                 std::optional<double> until = std::nullopt);

/// One JSON object per violation, then {"summary": {"total", "by_kind", "by_dof"}}.
std::string violation_report(const std::vector<Violation>& violations);

}  // namespace nutty
