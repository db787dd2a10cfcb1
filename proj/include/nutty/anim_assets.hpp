#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nutty/frame.hpp"

namespace nutty {

/// Linear: tangent is the chord slope toward the neighbour on that side.
/// Smooth: Catmull-Rom tangent, flat at the first and last key (slow in/out).
/// Custom: stored in/out tangents, which allows anticipation and overshoot.
enum class TangentMode { Linear, Smooth, Custom };

struct Keyframe {
    double time = 0.0;
    double value = 0.0;
    TangentMode mode = TangentMode::Smooth;
    std::optional<double> in_tangent;   // value/s
    std::optional<double> out_tangent;  // value/s

    bool operator==(const Keyframe&) const = default;
};

struct Curve {
    std::string dof;
    std::vector<Keyframe> keys;

    bool operator==(const Curve&) const = default;
};

struct DiscreteEvent {
    double time = 0.0;
    std::string label;

    bool operator==(const DiscreteEvent&) const = default;
};

struct DiscreteTrack {
    std::string dof;
    std::vector<DiscreteEvent> events;

    bool operator==(const DiscreteTrack&) const = default;
};

struct Anchor {
    std::string name;
    double time = 0.0;

    bool operator==(const Anchor&) const = default;
};

struct AnimationClip {
    std::string name;
    double duration = 0.0;
    std::vector<Curve> curves;
    std::vector<DiscreteTrack> tracks;
    std::vector<Anchor> anchors;

    bool operator==(const AnimationClip&) const = default;
};

void validate(const Curve& curve);
void validate(const AnimationClip& clip);

/// Checks clip channels against an embodiment: DoFs exist, curves target
/// Continuous DoFs, tracks target Discrete DoFs with known labels.
void validate(const AnimationClip& clip, const EmbodimentSpec& spec);

/// Resolved (in, out) tangent of key `index`.
std::pair<double, double> key_tangents(const Curve& curve, std::size_t index);

/// Cubic Hermite evaluation. Holds the first/last value outside the keys.
double sample_curve(const Curve& curve, double t);

/// One channel per curve and per track that has an event at or before t.
PartialFrame sample_clip(const AnimationClip& clip, double t);

/// Piecewise-linear retiming that keeps 0 and the duration fixed and maps
/// each named anchor onto its target. Values are untouched; tangents are
/// divided by the local time scale.
AnimationClip time_warp(const AnimationClip& clip, const std::map<std::string, double>& anchor_targets);

AnimationClip load_clip(std::string_view text);
AnimationClip load_clip_file(const std::string& path);
std::string serialize(const AnimationClip& clip);

/// Clips by name. Clips are shared immutably with the players that use them.
class ClipLibrary {
public:
    void add(AnimationClip clip);
    const AnimationClip* find(std::string_view name) const;
    std::shared_ptr<const AnimationClip> share(std::string_view name) const;
    std::size_t size() const { return clips_.size(); }

private:
    std::map<std::string, std::shared_ptr<const AnimationClip>, std::less<>> clips_;
};

}  // namespace nutty
