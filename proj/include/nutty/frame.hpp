#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "nutty/embodiment.hpp"

namespace nutty {

struct ContinuousValue {
    double position = 0.0;
    std::optional<double> velocity;
    std::optional<double> acceleration;
    std::optional<double> jerk;

    bool operator==(const ContinuousValue&) const = default;
};

struct DiscreteValue {
    std::string label;

    bool operator==(const DiscreteValue&) const = default;
};

using ChannelValue = std::variant<ContinuousValue, DiscreteValue>;

inline ChannelValue continuous(double position) { return ContinuousValue{position, {}, {}, {}}; }
inline ChannelValue discrete(std::string label) { return DiscreteValue{std::move(label)}; }

/// Motion parameters for some (possibly none) of an embodiment's DoFs.
/// An empty frame is the identity for blending and merging.
struct PartialFrame {
    std::map<std::string, ChannelValue, std::less<>> channels;

    bool empty() const { return channels.empty(); }
    std::size_t size() const { return channels.size(); }
    bool contains(std::string_view dof) const { return channels.find(dof) != channels.end(); }

    void set(std::string dof, ChannelValue value) { channels.insert_or_assign(std::move(dof), std::move(value)); }

    /// Position of a Continuous channel, nullopt if absent or Discrete.
    std::optional<double> position(std::string_view dof) const;
    /// Label of a Discrete channel, nullopt if absent or Continuous.
    std::optional<std::string> label(std::string_view dof) const;

    bool operator==(const PartialFrame&) const = default;
};

/// One value per DoF of the bound embodiment, in embodiment order.
struct AnimationFrame {
    std::string embodiment;
    double delta_time = 0.0;
    double time = 0.0;
    std::vector<ChannelValue> channels;

    bool operator==(const AnimationFrame&) const = default;
};

/// Rest pose: Continuous DoFs at 0 clamped into range, Discrete DoFs at
/// their first label.
AnimationFrame default_frame(const EmbodimentSpec& spec);

/// Per-channel override of `last` by `update`. Continuous values are clamped
/// into their DoF range. Throws ValidationError for unknown DoFs, kind
/// mismatches and labels outside the DoF's label set.
AnimationFrame merge_full(const AnimationFrame& last, const PartialFrame& update, const EmbodimentSpec& spec);

/// Continuous channel positions of a full frame as a partial frame.
PartialFrame to_partial(const AnimationFrame& frame, const EmbodimentSpec& spec);

}  // namespace nutty
