#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nutty {

/// The four kinematronics dimensions a DoF can belong to.
enum class Dimension { Stationary, Spatial, Display, Audible };

enum class ValueKind { Continuous, Discrete };

/// Body-local spatial axis. Rotations are intrinsic Yaw-Pitch-Roll.
enum class SpatialAxis { X, Y, Z, Yaw, Pitch, Roll };

struct KinematicLimits {
    std::optional<double> velocity;
    std::optional<double> acceleration;
    std::optional<double> jerk;

    bool empty() const { return !velocity && !acceleration && !jerk; }
    bool operator==(const KinematicLimits&) const = default;
};

/// One expressive channel of a robot: a joint, an LED group, a screen, an
/// audio player.
struct DoFDescriptor {
    std::string name;
    Dimension dimension = Dimension::Stationary;
    ValueKind kind = ValueKind::Continuous;
    double min = 0.0;  // Continuous only
    double max = 0.0;
    std::vector<std::string> labels;  // Discrete only, ordered
    KinematicLimits limits;           // Continuous only
    std::optional<SpatialAxis> axis;  // Spatial only
    std::optional<std::string> parent;

    bool continuous() const { return kind == ValueKind::Continuous; }
    double clamp(double x) const;
    bool has_label(std::string_view label) const;

    bool operator==(const DoFDescriptor&) const = default;
};

struct KinematronicsProfile {
    std::size_t stationary = 0;
    std::size_t spatial = 0;
    std::size_t display = 0;
    std::size_t audible = 0;

    std::size_t total() const { return stationary + spatial + display + audible; }
    bool operator==(const KinematronicsProfile&) const = default;
};

/// A validated robot description. The DoF order is the canonical channel
/// order of every AnimationFrame produced for this embodiment.
class EmbodimentSpec {
public:
    EmbodimentSpec() = default;

    /// Throws ValidationError naming the offending DoF.
    EmbodimentSpec(std::string name, std::vector<DoFDescriptor> dofs);

    const std::string& name() const { return name_; }
    const std::vector<DoFDescriptor>& dofs() const { return dofs_; }
    std::size_t size() const { return dofs_.size(); }

    std::optional<std::size_t> index_of(std::string_view dof) const;
    const DoFDescriptor* find(std::string_view dof) const;
    const DoFDescriptor& at(std::string_view dof) const;

    bool operator==(const EmbodimentSpec&) const = default;

private:
    std::string name_;
    std::vector<DoFDescriptor> dofs_;
};

void validate(const DoFDescriptor& dof);

EmbodimentSpec load_embodiment(std::string_view text);
EmbodimentSpec load_embodiment_file(const std::string& path);
std::string serialize(const EmbodimentSpec& spec);

KinematronicsProfile profile(const EmbodimentSpec& spec);

std::string_view to_string(Dimension d);
std::string_view to_string(SpatialAxis a);

}  // namespace nutty
