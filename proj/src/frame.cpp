#include "nutty/frame.hpp"

#include <algorithm>

#include "nutty/error.hpp"

namespace nutty {

std::optional<double> PartialFrame::position(std::string_view dof) const {
    const auto it = channels.find(dof);
    if (it == channels.end()) return std::nullopt;
    if (const auto* c = std::get_if<ContinuousValue>(&it->second)) return c->position;
    return std::nullopt;
}

std::optional<std::string> PartialFrame::label(std::string_view dof) const {
    const auto it = channels.find(dof);
    if (it == channels.end()) return std::nullopt;
    if (const auto* d = std::get_if<DiscreteValue>(&it->second)) return d->label;
    return std::nullopt;
}

AnimationFrame default_frame(const EmbodimentSpec& spec) {
    AnimationFrame frame;
    frame.embodiment = spec.name();
    frame.channels.reserve(spec.size());
    for (const auto& dof : spec.dofs()) {
        if (dof.continuous()) {
            frame.channels.push_back(continuous(dof.clamp(0.0)));
        } else {
            frame.channels.push_back(discrete(dof.labels.front()));
        }
    }
    return frame;
}

AnimationFrame merge_full(const AnimationFrame& last, const PartialFrame& update, const EmbodimentSpec& spec) {
    if (last.channels.size() != spec.size())
        throw ValidationError("frame does not cover embodiment '" + spec.name() + "'");
    AnimationFrame out = last;
    for (const auto& [name, value] : update.channels) {
        const auto index = spec.index_of(name);
        if (!index) throw ValidationError("unknown dof '" + name + "'");
        const auto& dof = spec.dofs()[*index];
        if (dof.continuous()) {
            const auto* c = std::get_if<ContinuousValue>(&value);
            if (!c) throw ValidationError("dof '" + name + "' is continuous but received a label");
            ContinuousValue clamped = *c;
            clamped.position = dof.clamp(c->position);
            out.channels[*index] = clamped;
        } else {
            const auto* d = std::get_if<DiscreteValue>(&value);
            if (!d) throw ValidationError("dof '" + name + "' is discrete but received a number");
            if (!dof.has_label(d->label))
                throw ValidationError("dof '" + name + "' has no label '" + d->label + "'");
            out.channels[*index] = *d;
        }
    }
    return out;
}

PartialFrame to_partial(const AnimationFrame& frame, const EmbodimentSpec& spec) {
    PartialFrame out;
    for (std::size_t i = 0; i < spec.size() && i < frame.channels.size(); ++i) {
        out.set(spec.dofs()[i].name, frame.channels[i]);
    }
    return out;
}

}  // namespace nutty
