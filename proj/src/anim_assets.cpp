#include "nutty/anim_assets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "nutty/error.hpp"

namespace nutty {

using nlohmann::json;

namespace {

double chord(const Keyframe& a, const Keyframe& b) { return (b.value - a.value) / (b.time - a.time); }

const char* mode_name(TangentMode m) {
    switch (m) {
        case TangentMode::Linear: return "linear";
        case TangentMode::Smooth: return "smooth";
        case TangentMode::Custom: return "custom";
    }
    return "";
}

TangentMode parse_mode(const std::string& s) {
    if (s == "linear") return TangentMode::Linear;
    if (s == "smooth") return TangentMode::Smooth;
    if (s == "custom") return TangentMode::Custom;
    throw ParseError("unknown tangent mode '" + s + "'");
}

double get_number(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key) || !obj[key].is_number())
        throw ParseError(where + ": missing number '" + key + "'");
    return obj[key].get<double>();
}

std::string get_string(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key) || !obj[key].is_string())
        throw ParseError(where + ": missing string '" + key + "'");
    return obj[key].get<std::string>();
}

const json& get_array(const json& obj, const char* key, const std::string& where) {
    static const json kEmpty = json::array();
    if (!obj.contains(key)) return kEmpty;
    if (!obj[key].is_array()) throw ParseError(where + ": '" + key + "' must be an array");
    return obj[key];
}

// Piecewise-linear time map through (source, target) breakpoints.
class TimeMap {
public:
    explicit TimeMap(std::vector<std::pair<double, double>> points) : points_(std::move(points)) {}

    double operator()(double t) const {
        for (const auto& [src, dst] : points_) {
            if (t == src) return dst;
        }
        const std::size_t i = piece(t, false);
        const auto& [s0, d0] = points_[i];
        return d0 + (t - s0) * slope(i);
    }

    /// Slope of the piece just before (left) or just after t.
    double slope_at(double t, bool left) const { return slope(piece(t, left)); }

private:
    double slope(std::size_t i) const {
        const auto& [s0, d0] = points_[i];
        const auto& [s1, d1] = points_[i + 1];
        return (d1 - d0) / (s1 - s0);
    }

    std::size_t piece(double t, bool left) const {
        const std::size_t last = points_.size() - 2;
        for (std::size_t i = 0; i <= last; ++i) {
            const double end = points_[i + 1].first;
            if (left ? t <= end : t < end) return i;
        }
        return last;
    }

    std::vector<std::pair<double, double>> points_;
};

}  // namespace

void validate(const Curve& curve) {
    const std::string where = "curve '" + curve.dof + "'";
    if (curve.dof.empty()) throw ValidationError("curve without dof name");
    if (curve.keys.empty()) throw ValidationError(where + ": needs at least one key");
    for (std::size_t i = 0; i < curve.keys.size(); ++i) {
        const auto& k = curve.keys[i];
        if (!std::isfinite(k.time) || !std::isfinite(k.value))
            throw ValidationError(where + ": key " + std::to_string(i) + " is not finite");
        if (i > 0 && !(k.time > curve.keys[i - 1].time))
            throw ValidationError(where + ": key times must be strictly increasing");
        if (k.mode == TangentMode::Custom && (!k.in_tangent || !k.out_tangent))
            throw ValidationError(where + ": custom key " + std::to_string(i) + " needs both tangents");
        for (const auto& tangent : {k.in_tangent, k.out_tangent}) {
            if (tangent && !std::isfinite(*tangent))
                throw ValidationError(where + ": key " + std::to_string(i) + " has a non-finite tangent");
        }
    }
}

void validate(const AnimationClip& clip) {
    const std::string where = "clip '" + clip.name + "'";
    if (!std::isfinite(clip.duration) || clip.duration < 0.0)
        throw ValidationError(where + ": duration must be finite and non-negative");
    std::set<std::string> dofs;
    for (const auto& c : clip.curves) {
        validate(c);
        if (!dofs.insert(c.dof).second) throw ValidationError(where + ": dof '" + c.dof + "' animated twice");
        if (c.keys.back().time > clip.duration)
            throw ValidationError(where + ": curve '" + c.dof + "' has keys past the duration");
    }
    for (const auto& track : clip.tracks) {
        if (!dofs.insert(track.dof).second)
            throw ValidationError(where + ": dof '" + track.dof + "' animated twice");
        for (std::size_t i = 0; i < track.events.size(); ++i) {
            const auto& e = track.events[i];
            if (!std::isfinite(e.time) || e.time > clip.duration)
                throw ValidationError(where + ": track '" + track.dof + "' event outside the clip");
            if (i > 0 && e.time < track.events[i - 1].time)
                throw ValidationError(where + ": track '" + track.dof + "' events out of order");
        }
    }
    std::set<std::string> anchors;
    for (const auto& a : clip.anchors) {
        if (!anchors.insert(a.name).second) throw ValidationError(where + ": duplicate anchor '" + a.name + "'");
        if (!(a.time >= 0.0 && a.time <= clip.duration))
            throw ValidationError(where + ": anchor '" + a.name + "' outside [0, duration]");
    }
}

void validate(const AnimationClip& clip, const EmbodimentSpec& spec) {
    validate(clip);
    for (const auto& c : clip.curves) {
        if (!spec.at(c.dof).continuous())
            throw ValidationError("clip '" + clip.name + "': curve targets discrete dof '" + c.dof + "'");
    }
    for (const auto& track : clip.tracks) {
        const auto& dof = spec.at(track.dof);
        if (dof.continuous())
            throw ValidationError("clip '" + clip.name + "': track targets continuous dof '" + track.dof + "'");
        for (const auto& e : track.events) {
            if (!dof.has_label(e.label))
                throw ValidationError("clip '" + clip.name + "': dof '" + track.dof + "' has no label '" +
                                      e.label + "'");
        }
    }
}

std::pair<double, double> key_tangents(const Curve& curve, std::size_t i) {
    const auto& keys = curve.keys;
    const auto& k = keys[i];
    const bool first = i == 0;
    const bool last = i + 1 == keys.size();
    switch (k.mode) {
        case TangentMode::Custom:
            return {k.in_tangent.value_or(0.0), k.out_tangent.value_or(0.0)};
        case TangentMode::Linear: {
            if (first && last) return {0.0, 0.0};
            const double in = first ? chord(k, keys[i + 1]) : chord(keys[i - 1], k);
            const double out = last ? chord(keys[i - 1], k) : chord(k, keys[i + 1]);
            return {in, out};
        }
        case TangentMode::Smooth: {
            if (first || last) return {0.0, 0.0};
            const double m = chord(keys[i - 1], keys[i + 1]);
            return {m, m};
        }
    }
    return {0.0, 0.0};
}

double sample_curve(const Curve& curve, double t) {
    const auto& keys = curve.keys;
    if (t <= keys.front().time) return keys.front().value;
    if (t >= keys.back().time) return keys.back().value;

    const auto upper = std::upper_bound(keys.begin(), keys.end(), t,
                                        [](double time, const Keyframe& k) { return time < k.time; });
    const auto i1 = static_cast<std::size_t>(upper - keys.begin());
    const std::size_t i0 = i1 - 1;
    const auto& k0 = keys[i0];
    const auto& k1 = keys[i1];
    if (t == k0.time) return k0.value;

    const double h = k1.time - k0.time;
    const double s = (t - k0.time) / h;
    const double m0 = key_tangents(curve, i0).second;
    const double m1 = key_tangents(curve, i1).first;

    const double s2 = s * s;
    const double s3 = s2 * s;
    const double h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    const double h10 = s3 - 2.0 * s2 + s;
    const double h01 = -2.0 * s3 + 3.0 * s2;
    const double h11 = s3 - s2;
    return h00 * k0.value + h10 * h * m0 + h01 * k1.value + h11 * h * m1;
}

PartialFrame sample_clip(const AnimationClip& clip, double t) {
    PartialFrame frame;
    for (const auto& c : clip.curves) frame.set(c.dof, continuous(sample_curve(c, t)));
    for (const auto& track : clip.tracks) {
        const DiscreteEvent* current = nullptr;
        for (const auto& e : track.events) {
            if (e.time > t) break;
            current = &e;
        }
        if (current) frame.set(track.dof, discrete(current->label));
    }
    return frame;
}

AnimationClip time_warp(const AnimationClip& clip, const std::map<std::string, double>& anchor_targets) {
    std::vector<std::pair<double, double>> points{{0.0, 0.0}};
    bool identity = true;
    for (const auto& [name, target] : anchor_targets) {
        const auto it = std::find_if(clip.anchors.begin(), clip.anchors.end(),
                                     [&](const Anchor& a) { return a.name == name; });
        if (it == clip.anchors.end()) throw ValidationError("unknown anchor '" + name + "'");
        if (!std::isfinite(target) || target < 0.0 || target > clip.duration)
            throw ValidationError("anchor '" + name + "' target outside [0, duration]");
        if (target != it->time) identity = false;
        points.emplace_back(it->time, target);
    }
    if (identity) return clip;

    points.emplace_back(clip.duration, clip.duration);
    std::sort(points.begin(), points.end());
    points.erase(std::unique(points.begin(), points.end()), points.end());
    for (std::size_t i = 1; i < points.size(); ++i) {
        if (!(points[i].first > points[i - 1].first) || !(points[i].second > points[i - 1].second))
            throw ValidationError("anchor targets out of order");
    }
    const TimeMap warp(std::move(points));

    AnimationClip out = clip;
    for (std::size_t c = 0; c < clip.curves.size(); ++c) {
        const auto& src = clip.curves[c];
        auto& dst = out.curves[c];
        for (std::size_t i = 0; i < src.keys.size(); ++i) {
            const auto [in, out_tangent] = key_tangents(src, i);
            auto& key = dst.keys[i];
            key.time = warp(src.keys[i].time);
            key.mode = TangentMode::Custom;
            key.in_tangent = in / warp.slope_at(src.keys[i].time, true);
            key.out_tangent = out_tangent / warp.slope_at(src.keys[i].time, false);
        }
    }
    for (auto& track : out.tracks) {
        for (auto& e : track.events) e.time = warp(e.time);
    }
    for (auto& a : out.anchors) {
        const auto it = anchor_targets.find(a.name);
        a.time = it != anchor_targets.end() ? it->second : warp(a.time);
    }
    return out;
}

AnimationClip load_clip(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("clip: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("clip: top level must be an object");

    AnimationClip clip;
    clip.name = get_string(doc, "name", "clip");
    const std::string where = "clip '" + clip.name + "'";
    clip.duration = get_number(doc, "duration", where);
    for (const auto& jc : get_array(doc, "curves", where)) {
        Curve c;
        c.dof = get_string(jc, "dof", where + " curve");
        for (const auto& jk : get_array(jc, "keys", where + " curve '" + c.dof + "'")) {
            Keyframe k;
            k.time = get_number(jk, "t", where + " key");
            k.value = get_number(jk, "v", where + " key");
            if (jk.contains("mode")) k.mode = parse_mode(get_string(jk, "mode", where + " key"));
            if (jk.contains("in")) k.in_tangent = get_number(jk, "in", where + " key");
            if (jk.contains("out")) k.out_tangent = get_number(jk, "out", where + " key");
            c.keys.push_back(k);
        }
        clip.curves.push_back(std::move(c));
    }
    for (const auto& jt : get_array(doc, "tracks", where)) {
        DiscreteTrack track;
        track.dof = get_string(jt, "dof", where + " track");
        for (const auto& je : get_array(jt, "events", where + " track")) {
            track.events.push_back({get_number(je, "t", where + " event"), get_string(je, "label", where + " event")});
        }
        clip.tracks.push_back(std::move(track));
    }
    for (const auto& ja : get_array(doc, "anchors", where)) {
        clip.anchors.push_back({get_string(ja, "name", where + " anchor"), get_number(ja, "t", where + " anchor")});
    }
    validate(clip);
    return clip;
}

AnimationClip load_clip_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open clip file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return load_clip(ss.str());
}

std::string serialize(const AnimationClip& clip) {
    json curves = json::array();
    for (const auto& c : clip.curves) {
        json keys = json::array();
        for (const auto& k : c.keys) {
            json jk{{"t", k.time}, {"v", k.value}, {"mode", mode_name(k.mode)}};
            if (k.in_tangent) jk["in"] = *k.in_tangent;
            if (k.out_tangent) jk["out"] = *k.out_tangent;
            keys.push_back(std::move(jk));
        }
        curves.push_back({{"dof", c.dof}, {"keys", std::move(keys)}});
    }
    json tracks = json::array();
    for (const auto& t : clip.tracks) {
        json events = json::array();
        for (const auto& e : t.events) events.push_back({{"t", e.time}, {"label", e.label}});
        tracks.push_back({{"dof", t.dof}, {"events", std::move(events)}});
    }
    json anchors = json::array();
    for (const auto& a : clip.anchors) anchors.push_back({{"name", a.name}, {"t", a.time}});
    return json{{"name", clip.name},
                {"duration", clip.duration},
                {"curves", std::move(curves)},
                {"tracks", std::move(tracks)},
                {"anchors", std::move(anchors)}}
        .dump(2);
}

void ClipLibrary::add(AnimationClip clip) {
    validate(clip);
    auto name = clip.name;
    clips_.insert_or_assign(std::move(name), std::make_shared<const AnimationClip>(std::move(clip)));
}

const AnimationClip* ClipLibrary::find(std::string_view name) const {
    const auto it = clips_.find(name);
    return it == clips_.end() ? nullptr : it->second.get();
}

std::shared_ptr<const AnimationClip> ClipLibrary::share(std::string_view name) const {
    const auto it = clips_.find(name);
    return it == clips_.end() ? nullptr : it->second;
}

}  // namespace nutty
