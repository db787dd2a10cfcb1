#include "nutty/embodiment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "nutty/error.hpp"

namespace nutty {

using nlohmann::json;

namespace {

constexpr std::array kDimensionNames{"stationary", "spatial", "display", "audible"};
constexpr std::array kAxisNames{"x", "y", "z", "yaw", "pitch", "roll"};

[[noreturn]] void fail_dof(const std::string& dof, const std::string& what) {
    throw ValidationError("dof '" + dof + "': " + what);
}

template <typename Enum, std::size_t N>
Enum parse_enum(const json& j, const std::array<const char*, N>& names, const std::string& dof,
                const char* field) {
    if (!j.is_string()) throw ParseError("dof '" + dof + "': '" + field + "' must be a string");
    const auto s = j.get<std::string>();
    for (std::size_t i = 0; i < N; ++i) {
        if (s == names[i]) return static_cast<Enum>(i);
    }
    throw ParseError("dof '" + dof + "': unknown " + field + " '" + s + "'");
}

double number(const json& j, const std::string& dof, const char* field) {
    if (!j.is_number()) throw ParseError("dof '" + dof + "': '" + field + "' must be a number");
    return j.get<double>();
}

void reject_unknown_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                         const std::string& where) {
    for (const auto& [key, _] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ParseError(where + ": unknown key '" + key + "'");
    }
}

DoFDescriptor parse_dof(const json& j, std::size_t index) {
    if (!j.is_object()) throw ParseError("dofs[" + std::to_string(index) + "] is not an object");
    if (!j.contains("name") || !j["name"].is_string())
        throw ParseError("dofs[" + std::to_string(index) + "]: missing string 'name'");

    DoFDescriptor dof;
    dof.name = j["name"].get<std::string>();
    reject_unknown_keys(j, {"name", "dimension", "kind", "range", "labels", "limits", "axis", "parent"},
                        "dof '" + dof.name + "'");

    if (!j.contains("dimension")) throw ParseError("dof '" + dof.name + "': missing 'dimension'");
    dof.dimension = parse_enum<Dimension>(j["dimension"], kDimensionNames, dof.name, "dimension");
    if (j.contains("kind")) {
        const std::array<const char*, 2> kinds{"continuous", "discrete"};
        dof.kind = parse_enum<ValueKind>(j["kind"], kinds, dof.name, "kind");
    }
    if (j.contains("range")) {
        if (!dof.continuous()) throw ParseError("dof '" + dof.name + "': discrete dof cannot carry 'range'");
        const auto& r = j["range"];
        if (!r.is_array() || r.size() != 2)
            throw ParseError("dof '" + dof.name + "': 'range' must be [min, max]");
        dof.min = number(r[0], dof.name, "range");
        dof.max = number(r[1], dof.name, "range");
    } else if (dof.continuous()) {
        throw ParseError("dof '" + dof.name + "': continuous dof needs 'range'");
    }
    if (j.contains("labels")) {
        const auto& l = j["labels"];
        if (!l.is_array()) throw ParseError("dof '" + dof.name + "': 'labels' must be an array");
        for (const auto& s : l) {
            if (!s.is_string()) throw ParseError("dof '" + dof.name + "': labels must be strings");
            dof.labels.push_back(s.get<std::string>());
        }
    }
    if (j.contains("limits")) {
        const auto& l = j["limits"];
        if (!l.is_object()) throw ParseError("dof '" + dof.name + "': 'limits' must be an object");
        reject_unknown_keys(l, {"velocity", "acceleration", "jerk"}, "dof '" + dof.name + "' limits");
        if (l.contains("velocity")) dof.limits.velocity = number(l["velocity"], dof.name, "velocity");
        if (l.contains("acceleration"))
            dof.limits.acceleration = number(l["acceleration"], dof.name, "acceleration");
        if (l.contains("jerk")) dof.limits.jerk = number(l["jerk"], dof.name, "jerk");
    }
    if (j.contains("axis")) dof.axis = parse_enum<SpatialAxis>(j["axis"], kAxisNames, dof.name, "axis");
    if (j.contains("parent")) {
        if (!j["parent"].is_string()) throw ParseError("dof '" + dof.name + "': 'parent' must be a string");
        dof.parent = j["parent"].get<std::string>();
    }
    return dof;
}

}  // namespace

double DoFDescriptor::clamp(double x) const { return std::clamp(x, min, max); }

bool DoFDescriptor::has_label(std::string_view label) const {
    return std::find(labels.begin(), labels.end(), label) != labels.end();
}

void validate(const DoFDescriptor& dof) {
    if (dof.name.empty()) throw ValidationError("dof with empty name");
    if (dof.continuous()) {
        if (!std::isfinite(dof.min) || !std::isfinite(dof.max)) fail_dof(dof.name, "range must be finite");
        if (!(dof.min < dof.max)) fail_dof(dof.name, "range requires min < max");
        if (!dof.labels.empty()) fail_dof(dof.name, "continuous dof cannot carry labels");
        for (const auto& [value, what] : {std::pair{dof.limits.velocity, "velocity"},
                                          std::pair{dof.limits.acceleration, "acceleration"},
                                          std::pair{dof.limits.jerk, "jerk"}}) {
            if (value && !(std::isfinite(*value) && *value > 0.0))
                fail_dof(dof.name, std::string(what) + " limit must be positive");
        }
    } else {
        if (dof.labels.empty()) fail_dof(dof.name, "discrete dof needs a non-empty label set");
        if (!dof.limits.empty()) fail_dof(dof.name, "discrete dof cannot carry kinematic limits");
        std::set<std::string> seen(dof.labels.begin(), dof.labels.end());
        if (seen.size() != dof.labels.size()) fail_dof(dof.name, "duplicate labels");
    }
    if (dof.dimension == Dimension::Spatial && !dof.axis) fail_dof(dof.name, "spatial dof needs an axis");
    if (dof.dimension != Dimension::Spatial && dof.axis) fail_dof(dof.name, "only spatial dofs take an axis");
}

EmbodimentSpec::EmbodimentSpec(std::string name, std::vector<DoFDescriptor> dofs)
    : name_(std::move(name)), dofs_(std::move(dofs)) {
    std::set<std::string_view> names;
    std::set<SpatialAxis> axes;
    for (const auto& dof : dofs_) {
        validate(dof);
        if (!names.insert(dof.name).second) fail_dof(dof.name, "duplicate name");
        if (dof.axis && !axes.insert(*dof.axis).second)
            fail_dof(dof.name, "axis '" + std::string(to_string(*dof.axis)) + "' already used");
    }
}

std::optional<std::size_t> EmbodimentSpec::index_of(std::string_view dof) const {
    for (std::size_t i = 0; i < dofs_.size(); ++i) {
        if (dofs_[i].name == dof) return i;
    }
    return std::nullopt;
}

const DoFDescriptor* EmbodimentSpec::find(std::string_view dof) const {
    const auto i = index_of(dof);
    return i ? &dofs_[*i] : nullptr;
}

const DoFDescriptor& EmbodimentSpec::at(std::string_view dof) const {
    if (const auto* d = find(dof)) return *d;
    throw ValidationError("unknown dof '" + std::string(dof) + "' in embodiment '" + name_ + "'");
}

EmbodimentSpec load_embodiment(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("embodiment: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("embodiment: top level must be an object");
    reject_unknown_keys(doc, {"name", "dofs"}, "embodiment");
    if (!doc.contains("name") || !doc["name"].is_string()) throw ParseError("embodiment: missing string 'name'");
    if (!doc.contains("dofs") || !doc["dofs"].is_array()) throw ParseError("embodiment: missing array 'dofs'");

    std::vector<DoFDescriptor> dofs;
    for (std::size_t i = 0; i < doc["dofs"].size(); ++i) dofs.push_back(parse_dof(doc["dofs"][i], i));
    return EmbodimentSpec(doc["name"].get<std::string>(), std::move(dofs));
}

EmbodimentSpec load_embodiment_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open embodiment file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return load_embodiment(ss.str());
}

std::string serialize(const EmbodimentSpec& spec) {
    json dofs = json::array();
    for (const auto& d : spec.dofs()) {
        json j;
        j["name"] = d.name;
        j["dimension"] = kDimensionNames[static_cast<std::size_t>(d.dimension)];
        j["kind"] = d.continuous() ? "continuous" : "discrete";
        if (d.continuous()) {
            j["range"] = {d.min, d.max};
        } else {
            j["labels"] = d.labels;
        }
        if (!d.limits.empty()) {
            json l = json::object();
            if (d.limits.velocity) l["velocity"] = *d.limits.velocity;
            if (d.limits.acceleration) l["acceleration"] = *d.limits.acceleration;
            if (d.limits.jerk) l["jerk"] = *d.limits.jerk;
            j["limits"] = l;
        }
        if (d.axis) j["axis"] = kAxisNames[static_cast<std::size_t>(*d.axis)];
        if (d.parent) j["parent"] = *d.parent;
        dofs.push_back(std::move(j));
    }
    return json{{"name", spec.name()}, {"dofs", dofs}}.dump(2);
}

KinematronicsProfile profile(const EmbodimentSpec& spec) {
    KinematronicsProfile p;
    for (const auto& d : spec.dofs()) {
        switch (d.dimension) {
            case Dimension::Stationary: ++p.stationary; break;
            case Dimension::Spatial: ++p.spatial; break;
            case Dimension::Display: ++p.display; break;
            case Dimension::Audible: ++p.audible; break;
        }
    }
    return p;
}

std::string_view to_string(Dimension d) { return kDimensionNames[static_cast<std::size_t>(d)]; }
std::string_view to_string(SpatialAxis a) { return kAxisNames[static_cast<std::size_t>(a)]; }

}  // namespace nutty
