#include <cmath>

#include "json.hpp"
#include "nutty/engine.hpp"
#include "nutty/error.hpp"

namespace nutty {

using nlohmann::json;

namespace {

struct Context {
    const EmbodimentSpec& spec;
    const ClipLibrary& assets;
    const ProgramExtensions& extensions;
    std::string where;

    [[noreturn]] void fail(const std::string& what) const { throw CompileError(where + ": " + what); }

    double number(const json& j, const char* key, double fallback) const {
        if (!j.contains(key)) return fallback;
        if (!j[key].is_number()) fail(std::string("'") + key + "' must be a number");
        const double v = j[key].get<double>();
        if (!std::isfinite(v)) fail(std::string("'") + key + "' must be finite");
        return v;
    }

    double required_number(const json& j, const char* key) const {
        if (!j.contains(key)) fail(std::string("missing '") + key + "'");
        return number(j, key, 0.0);
    }

    std::string string(const json& j, const char* key) const {
        if (!j.contains(key) || !j[key].is_string()) fail(std::string("missing string '") + key + "'");
        return j[key].get<std::string>();
    }

    bool boolean(const json& j, const char* key, bool fallback) const {
        if (!j.contains(key)) return fallback;
        if (!j[key].is_boolean()) fail(std::string("'") + key + "' must be a boolean");
        return j[key].get<bool>();
    }

    const DoFDescriptor& continuous_dof(const std::string& name) const {
        const auto* dof = spec.find(name);
        if (!dof) fail("unknown dof '" + name + "'");
        if (!dof->continuous()) fail("dof '" + name + "' is discrete");
        return *dof;
    }
};

nmf::FilterParams character_params(const json& j, const Context& ctx) {
    nmf::FilterParams p;
    p.smoothness = 0.95;
    p.responsiveness = 1.0;
    if (j.contains("preset")) {
        const auto preset = nmf::filter_preset(ctx.string(j, "preset"));
        if (!preset) ctx.fail("unknown filter preset '" + j["preset"].get<std::string>() + "'");
        p = *preset;
    }
    if (j.contains("limiter")) {
        const auto name = ctx.string(j, "limiter");
        if (name == "tanh") {
            p.limiter = nmf::Limiter::Tanh;
        } else if (name == "hard") {
            p.limiter = nmf::Limiter::Hard;
        } else {
            ctx.fail("unknown limiter '" + name + "'");
        }
    }
    p.smoothness = ctx.number(j, "smoothness", p.smoothness);
    p.responsiveness = ctx.number(j, "responsiveness", p.responsiveness);
    p.beta = static_cast<int>(ctx.number(j, "beta", p.beta));
    p.stabilizer_enabled = ctx.boolean(j, "stabilizer", p.stabilizer_enabled);
    return p;
}

// Builds one filter channel per DoF. Range and limits always come from the
// embodiment; the order defaults to the highest the DoF's limits support.
std::unique_ptr<NMFBank> make_nmf_bank(const json& j, const Context& ctx) {
    std::vector<std::string> names;
    if (j.contains("channels")) {
        if (!j["channels"].is_array()) ctx.fail("'channels' must be an array");
        for (const auto& c : j["channels"]) {
            if (!c.is_string()) ctx.fail("'channels' must hold dof names");
            names.push_back(c.get<std::string>());
        }
    } else {
        for (const auto& dof : ctx.spec.dofs()) {
            if (dof.continuous() && dof.limits.velocity) names.push_back(dof.name);
        }
    }
    std::optional<int> order;
    if (j.contains("order")) order = static_cast<int>(ctx.required_number(j, "order"));
    const nmf::FilterParams base = character_params(j, ctx);
    const AnimationFrame rest = default_frame(ctx.spec);

    std::vector<NMFBank::Channel> channels;
    for (const auto& name : names) {
        const auto& dof = ctx.continuous_dof(name);
        const auto& lim = dof.limits;
        if (!lim.velocity) ctx.fail("dof '" + name + "' has no velocity limit for the motion filter");
        const int supported = lim.acceleration ? (lim.jerk ? 3 : 2) : 1;
        const int chosen = order.value_or(supported);
        if (chosen < 1 || chosen > 3) ctx.fail("order must be 1, 2 or 3");
        if (chosen > supported) ctx.fail("dof '" + name + "' lacks the limits for order " + std::to_string(chosen));

        nmf::FilterParams p = base;
        p.order = static_cast<nmf::Order>(chosen);
        p.p_min = dof.min;
        p.p_max = dof.max;
        p.velocity_limit = *lim.velocity;
        p.acceleration_limit = lim.acceleration.value_or(p.acceleration_limit);
        p.jerk_limit = lim.jerk.value_or(p.jerk_limit);
        try {
            p.validate();
        } catch (const ValidationError& e) {
            ctx.fail("dof '" + name + "': " + e.what());
        }
        const double initial = std::get<ContinuousValue>(rest.channels[*ctx.spec.index_of(name)]).position;
        channels.push_back({name, p, initial});
    }
    return std::make_unique<NMFBank>(std::move(channels));
}

PartialFrame parse_pose(const json& j, const Context& ctx) {
    PartialFrame pose;
    if (!j.is_object()) ctx.fail("'pose' must be an object");
    for (const auto& [name, value] : j.items()) {
        const auto* dof = ctx.spec.find(name);
        if (!dof) ctx.fail("unknown dof '" + name + "'");
        if (dof->continuous()) {
            if (!value.is_number()) ctx.fail("dof '" + name + "' needs a number");
            pose.set(name, continuous(value.get<double>()));
        } else {
            if (!value.is_string() || !dof->has_label(value.get<std::string>()))
                ctx.fail("dof '" + name + "' needs one of its labels");
            pose.set(name, discrete(value.get<std::string>()));
        }
    }
    return pose;
}

std::unique_ptr<AnimationBlock> make_block(const json& j, const Context& ctx) {
    const auto kind = ctx.string(j, "kind");
    if (kind == "clip_player") {
        const auto name = ctx.string(j, "clip");
        auto clip = ctx.assets.share(name);
        if (!clip) ctx.fail("unknown clip '" + name + "'");
        try {
            validate(*clip, ctx.spec);
        } catch (const ValidationError& e) {
            ctx.fail(e.what());
        }
        auto player = std::make_unique<ClipPlayer>(std::move(clip), ctx.boolean(j, "loop", false),
                                                   ctx.number(j, "speed", 1.0));
        player->set_library(&ctx.assets);
        return player;
    }
    if (kind == "sine") {
        const auto dof = ctx.string(j, "dof");
        ctx.continuous_dof(dof);
        return std::make_unique<SineGenerator>(dof, ctx.required_number(j, "amplitude"),
                                               ctx.required_number(j, "frequency"), ctx.number(j, "phase", 0.0),
                                               ctx.number(j, "offset", 0.0));
    }
    if (kind == "noise") {
        const auto dof = ctx.string(j, "dof");
        ctx.continuous_dof(dof);
        const double alpha = ctx.number(j, "alpha", 0.1);
        if (alpha < 0.0 || alpha > 1.0) ctx.fail("'alpha' must lie in [0, 1]");
        const double seed = ctx.number(j, "seed", 0.0);
        if (seed < 0.0) ctx.fail("'seed' must be non-negative");
        auto block = std::make_unique<NoiseGenerator>(dof, ctx.number(j, "mean", 0.0),
                                                      ctx.required_number(j, "stddev"), alpha,
                                                      static_cast<std::uint64_t>(seed));
        if (!ctx.boolean(j, "enabled", true)) block->set_param("enabled", 0.0);
        return block;
    }
    if (kind == "constant_pose") {
        if (!j.contains("pose")) ctx.fail("missing 'pose'");
        return std::make_unique<ConstantPose>(parse_pose(j["pose"], ctx), &ctx.spec);
    }
    if (kind == "gain_offset") {
        std::vector<std::string> channels;
        if (j.contains("channels")) {
            for (const auto& c : j["channels"]) {
                if (!c.is_string()) ctx.fail("'channels' must hold dof names");
                ctx.continuous_dof(c.get<std::string>());
                channels.push_back(c.get<std::string>());
            }
        }
        return std::make_unique<GainOffset>(ctx.number(j, "gain", 1.0), ctx.number(j, "offset", 0.0),
                                            std::move(channels));
    }
    if (kind == "contrast") {
        std::map<std::string, double> reference;
        const AnimationFrame rest = default_frame(ctx.spec);
        for (std::size_t i = 0; i < ctx.spec.size(); ++i) {
            if (const auto* c = std::get_if<ContinuousValue>(&rest.channels[i]))
                reference[ctx.spec.dofs()[i].name] = c->position;
        }
        if (j.contains("reference")) {
            const auto pose = parse_pose(j["reference"], ctx);
            for (const auto& [name, _] : pose.channels) {
                const auto p = pose.position(name);
                if (!p) ctx.fail("reference for '" + name + "' must be a number");
                reference[name] = *p;
            }
        }
        return std::make_unique<Contrast>(ctx.number(j, "gain", 1.0), std::move(reference));
    }
    if (kind == "nmf_bank") return make_nmf_bank(j, ctx);
    if (const auto it = ctx.extensions.blocks.find(kind); it != ctx.extensions.blocks.end())
        return it->second(j.dump(), ctx.spec);
    ctx.fail("unknown block kind '" + kind + "'");
}

std::unique_ptr<Stage2Processor> make_stage2(const json& j, const Context& ctx) {
    const auto kind = ctx.string(j, "kind");
    if (kind == "nmf_bank") return make_nmf_bank(j, ctx);
    if (kind == "limit_enforcer") return std::make_unique<LimitEnforcer>(ctx.spec);
    if (const auto it = ctx.extensions.stage2.find(kind); it != ctx.extensions.stage2.end())
        return it->second(j.dump(), ctx.spec);
    ctx.fail("unknown stage-2 kind '" + kind + "'");
}

}  // namespace

AnimationProgram compile_program(std::string_view text, const EmbodimentSpec& spec, const ClipLibrary& assets,
                                 const ProgramExtensions& extensions) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("program: ") + e.what());
    }
    Context ctx{spec, assets, extensions, "program"};
    if (!doc.is_object()) ctx.fail("top level must be an object");
    for (const auto& [key, _] : doc.items()) {
        if (key != "level" && key != "layers" && key != "stage2") ctx.fail("unknown key '" + key + "'");
    }

    AnimationProgram program;
    const double level = ctx.required_number(doc, "level");
    if (level != std::floor(level) || level < 0 || level > 3) ctx.fail("'level' must be 0, 1, 2 or 3");
    program.level = static_cast<int>(level);

    if (!doc.contains("layers") || !doc["layers"].is_array()) ctx.fail("missing array 'layers'");
    for (std::size_t l = 0; l < doc["layers"].size(); ++l) {
        const auto& jl = doc["layers"][l];
        ctx.where = "layer " + std::to_string(l);
        if (!jl.is_object()) ctx.fail("must be an object");
        Layer layer;
        const std::string blend_name = jl.contains("blend") ? ctx.string(jl, "blend") : "override";
        if (blend_name == "override") {
            layer.blend = BlendOp::Override;
        } else if (blend_name == "additive") {
            layer.blend = BlendOp::Additive;
        } else if (blend_name == "average") {
            layer.blend = BlendOp::WeightedAverage;
        } else {
            ctx.fail("unknown blend '" + blend_name + "'");
        }
        layer.weight = ctx.number(jl, "weight", layer.blend == BlendOp::WeightedAverage ? 0.5 : 1.0);
        if (!jl.contains("blocks") || !jl["blocks"].is_array()) ctx.fail("missing array 'blocks'");
        for (std::size_t b = 0; b < jl["blocks"].size(); ++b) {
            const auto& jb = jl["blocks"][b];
            ctx.where = "layer " + std::to_string(l) + ", block " + std::to_string(b);
            if (!jb.is_object()) ctx.fail("must be an object");
            BlockSlot slot;
            slot.block = make_block(jb, ctx);
            if (jb.contains("bindings")) {
                if (!jb["bindings"].is_object()) ctx.fail("'bindings' must be an object");
                for (const auto& [input, param] : jb["bindings"].items()) {
                    if (!param.is_string()) ctx.fail("binding '" + input + "' must name a parameter");
                    slot.bindings[input] = param.get<std::string>();
                }
            }
            layer.blocks.push_back(std::move(slot));
        }
        program.layers.push_back(std::move(layer));
    }
    if (doc.contains("stage2")) {
        if (!doc["stage2"].is_array()) ctx.fail("'stage2' must be an array");
        for (std::size_t s = 0; s < doc["stage2"].size(); ++s) {
            ctx.where = "stage2 " + std::to_string(s);
            program.stage2.push_back(make_stage2(doc["stage2"][s], ctx));
        }
    }
    check_structure(program);
    return program;
}

}  // namespace nutty
