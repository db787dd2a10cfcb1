#include "nutty/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "json.hpp"
#include "nutty/error.hpp"

namespace nutty {

using nlohmann::json;

namespace {

std::optional<double> as_real(const InputValue& v) {
    if (const auto* d = std::get_if<double>(&v)) return *d;
    return std::nullopt;
}

std::optional<bool> as_bool(const InputValue& v) {
    if (const auto* d = std::get_if<double>(&v)) return *d != 0.0;
    const auto& s = std::get<std::string>(v);
    if (s == "on" || s == "true" || s == "yes" || s == "1") return true;
    if (s == "off" || s == "false" || s == "no" || s == "0") return false;
    return std::nullopt;
}

bool assign_real(double& target, const InputValue& v) {
    const auto r = as_real(v);
    if (!r || !std::isfinite(*r)) return false;
    target = *r;
    return true;
}

bool assign_bool(bool& target, const InputValue& v) {
    const auto b = as_bool(v);
    if (!b) return false;
    target = *b;
    return true;
}

ContinuousValue filter_value(const nmf::FilterOutput& o) { return ContinuousValue{o.x, o.v, o.a, o.j}; }

}  // namespace

void EngineInputs::merge(const EngineInputs& other) {
    for (const auto& [k, v] : other.reals) reals[k] = v;
    for (const auto& [k, v] : other.labels) labels[k] = v;
    commands.insert(commands.end(), other.commands.begin(), other.commands.end());
}

PartialFrame blend(const PartialFrame& base, const PartialFrame& overlay, BlendOp op, double weight) {
    PartialFrame out = base;
    for (const auto& [name, value] : overlay.channels) {
        const auto it = out.channels.find(name);
        if (it == out.channels.end() || op == BlendOp::Override) {
            out.channels.insert_or_assign(name, value);
            continue;
        }
        auto* b = std::get_if<ContinuousValue>(&it->second);
        const auto* o = std::get_if<ContinuousValue>(&value);
        if (!b || !o) {
            // Labels cannot be summed or averaged.
            if (op == BlendOp::Additive || weight >= 0.5) it->second = value;
            continue;
        }
        if (op == BlendOp::Additive) {
            b->position += o->position;
            if (b->velocity && o->velocity) {
                *b->velocity += *o->velocity;
            } else if (o->velocity) {
                b->velocity = o->velocity;
            }
            b->acceleration.reset();
            b->jerk.reset();
        } else {
            b->position = (1.0 - weight) * b->position + weight * o->position;
            if (b->velocity && o->velocity) {
                b->velocity = (1.0 - weight) * *b->velocity + weight * *o->velocity;
            } else {
                b->velocity.reset();
            }
            b->acceleration.reset();
            b->jerk.reset();
        }
    }
    return out;
}

bool AnimationBlock::set_param(std::string_view, const InputValue&) { return false; }

// ClipPlayer

ClipPlayer::ClipPlayer(std::shared_ptr<const AnimationClip> clip, bool loop, double speed)
    : clip_(std::move(clip)), loop_(loop), speed_(speed) {}

PartialFrame ClipPlayer::evaluate(const PartialFrame*, double delta_time) {
    if (!enabled_ || !clip_) return {};
    playhead_ += delta_time * speed_;
    const double duration = clip_->duration;
    if (loop_ && duration > 0.0) {
        playhead_ = std::fmod(playhead_, duration);
        if (playhead_ < 0.0) playhead_ += duration;
    } else {
        playhead_ = std::clamp(playhead_, 0.0, duration);
    }
    return sample_clip(*clip_, playhead_);
}

bool ClipPlayer::set_param(std::string_view name, const InputValue& value) {
    if (name == "clip" || name == "play") {
        const auto* label = std::get_if<std::string>(&value);
        if (!label || !library_) return false;
        auto clip = library_->share(*label);
        if (!clip) return false;
        clip_ = std::move(clip);
        playhead_ = 0.0;
        enabled_ = true;
        return true;
    }
    if (name == "reset" || name == "restart") {
        playhead_ = 0.0;
        return true;
    }
    if (name == "loop") return assign_bool(loop_, value);
    if (name == "speed") return assign_real(speed_, value);
    if (name == "enabled") return assign_bool(enabled_, value);
    return false;
}

// SineGenerator

SineGenerator::SineGenerator(std::string dof, double amplitude, double frequency, double phase, double offset)
    : dof_(std::move(dof)), amplitude_(amplitude), frequency_(frequency), phase_(phase), offset_(offset) {}

PartialFrame SineGenerator::evaluate(const PartialFrame*, double delta_time) {
    time_ += delta_time;
    if (!enabled_) return {};
    PartialFrame out;
    const double w = 2.0 * std::numbers::pi * frequency_;
    const double arg = w * time_ + phase_;
    ContinuousValue value{offset_ + amplitude_ * std::sin(arg), amplitude_ * w * std::cos(arg), {}, {}};
    out.set(dof_, value);
    return out;
}

bool SineGenerator::set_param(std::string_view name, const InputValue& value) {
    if (name == "amplitude") return assign_real(amplitude_, value);
    if (name == "frequency") return assign_real(frequency_, value);
    if (name == "phase") return assign_real(phase_, value);
    if (name == "offset") return assign_real(offset_, value);
    if (name == "enabled") return assign_bool(enabled_, value);
    return false;
}

// NoiseGenerator

NoiseGenerator::NoiseGenerator(std::string dof, double mean, double stddev, double alpha, std::uint64_t seed)
    : dof_(std::move(dof)), mean_(mean), stddev_(stddev), alpha_(alpha), rng_(seed), state_(mean) {}

// Marsaglia polar method on 53-bit uniforms, so sequences do not depend on
// the standard library's distribution implementation.
double NoiseGenerator::gaussian() {
    if (spare_) {
        const double s = *spare_;
        spare_.reset();
        return s;
    }
    while (true) {
        const double u = 2.0 * (static_cast<double>(rng_() >> 11) * 0x1.0p-53) - 1.0;
        const double v = 2.0 * (static_cast<double>(rng_() >> 11) * 0x1.0p-53) - 1.0;
        const double s = u * u + v * v;
        if (s > 0.0 && s < 1.0) {
            const double m = std::sqrt(-2.0 * std::log(s) / s);
            spare_ = v * m;
            return u * m;
        }
    }
}

PartialFrame NoiseGenerator::evaluate(const PartialFrame*, double) {
    if (!enabled_) return {};
    const double sample = mean_ + stddev_ * gaussian();
    state_ = (1.0 - alpha_) * state_ + alpha_ * sample;
    PartialFrame out;
    out.set(dof_, continuous(state_));
    return out;
}

bool NoiseGenerator::set_param(std::string_view name, const InputValue& value) {
    if (name == "mean") return assign_real(mean_, value);
    if (name == "stddev") return assign_real(stddev_, value);
    if (name == "alpha") {
        double a = alpha_;
        if (!assign_real(a, value) || a < 0.0 || a > 1.0) return false;
        alpha_ = a;
        return true;
    }
    if (name == "enabled") return assign_bool(enabled_, value);
    return false;
}

// ConstantPose

bool ConstantPose::set_param(std::string_view name, const InputValue& value) {
    if (spec_) {
        const auto* dof = spec_->find(name);
        if (!dof) return false;
        const auto* label = std::get_if<std::string>(&value);
        if (dof->continuous() == (label != nullptr)) return false;
        if (label && !dof->has_label(*label)) return false;
    }
    if (const auto* r = std::get_if<double>(&value)) {
        if (!std::isfinite(*r)) return false;
        pose_.set(std::string(name), continuous(*r));
    } else {
        pose_.set(std::string(name), discrete(std::get<std::string>(value)));
    }
    return true;
}

// GainOffset

GainOffset::GainOffset(double gain, double offset, std::vector<std::string> channels)
    : gain_(gain), offset_(offset), channels_(std::move(channels)) {}

PartialFrame GainOffset::evaluate(const PartialFrame* input, double) {
    if (!input) throw StateError("gain_offset evaluated without input");
    PartialFrame out = *input;
    for (auto& [name, value] : out.channels) {
        auto* c = std::get_if<ContinuousValue>(&value);
        if (!c) continue;
        if (!channels_.empty() && std::find(channels_.begin(), channels_.end(), name) == channels_.end()) continue;
        c->position = gain_ * c->position + offset_;
        if (c->velocity) *c->velocity *= gain_;
        if (c->acceleration) *c->acceleration *= gain_;
        if (c->jerk) *c->jerk *= gain_;
    }
    return out;
}

bool GainOffset::set_param(std::string_view name, const InputValue& value) {
    if (name == "gain") return assign_real(gain_, value);
    if (name == "offset") return assign_real(offset_, value);
    return false;
}

// Contrast

Contrast::Contrast(double gain, std::map<std::string, double> reference)
    : gain_(gain), reference_(std::move(reference)) {}

PartialFrame Contrast::evaluate(const PartialFrame* input, double) {
    if (!input) throw StateError("contrast evaluated without input");
    PartialFrame out = *input;
    for (auto& [name, value] : out.channels) {
        auto* c = std::get_if<ContinuousValue>(&value);
        const auto ref = reference_.find(name);
        if (!c || ref == reference_.end()) continue;
        c->position = ref->second + gain_ * (c->position - ref->second);
        if (c->velocity) *c->velocity *= gain_;
        if (c->acceleration) *c->acceleration *= gain_;
        if (c->jerk) *c->jerk *= gain_;
    }
    return out;
}

bool Contrast::set_param(std::string_view name, const InputValue& value) {
    if (name == "gain") return assign_real(gain_, value);
    return false;
}

// NMFBank

NMFBank::NMFBank(std::vector<Channel> channels) {
    filters_.reserve(channels.size());
    for (auto& c : channels) {
        filters_.push_back({std::move(c.dof), nmf::MotionFilter(c.params, c.initial), c.initial});
    }
}

PartialFrame NMFBank::evaluate(const PartialFrame* input, double delta_time) {
    if (!input) throw StateError("nmf_bank evaluated without input");
    PartialFrame out = *input;
    for (auto& slot : filters_) {
        if (const auto p = input->position(slot.dof)) slot.set_point = *p;
        if (slot.filter.params().dt() != delta_time) {
            auto params = slot.filter.params();
            params.sample_rate = 1.0 / delta_time;
            slot.filter.set_params(params);
        }
        out.set(slot.dof, filter_value(slot.filter.step(slot.set_point)));
    }
    return out;
}

PartialFrame NMFBank::process(const PartialFrame& input, const AnimationFrame&, double delta_time) {
    return evaluate(&input, delta_time);
}

bool NMFBank::set_param(std::string_view name, const InputValue& value) {
    const auto r = as_real(value);
    if (!r) return false;
    if (name != "smoothness" && name != "responsiveness") return false;
    // Validate every channel first so a rejected value changes nothing.
    std::vector<nmf::FilterParams> updated;
    updated.reserve(filters_.size());
    for (const auto& slot : filters_) {
        auto params = slot.filter.params();
        (name == "smoothness" ? params.smoothness : params.responsiveness) = *r;
        try {
            params.validate();
        } catch (const ValidationError&) {
            return false;
        }
        updated.push_back(params);
    }
    for (std::size_t i = 0; i < filters_.size(); ++i) filters_[i].filter.set_params(updated[i]);
    return true;
}

// LimitEnforcer

PartialFrame LimitEnforcer::process(const PartialFrame& input, const AnimationFrame& last, double delta_time) {
    PartialFrame out = input;
    for (auto& [name, value] : out.channels) {
        auto* c = std::get_if<ContinuousValue>(&value);
        const auto index = spec_->index_of(name);
        if (!c || !index) continue;
        const auto& dof = spec_->dofs()[*index];
        double x = dof.clamp(c->position);
        if (dof.limits.velocity) {
            if (const auto* prev = std::get_if<ContinuousValue>(&last.channels[*index])) {
                const double step = *dof.limits.velocity * delta_time;
                x = std::clamp(x, prev->position - step, prev->position + step);
            }
        }
        c->position = x;
    }
    return out;
}

// Program structure

int required_level(const AnimationProgram& program) {
    if (!program.stage2.empty()) return 3;
    if (program.layers.size() > 1) return 2;
    if (!program.layers.empty() && program.layers.front().blocks.size() > 1) return 1;
    return 0;
}

void check_structure(const AnimationProgram& program) {
    if (program.level < 0 || program.level > 3) throw CompileError("level must be between 0 and 3");
    if (program.layers.empty()) throw CompileError("program needs at least one layer");
    for (std::size_t l = 0; l < program.layers.size(); ++l) {
        const auto& layer = program.layers[l];
        const std::string where = "layer " + std::to_string(l);
        if (layer.blocks.empty()) throw CompileError(where + ": needs at least one block");
        if (!layer.blocks.front().block->is_source())
            throw CompileError(where + ", block 0: operator '" + std::string(layer.blocks.front().block->kind()) +
                               "' has no upstream source");
        if (layer.blend == BlendOp::WeightedAverage && !(layer.weight >= 0.0 && layer.weight <= 1.0))
            throw CompileError(where + ": weight must lie in [0, 1]");
    }
    const int needed = required_level(program);
    if (needed > program.level) {
        std::string why = needed == 3   ? "stage-2 processors need level 3"
                          : needed == 2 ? "multiple layers need level 2"
                                        : "multiple blocks need level 1";
        throw CompileError("level violation: declared level " + std::to_string(program.level) + " but " + why);
    }
}

// Engine

Engine::Engine(AnimationProgram program, const EmbodimentSpec& spec)
    : program_(std::move(program)), spec_(&spec), last_(default_frame(spec)) {
    check_structure(program_);
}

void Engine::post(const EngineInputs& inputs) {
    for (const auto& [name, v] : inputs.reals) {
        if (!std::isfinite(v)) throw ValidationError("input '" + name + "' is not finite");
    }
    std::lock_guard lock(mailbox_mutex_);
    mailbox_.merge(inputs);
}

void Engine::route(const EngineInputs& inputs) {
    auto deliver = [&](const std::string& input, const InputValue& value) {
        bool bound = false;
        for (auto& layer : program_.layers) {
            for (auto& slot : layer.blocks) {
                const auto it = slot.bindings.find(input);
                if (it == slot.bindings.end()) continue;
                bound = true;
                if (!slot.block->set_param(it->second, value) && logger_)
                    logger_("block '" + std::string(slot.block->kind()) + "' rejected '" + input + "'");
            }
        }
        return bound;
    };
    for (const auto& [name, v] : inputs.reals) deliver(name, v);
    for (const auto& [name, v] : inputs.labels) deliver(name, v);
    for (const auto& command : inputs.commands) {
        const auto colon = command.find(':');
        const std::string name = command.substr(0, colon);
        const std::string arg = colon == std::string::npos ? std::string() : command.substr(colon + 1);
        if (!deliver(name, arg) && logger_) logger_("ignored unknown command '" + command + "'");
    }
}

const AnimationFrame& Engine::tick(const EngineInputs& inputs, double delta_time) {
    if (!(delta_time > 0.0) || !std::isfinite(delta_time)) throw ValidationError("delta time must be positive");
    for (const auto& [name, v] : inputs.reals) {
        if (!std::isfinite(v)) throw ValidationError("input '" + name + "' is not finite");
    }

    EngineInputs pending;
    {
        std::lock_guard lock(mailbox_mutex_);
        std::swap(pending, mailbox_);
    }
    pending.merge(inputs);
    route(pending);

    PartialFrame blended;
    for (auto& layer : program_.layers) {
        PartialFrame current;
        for (auto& slot : layer.blocks) {
            current = slot.block->evaluate(slot.block->is_source() ? nullptr : &current, delta_time);
        }
        blended = blend(blended, current, layer.blend, layer.weight);
    }
    for (auto& processor : program_.stage2) blended = processor->process(blended, last_, delta_time);

    AnimationFrame next = merge_full(last_, blended, *spec_);
    time_ += delta_time;
    next.time = time_;
    next.delta_time = delta_time;
    last_ = std::move(next);
    return last_;
}

// Frame serialization

std::string frame_to_json(const AnimationFrame& frame, const EmbodimentSpec& spec) {
    json channels = json::object();
    for (std::size_t i = 0; i < spec.size(); ++i) {
        const auto& value = frame.channels[i];
        if (const auto* c = std::get_if<ContinuousValue>(&value)) {
            channels[spec.dofs()[i].name] = c->position;
        } else {
            channels[spec.dofs()[i].name] = std::get<DiscreteValue>(value).label;
        }
    }
    return json{{"t", frame.time}, {"dt", frame.delta_time}, {"channels", std::move(channels)}}.dump();
}

void JsonLineSink::write(const AnimationFrame& frame, const EmbodimentSpec& spec) {
    *out_ << frame_to_json(frame, spec) << '\n';
}

AnimationFrame frame_from_json(std::string_view line, const EmbodimentSpec& spec) {
    json doc;
    try {
        doc = json::parse(line);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("frame: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("channels") || !doc["channels"].is_object())
        throw ParseError("frame: missing 'channels' object");
    AnimationFrame frame = default_frame(spec);
    frame.time = doc.value("t", 0.0);
    frame.delta_time = doc.value("dt", 0.0);
    for (std::size_t i = 0; i < spec.size(); ++i) {
        const auto& dof = spec.dofs()[i];
        if (!doc["channels"].contains(dof.name)) throw ParseError("frame: missing channel '" + dof.name + "'");
        const auto& v = doc["channels"][dof.name];
        if (dof.continuous()) {
            if (!v.is_number()) throw ParseError("frame: channel '" + dof.name + "' must be a number");
            frame.channels[i] = continuous(v.get<double>());
        } else {
            if (!v.is_string()) throw ParseError("frame: channel '" + dof.name + "' must be a label");
            frame.channels[i] = discrete(v.get<std::string>());
        }
    }
    return frame;
}

std::vector<TimedInputs> load_input_script(std::string_view text) {
    std::vector<TimedInputs> out;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        const auto end = std::min(text.find('\n', pos), text.size());
        const auto line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        json doc;
        try {
            doc = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError("inputs line " + std::to_string(line_no) + ": " + e.what());
        }
        TimedInputs entry;
        if (!doc.contains("t") || !doc["t"].is_number())
            throw ParseError("inputs line " + std::to_string(line_no) + ": missing number 't'");
        entry.t = doc["t"].get<double>();
        try {
            if (doc.contains("reals")) entry.inputs.reals = doc["reals"].get<std::map<std::string, double>>();
            if (doc.contains("labels"))
                entry.inputs.labels = doc["labels"].get<std::map<std::string, std::string>>();
            if (doc.contains("commands")) entry.inputs.commands = doc["commands"].get<std::vector<std::string>>();
        } catch (const json::exception& e) {
            throw ParseError("inputs line " + std::to_string(line_no) + ": " + e.what());
        }
        out.push_back(std::move(entry));
    }
    for (std::size_t i = 1; i < out.size(); ++i) {
        if (out[i].t < out[i - 1].t) throw ParseError("inputs: timestamps must be non-decreasing");
    }
    return out;
}

}  // namespace nutty
