#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "nutty/anim_assets.hpp"
#include "nutty/embodiment.hpp"
#include "nutty/frame.hpp"
#include "nutty/nmf.hpp"

namespace nutty {

/// A value delivered to a block parameter: a real or a label.
using InputValue = std::variant<double, std::string>;

/// Named inputs for one tick. Commands of the form "name:arg" are routed as
/// input `name` with label `arg`; a bare command routes with an empty label.
struct EngineInputs {
    std::map<std::string, double> reals;
    std::map<std::string, std::string> labels;
    std::vector<std::string> commands;

    bool empty() const { return reals.empty() && labels.empty() && commands.empty(); }
    void merge(const EngineInputs& other);
};

enum class BlendOp { Override, Additive, WeightedAverage };

/// Combines two partial frames. `weight` is used by WeightedAverage only.
PartialFrame blend(const PartialFrame& base, const PartialFrame& overlay, BlendOp op, double weight = 1.0);

/// Node of an animation program. Sources ignore their input; operators
/// transform it.
class AnimationBlock {
public:
    virtual ~AnimationBlock() = default;

    virtual std::string_view kind() const = 0;
    virtual bool is_source() const = 0;

    /// Throws StateError when an operator is evaluated without input.
    virtual PartialFrame evaluate(const PartialFrame* input, double delta_time) = 0;

    /// Returns false when the block has no such parameter or rejects the
    /// value.
    virtual bool set_param(std::string_view name, const InputValue& value);
};

/// Whole-frame processor run after layer blending.
class Stage2Processor {
public:
    virtual ~Stage2Processor() = default;
    virtual std::string_view kind() const = 0;
    virtual PartialFrame process(const PartialFrame& input, const AnimationFrame& last, double delta_time) = 0;
};

// Shipped blocks.

class ClipPlayer final : public AnimationBlock {
public:
    ClipPlayer(std::shared_ptr<const AnimationClip> clip, bool loop, double speed = 1.0);

    std::string_view kind() const override { return "clip_player"; }
    bool is_source() const override { return true; }
    PartialFrame evaluate(const PartialFrame* input, double delta_time) override;
    bool set_param(std::string_view name, const InputValue& value) override;

    double playhead() const { return playhead_; }
    void set_library(const ClipLibrary* library) { library_ = library; }

private:
    std::shared_ptr<const AnimationClip> clip_;
    const ClipLibrary* library_ = nullptr;
    bool loop_;
    double speed_;
    bool enabled_ = true;
    double playhead_ = 0.0;
};

class SineGenerator final : public AnimationBlock {
public:
    SineGenerator(std::string dof, double amplitude, double frequency, double phase, double offset);

    std::string_view kind() const override { return "sine"; }
    bool is_source() const override { return true; }
    PartialFrame evaluate(const PartialFrame* input, double delta_time) override;
    bool set_param(std::string_view name, const InputValue& value) override;

private:
    std::string dof_;
    double amplitude_, frequency_, phase_, offset_;
    bool enabled_ = true;
    double time_ = 0.0;
};

/// Seeded Gaussian noise through a single-pole low-pass:
/// y <- (1 - alpha)·y + alpha·n.
class NoiseGenerator final : public AnimationBlock {
public:
    NoiseGenerator(std::string dof, double mean, double stddev, double alpha, std::uint64_t seed);

    std::string_view kind() const override { return "noise"; }
    bool is_source() const override { return true; }
    PartialFrame evaluate(const PartialFrame* input, double delta_time) override;
    bool set_param(std::string_view name, const InputValue& value) override;

private:
    double gaussian();

    std::string dof_;
    double mean_, stddev_, alpha_;
    std::mt19937_64 rng_;
    std::optional<double> spare_;
    double state_;
    bool enabled_ = true;
};

/// A fixed pose. With an embodiment, set_param only accepts known DoFs with
/// a value of the right kind (and a known label), so routed inputs cannot
/// produce a frame the engine would reject.
class ConstantPose final : public AnimationBlock {
public:
    explicit ConstantPose(PartialFrame pose, const EmbodimentSpec* spec = nullptr)
        : pose_(std::move(pose)), spec_(spec) {}

    std::string_view kind() const override { return "constant_pose"; }
    bool is_source() const override { return true; }
    PartialFrame evaluate(const PartialFrame*, double) override { return pose_; }
    bool set_param(std::string_view name, const InputValue& value) override;

private:
    PartialFrame pose_;
    const EmbodimentSpec* spec_;
};

/// v -> gain·v + offset on the selected Continuous channels (all when empty).
class GainOffset final : public AnimationBlock {
public:
    GainOffset(double gain, double offset, std::vector<std::string> channels);

    std::string_view kind() const override { return "gain_offset"; }
    bool is_source() const override { return false; }
    PartialFrame evaluate(const PartialFrame* input, double delta_time) override;
    bool set_param(std::string_view name, const InputValue& value) override;

private:
    double gain_, offset_;
    std::vector<std::string> channels_;
};

/// Exaggeration: v -> ref + gain·(v - ref) around a reference pose. Channels
/// without a reference pass through.
class Contrast final : public AnimationBlock {
public:
    Contrast(double gain, std::map<std::string, double> reference);

    std::string_view kind() const override { return "contrast"; }
    bool is_source() const override { return false; }
    PartialFrame evaluate(const PartialFrame* input, double delta_time) override;
    bool set_param(std::string_view name, const InputValue& value) override;

private:
    double gain_;
    std::map<std::string, double> reference_;
};

/// One motion filter per bound channel, each fed the channel's position as
/// its set-point. A channel missing from the input holds its last
/// set-point, so every bound channel is emitted every tick.
class NMFBank final : public AnimationBlock, public Stage2Processor {
public:
    struct Channel {
        std::string dof;
        nmf::FilterParams params;
        double initial = 0.0;
    };

    explicit NMFBank(std::vector<Channel> channels);

    std::string_view kind() const override { return "nmf_bank"; }
    bool is_source() const override { return false; }
    PartialFrame evaluate(const PartialFrame* input, double delta_time) override;
    bool set_param(std::string_view name, const InputValue& value) override;
    PartialFrame process(const PartialFrame& input, const AnimationFrame& last, double delta_time) override;

    std::size_t size() const { return filters_.size(); }

private:
    struct Slot {
        std::string dof;
        nmf::MotionFilter filter;
        double set_point;
    };
    std::vector<Slot> filters_;
};

/// Clamps Continuous channels into range and caps each channel's change per
/// tick at velocity_limit·dt relative to the last frame.
class LimitEnforcer final : public Stage2Processor {
public:
    explicit LimitEnforcer(const EmbodimentSpec& spec) : spec_(&spec) {}

    std::string_view kind() const override { return "limit_enforcer"; }
    PartialFrame process(const PartialFrame& input, const AnimationFrame& last, double delta_time) override;

private:
    const EmbodimentSpec* spec_;
};

// Programs.

struct BlockSlot {
    std::unique_ptr<AnimationBlock> block;
    std::map<std::string, std::string> bindings;  // input name -> block parameter
};

struct Layer {
    BlendOp blend = BlendOp::Override;
    double weight = 1.0;
    std::vector<BlockSlot> blocks;
};

/// Level 0: one block. Level 1: a block sequence. Level 2: several layers.
/// Level 3: layers plus stage-2 processors.
struct AnimationProgram {
    int level = 0;
    std::vector<Layer> layers;
    std::vector<std::unique_ptr<Stage2Processor>> stage2;
};

/// Smallest level whose rules admit the program's structure.
int required_level(const AnimationProgram& program);

/// Throws CompileError when the structure exceeds the declared level or an
/// operator block has no upstream source.
void check_structure(const AnimationProgram& program);

using BlockFactory =
    std::function<std::unique_ptr<AnimationBlock>(const std::string& params_json, const EmbodimentSpec&)>;
using Stage2Factory =
    std::function<std::unique_ptr<Stage2Processor>(const std::string& params_json, const EmbodimentSpec&)>;

/// Extension hook: additional block and stage-2 kinds for compile_program.
struct ProgramExtensions {
    std::map<std::string, BlockFactory> blocks;
    std::map<std::string, Stage2Factory> stage2;
};

/// Parses and validates a program file against an embodiment and a clip
/// library. `spec` and `assets` must outlive the program.
AnimationProgram compile_program(std::string_view text, const EmbodimentSpec& spec, const ClipLibrary& assets,
                                 const ProgramExtensions& extensions = {});

/// Executes a program each tick and latches the last full frame.
class Engine {
public:
    Engine(AnimationProgram program, const EmbodimentSpec& spec);

    /// Thread-safe; drained at the start of the next tick.
    void post(const EngineInputs& inputs);

    /// Throws ValidationError on non-finite inputs or dt; the previous frame
    /// is left intact.
    const AnimationFrame& tick(const EngineInputs& inputs, double delta_time);

    const AnimationFrame& last_frame() const { return last_; }
    const EmbodimentSpec& embodiment() const { return *spec_; }
    double time() const { return time_; }

    /// Receives messages about ignored commands.
    void set_logger(std::function<void(const std::string&)> logger) { logger_ = std::move(logger); }

private:
    void route(const EngineInputs& inputs);

    AnimationProgram program_;
    const EmbodimentSpec* spec_;
    AnimationFrame last_;
    double time_ = 0.0;
    std::mutex mailbox_mutex_;
    EngineInputs mailbox_;
    std::function<void(const std::string&)> logger_;
};

/// Consumer of the per-tick frame stream.
class FrameSink {
public:
    virtual ~FrameSink() = default;
    virtual void write(const AnimationFrame& frame, const EmbodimentSpec& spec) = 0;
};

/// One JSON object per line: {"t", "dt", "channels": {name: value|label}}.
class JsonLineSink final : public FrameSink {
public:
    explicit JsonLineSink(std::ostream& out) : out_(&out) {}
    void write(const AnimationFrame& frame, const EmbodimentSpec& spec) override;

private:
    std::ostream* out_;
};

std::string frame_to_json(const AnimationFrame& frame, const EmbodimentSpec& spec);

/// Parses one line written by JsonLineSink back into a frame.
AnimationFrame frame_from_json(std::string_view line, const EmbodimentSpec& spec);

/// Scripted inputs: JSON lines {"t", "reals"?, "labels"?, "commands"?}.
struct TimedInputs {
    double t = 0.0;
    EngineInputs inputs;
};
std::vector<TimedInputs> load_input_script(std::string_view text);

}  // namespace nutty
