#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "nutty/embodiment.hpp"
#include "nutty/engine.hpp"
#include "nutty/validator.hpp"

namespace nutty {

/// Stable process exit codes.
enum ExitCode : int {
    kExitOk = 0,
    kExitViolations = 1,
    kExitUsage = 2,
    kExitData = 3,
    kExitEnvironment = 4,
};

/// Runs the command line `args` (without the program name) writing results
/// to `out` and diagnostics to `err`. Returns the exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Continuous channels of a frame stream as a trajectory. The spacing is the
/// first frame's dt; every frame must share it.
Trajectory trajectory_from_frames(const std::vector<AnimationFrame>& frames, const EmbodimentSpec& spec);

}  // namespace nutty
