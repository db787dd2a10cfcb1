#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nutty/nmf.hpp"

namespace nutty {

/// Set-point CSV: header "t,s", one row per set-point, ascending t.
std::vector<nmf::SetPoint> parse_set_points_csv(std::string_view text);

/// Filter output CSV: header "t,x,v,a,j", values printed with %.17g so a
/// read-back is exact.
std::string outputs_to_csv(std::span<const nmf::FilterOutput> outputs);
std::vector<nmf::FilterOutput> parse_outputs_csv(std::string_view text);

/// Filter parameter file: a JSON object with any of "order" (1..3),
/// "limiter" ("tanh"|"hard"), "smoothness", "responsiveness", "beta",
/// "p_min", "p_max", "velocity_limit", "acceleration_limit", "jerk_limit",
/// "sample_rate", "stabilizer", and optionally "preset" naming the base.
/// Unknown keys are rejected. The result is validated.
nmf::FilterParams parse_filter_params(std::string_view text);

/// Same keys as parse_filter_params, applied on top of `base`. A "preset"
/// key replaces the base before the other keys apply.
nmf::FilterParams merge_filter_params(const nmf::FilterParams& base, std::string_view text);
std::string filter_params_to_json(const nmf::FilterParams& params);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

}  // namespace nutty
