#pragma once

#include <string>
#include <utility>
#include <vector>

#include "hcd/objective.hpp"
#include "hcd/trainloop.hpp"

namespace hcd {

// %.17g, round-trip exact
std::string format_double(double v);

// one JSON object per step, fixed key order; wall_ms is the only
// nondeterministic field in the stream
std::string record_to_json(const StepRecord& r);

// flat `key = value` lines in insertion order
using SummaryKv = std::vector<std::pair<std::string, std::string>>;
void write_text_file(const std::string& path, const std::string& content);
std::string render_summary(const SummaryKv& kv);

// csv: epoch plus the five evaluated weights per row
std::string render_schedule_log(const CurriculumSchedule& schedule);

// mean and sample standard deviation (divisor n-1; 0 for a single value)
void mean_and_std(const std::vector<double>& xs, double& mean, double& sd);

}  // namespace hcd
