#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "surfer/train/rollout.hpp"

namespace surfer::train {

struct Tally {
  std::size_t successes = 0;
  std::size_t episodes = 0;
  // Percentage, exactly 100 * successes / episodes.
  double rate() const { return episodes ? 100.0 * static_cast<double>(successes) / static_cast<double>(episodes) : 0.0; }
};

// Success tallies of one (label, condition) pair.
struct ReportRow {
  std::string label;
  std::string condition;
  std::map<int, Tally> levels;
  std::map<std::string, Tally> skills;
  // Arithmetic mean of the level rates.
  double mean() const;
};

struct EvalReport {
  std::vector<ReportRow> rows;  // sorted by label, then condition
  std::vector<int> levels;      // union over rows, ascending
};

// Deterministic fold over the logs, independent of their order.
EvalReport build_report(const std::vector<EpisodeLog>& logs);

// Reference figures reported for the original system, shown as context.
inline constexpr std::array<double, 4> kReferenceLevelRates = {74.74, 61.05, 45.26, 37.89};
inline constexpr double kReferenceLevelMean = 54.74;
// Seen, unseen backgrounds, changing lights, distractors (levels 2-4 mean).
inline constexpr std::array<double, 4> kReferenceRobustness = {48.07, 46.67, 45.83, 40.83};

// Level table (one column per level plus Mean), the robustness table when
// any condition row covers levels 2-4, and the per-skill breakdown.
std::string report_markdown(const EvalReport& report);
// label,condition,level,episodes,successes,rate rows; level "mean" holds the
// mean of the level rates.
std::string report_csv(const EvalReport& report);

std::string format_rate(double percent);

}  // namespace surfer::train
