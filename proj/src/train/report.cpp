#include "surfer/train/report.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "surfer/train/eval.hpp"

namespace surfer::train {

namespace {

const char* const kReferenceLabel = "reference (reported, context only)";

int condition_order(const std::string& c) {
  int i = 0;
  for (Condition k : kAllConditions) {
    if (condition_name(k) == c) return i;
    ++i;
  }
  return i;
}

bool covers_upper_levels(const ReportRow& r) {
  return r.levels.count(2) && r.levels.count(3) && r.levels.count(4);
}

double upper_mean(const ReportRow& r) {
  return (r.levels.at(2).rate() + r.levels.at(3).rate() + r.levels.at(4).rate()) / 3.0;
}

}  // namespace

std::string format_rate(double percent) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", percent);
  return buf;
}

double ReportRow::mean() const {
  if (levels.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [level, t] : levels) sum += t.rate();
  return sum / static_cast<double>(levels.size());
}

EvalReport build_report(const std::vector<EpisodeLog>& logs) {
  std::map<std::pair<std::string, int>, ReportRow> rows;
  std::set<int> levels;
  for (const EpisodeLog& log : logs) {
    ReportRow& row = rows[{log.label, condition_order(log.condition)}];
    row.label = log.label;
    row.condition = log.condition;
    Tally& lt = row.levels[log.level];
    ++lt.episodes;
    lt.successes += log.success ? 1 : 0;
    Tally& st = row.skills[log.skill];
    ++st.episodes;
    st.successes += log.success ? 1 : 0;
    levels.insert(log.level);
  }
  EvalReport report;
  for (auto& [key, row] : rows) report.rows.push_back(std::move(row));
  report.levels.assign(levels.begin(), levels.end());
  return report;
}

std::string report_markdown(const EvalReport& report) {
  std::string out = "## Success rate by level (%)\n\n| Model | Condition |";
  std::string rule = "|---|---|";
  for (int l : report.levels) {
    out += " Level " + std::to_string(l) + " |";
    rule += "---:|";
  }
  out += " Mean |\n" + rule + "---:|\n";
  for (const ReportRow& r : report.rows) {
    out += "| " + r.label + " | " + r.condition + " |";
    for (int l : report.levels) {
      const auto it = r.levels.find(l);
      out += " " + (it == r.levels.end() ? std::string("-") : format_rate(it->second.rate())) + " |";
    }
    out += " " + format_rate(r.mean()) + " |\n";
  }
  if (!report.levels.empty()) {
    out += std::string("| ") + kReferenceLabel + " | seen |";
    double sum = 0.0;
    for (int l : report.levels) {
      const double v = kReferenceLevelRates[static_cast<std::size_t>(l - 1)];
      out += " " + format_rate(v) + " |";
      sum += v;
    }
    const double mean = report.levels.size() == 4 ? kReferenceLevelMean : sum / static_cast<double>(report.levels.size());
    out += " " + format_rate(mean) + " |\n";
  }

  const bool robustness = std::any_of(report.rows.begin(), report.rows.end(), [](const ReportRow& r) {
    return r.condition != condition_name(Condition::Seen) && covers_upper_levels(r);
  });
  if (robustness) {
    out += "\n## Robustness, mean over levels 2-4 (%)\n\n| Model | Seen | Unseen backgrounds | Changing lights | Distractors |\n"
           "|---|---:|---:|---:|---:|\n";
    std::set<std::string> labels;
    for (const ReportRow& r : report.rows) labels.insert(r.label);
    for (const std::string& label : labels) {
      out += "| " + label + " |";
      for (Condition c : kAllConditions) {
        const auto it = std::find_if(report.rows.begin(), report.rows.end(), [&](const ReportRow& r) {
          return r.label == label && r.condition == condition_name(c);
        });
        out += " " + (it != report.rows.end() && covers_upper_levels(*it) ? format_rate(upper_mean(*it)) : "-") + " |";
      }
      out += "\n";
    }
    out += std::string("| ") + kReferenceLabel + " |";
    for (double v : kReferenceRobustness) out += " " + format_rate(v) + " |";
    out += "\n";
  }

  out += "\n## Success by skill\n\n| Model | Condition | Skill | Episodes | Successes | Rate (%) |\n"
         "|---|---|---|---:|---:|---:|\n";
  for (const ReportRow& r : report.rows) {
    for (const auto& [skill, t] : r.skills) {
      out += "| " + r.label + " | " + r.condition + " | " + skill + " | " + std::to_string(t.episodes) + " | " +
             std::to_string(t.successes) + " | " + format_rate(t.rate()) + " |\n";
    }
  }
  return out;
}

std::string report_csv(const EvalReport& report) {
  std::string out = "label,condition,level,episodes,successes,rate\n";
  for (const ReportRow& r : report.rows) {
    std::size_t episodes = 0, successes = 0;
    for (const auto& [level, t] : r.levels) {
      out += r.label + "," + r.condition + "," + std::to_string(level) + "," + std::to_string(t.episodes) + "," +
             std::to_string(t.successes) + "," + format_rate(t.rate()) + "\n";
      episodes += t.episodes;
      successes += t.successes;
    }
    out += r.label + "," + r.condition + ",mean," + std::to_string(episodes) + "," + std::to_string(successes) + "," +
           format_rate(r.mean()) + "\n";
  }
  return out;
}

}  // namespace surfer::train
