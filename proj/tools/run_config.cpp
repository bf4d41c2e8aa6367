#include "run_config.hpp"

#include <cctype>
#include <charconv>
#include <sstream>

#include "surfer/common/errors.hpp"
#include "surfer/common/hash.hpp"

namespace surfer::cli {

using nlohmann::ordered_json;

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

bool valid_name(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
  return true;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
T parse_number(const std::string& where, const std::string& text) {
  T v{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError(where + ": '" + text + "' is not a valid number");
  return v;
}

// Converts a raw value to the JSON type of the default it replaces.
ordered_json typed_value(const std::string& where, const ordered_json& like, const std::string& text) {
  switch (like.type()) {
    case ordered_json::value_t::number_unsigned:
      if (!text.empty() && text[0] == '-') throw ConfigError(where + " must not be negative");
      return parse_number<std::uint64_t>(where, text);
    case ordered_json::value_t::number_integer:
      return parse_number<std::int64_t>(where, text);
    case ordered_json::value_t::number_float:
      return parse_number<double>(where, text);
    case ordered_json::value_t::boolean:
      if (text == "true" || text == "yes" || text == "1") return true;
      if (text == "false" || text == "no" || text == "0") return false;
      throw ConfigError(where + ": expected true or false, got '" + text + "'");
    case ordered_json::value_t::array: {
      const ordered_json element = like.empty() ? ordered_json("") : like.front();
      ordered_json out = ordered_json::array();
      for (const auto& item : split_list(text)) out.push_back(typed_value(where, element, item));
      return out;
    }
    default:
      return text;
  }
}

ordered_json without(ordered_json j, std::initializer_list<const char*> keys) {
  for (const char* k : keys) j.erase(k);
  return j;
}

std::vector<std::filesystem::path> to_paths(const ordered_json& j) {
  std::vector<std::filesystem::path> out;
  for (const auto& s : j) out.emplace_back(s.get<std::string>());
  return out;
}

ordered_json path_list(const std::vector<std::filesystem::path>& paths) {
  ordered_json out = ordered_json::array();
  for (const auto& p : paths) out.push_back(p.string());
  return out;
}

ordered_json sections(const RunConfig& c) {
  ordered_json j;
  j["run"] = {{"seed", c.seed}};
  j["paths"] = {{"data_dir", c.paths.data_dir.string()},
                {"out_root", c.paths.out_root.string()},
                {"instructions", path_list(c.paths.instructions)},
                {"dataset", c.paths.dataset.string()},
                {"checkpoint", c.paths.checkpoint.string()}};
  j["instructions"] = {{"level", c.instructions.level},
                       {"count", c.instructions.count},
                       {"mode", c.instructions.mode},
                       {"llm_attempts", c.instructions.llm_attempts}};
  j["llm"] = {{"url", c.llm.url}, {"timeout_seconds", c.llm.timeout_seconds}, {"fixture", c.llm.fixture.string()}};
  j["planner"] = {{"step", c.demos.planner.step},
                  {"goal_bias", c.demos.planner.goal_bias},
                  {"max_iterations", c.demos.planner.max_iterations},
                  {"margin", c.demos.planner.margin}};
  j["demos"] = {{"count", c.demos.count},
                {"levels", c.demos.levels},
                {"held_out_tables", c.demos.held_out_tables},
                {"distractors", c.demos.distractors == taskgen::DistractorMode::Many ? "many" : "normal"},
                {"keep_failures", c.demos.keep_failures},
                {"yield_window", c.demos.yield_window},
                {"min_yield", c.demos.min_yield}};
  j["model"] = model::to_json(c.model);
  j["train"] = without(train::to_json(c.train), {"seed", "dataset"});
  j["eval"] = without(train::to_json(c.eval), {"seed"});
  ordered_json variants = ordered_json::array();
  for (auto v : c.ablation.variants) variants.push_back(std::string(model::variant_name(v)));
  j["ablation"] = {{"variants", variants},
                   {"validation_every", c.ablation.validation_every},
                   {"verify_no_sp", c.ablation.verify_no_sp}};
  return j;
}

RunConfig from_sections(const ordered_json& j) {
  RunConfig c;
  c.seed = j["run"]["seed"].get<std::uint64_t>();

  const auto& p = j["paths"];
  c.paths.data_dir = p["data_dir"].get<std::string>();
  c.paths.out_root = p["out_root"].get<std::string>();
  c.paths.instructions = to_paths(p["instructions"]);
  c.paths.dataset = p["dataset"].get<std::string>();
  c.paths.checkpoint = p["checkpoint"].get<std::string>();

  const auto& ins = j["instructions"];
  c.instructions.level = ins["level"].get<int>();
  c.instructions.count = ins["count"].get<std::size_t>();
  c.instructions.mode = ins["mode"].get<std::string>();
  c.instructions.llm_attempts = ins["llm_attempts"].get<int>();
  if (c.instructions.level < 1 || c.instructions.level > 4) throw ConfigError("instructions.level must be 1-4");
  (void)taskgen::parse_generation_mode(c.instructions.mode);
  if (c.instructions.llm_attempts < 1) throw ConfigError("instructions.llm_attempts must be at least 1");

  c.llm.url = j["llm"]["url"].get<std::string>();
  c.llm.timeout_seconds = j["llm"]["timeout_seconds"].get<int>();
  c.llm.fixture = j["llm"]["fixture"].get<std::string>();
  if (c.llm.timeout_seconds < 1) throw ConfigError("llm.timeout_seconds must be at least 1");

  const auto& pl = j["planner"];
  c.demos.planner.step = pl["step"].get<double>();
  c.demos.planner.goal_bias = pl["goal_bias"].get<double>();
  c.demos.planner.max_iterations = pl["max_iterations"].get<int>();
  c.demos.planner.margin = pl["margin"].get<double>();
  c.demos.planner.seed = c.seed;
  planner::validate(c.demos.planner);

  const auto& d = j["demos"];
  c.demos.count = d["count"].get<std::size_t>();
  c.demos.levels = d["levels"].get<std::vector<int>>();
  c.demos.held_out_tables = d["held_out_tables"].get<std::vector<std::size_t>>();
  const auto distractors = d["distractors"].get<std::string>();
  if (distractors != "normal" && distractors != "many") throw ConfigError("demos.distractors must be normal or many");
  c.demos.distractors = distractors == "many" ? taskgen::DistractorMode::Many : taskgen::DistractorMode::Normal;
  c.demos.keep_failures = d["keep_failures"].get<bool>();
  c.demos.yield_window = d["yield_window"].get<std::size_t>();
  c.demos.min_yield = d["min_yield"].get<double>();
  c.demos.seed = c.seed;
  for (int level : c.demos.levels)
    if (level < 1 || level > 4) throw ConfigError("demos.levels must lie in 1-4");

  c.model = model::model_config_from_json(j["model"]);

  ordered_json t = j["train"];
  t["seed"] = c.seed;
  t["dataset"] = c.paths.dataset.string();
  c.train = train::train_config_from_json(t);

  const auto& e = j["eval"];
  c.eval.levels = e["levels"].get<std::vector<int>>();
  c.eval.episodes = e["episodes"].get<std::size_t>();
  c.eval.max_steps = e["max_steps"].get<std::size_t>();
  c.eval.condition = train::parse_condition(e["condition"].get<std::string>());
  c.eval.held_out_tables = e["held_out_tables"].get<std::vector<std::size_t>>();
  c.eval.min_brightness = e["min_brightness"].get<double>();
  c.eval.max_brightness = e["max_brightness"].get<double>();
  c.eval.seed = c.seed;
  c.eval.validate();

  const auto& a = j["ablation"];
  c.ablation.variants.clear();
  for (const auto& v : a["variants"]) c.ablation.variants.push_back(model::parse_variant(v.get<std::string>()));
  if (c.ablation.variants.empty()) throw ConfigError("ablation.variants must name at least one variant");
  c.ablation.validation_every = a["validation_every"].get<std::size_t>();
  c.ablation.verify_no_sp = a["verify_no_sp"].get<bool>();
  if (c.ablation.validation_every < 2) throw ConfigError("ablation.validation_every must be at least 2");
  c.ablation.model = c.model;
  c.ablation.train = c.train;
  c.ablation.eval = c.eval;
  return c;
}

}  // namespace

KeyValues parse_key_values(const std::string& text) {
  KeyValues out;
  std::string section = "run";
  std::istringstream in(text);
  std::string raw;
  for (std::size_t line = 1; std::getline(in, raw); ++line) {
    const std::string s = trim(raw);
    const std::string where = "config line " + std::to_string(line);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError(where + ": unterminated section header");
      section = trim(std::string_view(s).substr(1, s.size() - 2));
      if (!valid_name(section)) throw ConfigError(where + ": bad section name '" + section + "'");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(std::string_view(s).substr(0, eq));
    if (!valid_name(key)) throw ConfigError(where + ": bad key '" + key + "'");
    if (!out[section].emplace(key, trim(std::string_view(s).substr(eq + 1))).second) {
      throw ConfigError(where + ": duplicate key " + section + "." + key);
    }
  }
  return out;
}

Override parse_override(const std::string& text) {
  const auto eq = text.find('=');
  const auto dot = text.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
    throw ConfigError("override '" + text + "' must look like section.key=value");
  }
  return {trim(text.substr(0, dot)), trim(text.substr(dot + 1, eq - dot - 1)), trim(text.substr(eq + 1))};
}

ordered_json RunConfig::snapshot() const { return sections(*this); }

RunConfig load_run_config(const std::optional<std::filesystem::path>& file, const std::vector<Override>& overrides,
                          const std::filesystem::path& default_data_dir) {
  RunConfig defaults;
  defaults.paths.data_dir = default_data_dir;
  ordered_json j = sections(defaults);

  auto apply = [&](const std::string& section, const std::string& key, const std::string& value,
                   const std::string& origin) {
    const std::string where = origin + " " + section + "." + key;
    if (!j.contains(section)) throw ConfigError(where + ": unknown section [" + section + "]");
    if (!j[section].contains(key)) throw ConfigError(where + ": unknown key");
    j[section][key] = typed_value(where, j[section][key], value);
  };

  if (file) {
    if (!std::filesystem::exists(*file)) throw ConfigError("config file " + file->string() + " does not exist");
    for (const auto& [section, keys] : parse_key_values(read_file(*file)))
      for (const auto& [key, value] : keys) apply(section, key, value, file->filename().string());
  }
  for (const Override& o : overrides) apply(o.section, o.key, o.value, "override");

  try {
    return from_sections(j);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

}  // namespace surfer::cli
