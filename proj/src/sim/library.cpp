#include "surfer/sim/library.hpp"

#include <fstream>
#include <sstream>

#include "surfer/common/errors.hpp"

namespace surfer::sim {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double to_number(const std::string& s, std::size_t line_no) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("line " + std::to_string(line_no) + ": expected a number, got '" + s + "'");
  }
}

Rgb to_rgb(const std::string& r, const std::string& g, const std::string& b, std::size_t line_no) {
  return {to_number(r, line_no) / 255.0, to_number(g, line_no) / 255.0, to_number(b, line_no) / 255.0};
}

// Yields (line number, fields) for non-comment, non-blank lines.
template <typename Fn>
void for_each_record(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    fn(line_no, split(line, '\t'));
  }
}

std::ifstream open(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open library file: " + path.string());
  return in;
}

}  // namespace

ObjectLibrary::ObjectLibrary(std::vector<ObjectSpec> specs) : specs_(std::move(specs)) {
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    const auto& s = specs_[i];
    if (!(s.footprint_radius > 0.0) || !(s.height > 0.0)) throw ConfigError("object " + s.name + ": size must be positive");
    if (s.articulated && s.graspable) throw ConfigError("object " + s.name + ": articulated objects cannot be graspable");
    for (std::size_t j = 0; j < i; ++j) {
      if (specs_[j].name == s.name) throw ConfigError("duplicate object name: " + s.name);
    }
  }
}

ObjectLibrary ObjectLibrary::parse(std::istream& in) {
  std::vector<ObjectSpec> specs;
  for_each_record(in, [&](std::size_t line_no, const std::vector<std::string>& f) {
    if (f.size() != 9) throw ConfigError("objects line " + std::to_string(line_no) + ": expected 9 fields");
    ObjectSpec s;
    s.name = f[0];
    s.footprint_radius = to_number(f[1], line_no);
    s.height = to_number(f[2], line_no);
    s.color = to_rgb(f[3], f[4], f[5], line_no);
    s.appearance_tags = split(f[6], ';');
    s.function_tags = split(f[7], ';');
    if (s.appearance_tags.empty() || s.function_tags.empty()) {
      throw ConfigError("objects line " + std::to_string(line_no) + ": tags must be nonempty");
    }
    if (f[8] != "-") {
      for (const auto& flag : split(f[8], ',')) {
        if (flag == "graspable") s.graspable = true;
        else if (flag == "articulated") s.articulated = true;
        else if (flag == "heavy") s.mass = MassClass::Heavy;
        else throw ConfigError("objects line " + std::to_string(line_no) + ": unknown flag '" + flag + "'");
      }
    }
    specs.push_back(std::move(s));
  });
  return ObjectLibrary(std::move(specs));
}

ObjectLibrary ObjectLibrary::load(const std::filesystem::path& path) {
  auto in = open(path);
  return parse(in);
}

std::size_t ObjectLibrary::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    if (specs_[i].name == name) return i;
  }
  throw ConfigError("unknown object: " + std::string(name));
}

TableLibrary::TableLibrary(std::vector<TableSpec> tables) : tables_(std::move(tables)) {
  for (std::size_t i = 0; i < tables_.size(); ++i) {
    if (tables_[i].id != i) throw ConfigError("table ids must be consecutive from 0");
    if (!(tables_[i].stripe_period > 0.0)) throw ConfigError("table " + tables_[i].name + ": stripe period must be positive");
  }
}

TableLibrary TableLibrary::parse(std::istream& in) {
  std::vector<TableSpec> tables;
  for_each_record(in, [&](std::size_t line_no, const std::vector<std::string>& f) {
    if (f.size() != 10) throw ConfigError("tables line " + std::to_string(line_no) + ": expected 10 fields");
    TableSpec t;
    t.id = static_cast<std::size_t>(to_number(f[0], line_no));
    t.name = f[1];
    t.color = to_rgb(f[2], f[3], f[4], line_no);
    t.stripe = to_rgb(f[5], f[6], f[7], line_no);
    t.stripe_period = to_number(f[8], line_no);
    if (f[9] == "horizontal") t.orientation = StripeOrientation::Horizontal;
    else if (f[9] == "vertical") t.orientation = StripeOrientation::Vertical;
    else if (f[9] == "diagonal") t.orientation = StripeOrientation::Diagonal;
    else throw ConfigError("tables line " + std::to_string(line_no) + ": unknown orientation '" + f[9] + "'");
    tables.push_back(std::move(t));
  });
  return TableLibrary(std::move(tables));
}

TableLibrary TableLibrary::load(const std::filesystem::path& path) {
  auto in = open(path);
  return parse(in);
}

World World::load(const std::filesystem::path& data_dir) {
  return World{ObjectLibrary::load(data_dir / "objects.tsv"), TableLibrary::load(data_dir / "tables.tsv")};
}

}  // namespace surfer::sim
