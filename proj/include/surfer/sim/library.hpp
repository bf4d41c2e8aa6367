#pragma once

#include <filesystem>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "surfer/sim/types.hpp"

namespace surfer::sim {

// Immutable after load; safe to share read-only between threads.
class ObjectLibrary {
 public:
  ObjectLibrary() = default;
  explicit ObjectLibrary(std::vector<ObjectSpec> specs);

  // Tab-separated records, see data/objects.tsv for the column layout.
  static ObjectLibrary parse(std::istream& in);
  static ObjectLibrary load(const std::filesystem::path& path);

  const std::vector<ObjectSpec>& specs() const { return specs_; }
  const ObjectSpec& operator[](std::size_t i) const { return specs_.at(i); }
  std::size_t size() const { return specs_.size(); }
  std::size_t index_of(std::string_view name) const;  // throws ConfigError when unknown
  const ObjectSpec& find(std::string_view name) const { return specs_[index_of(name)]; }

 private:
  std::vector<ObjectSpec> specs_;
};

enum class StripeOrientation { Horizontal, Vertical, Diagonal };

struct TableSpec {
  std::size_t id = 0;
  std::string name;
  Rgb color;
  Rgb stripe;
  double stripe_period = 5.0;  // cm
  StripeOrientation orientation = StripeOrientation::Horizontal;
};

class TableLibrary {
 public:
  TableLibrary() = default;
  explicit TableLibrary(std::vector<TableSpec> tables);
  static TableLibrary parse(std::istream& in);
  static TableLibrary load(const std::filesystem::path& path);

  const std::vector<TableSpec>& tables() const { return tables_; }
  const TableSpec& operator[](std::size_t i) const { return tables_.at(i); }
  std::size_t size() const { return tables_.size(); }

 private:
  std::vector<TableSpec> tables_;
};

struct World {
  ObjectLibrary objects;
  TableLibrary tables;

  // Loads objects.tsv and tables.tsv from a data directory.
  static World load(const std::filesystem::path& data_dir);

  const ObjectSpec& spec(const SceneObject& o) const { return objects[o.spec]; }
};

}  // namespace surfer::sim
