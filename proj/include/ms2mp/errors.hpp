#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ms2mp {

/// Factor graph violates the adjacent-only binary factor structure.
class StructureError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A local solve or marginalization hit a singular / indefinite system.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, std::size_t node)
      : std::runtime_error(what + " (node " + std::to_string(node) + ")"), node_(node) {}

  std::size_t node() const { return node_; }

 private:
  std::size_t node_;
};

/// Query point lies outside the signed distance grid.
class OutOfBoundsError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Scenario file could not be parsed or failed validation. `field` names the
/// offending key (dotted path) when known.
class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(const std::string& field, const std::string& what)
      : std::runtime_error(field.empty() ? what : field + ": " + what), field_(field) {}

  /// Same error with a location (e.g. file path) prepended to the message.
  ScenarioError(const ScenarioError& inner, const std::string& location)
      : std::runtime_error(location + ": " + inner.what()), field_(inner.field_) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// File could not be read or written.
class IoError : public std::runtime_error {
 public:
  IoError(const std::string& path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(path) {}

  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

}  // namespace ms2mp
