#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <variant>

#include "swipeforge/matrix.hpp"
#include "swipeforge/nn/tensor.hpp"

namespace swipeforge::nn {

using HyperValue = std::variant<double, std::string>;

/// Structured-text model snapshot: schema_version, module_kind, scalar or
/// string hyperparameters, and named parameter arrays stored as flat lists
/// with their shapes. Doubles are written in shortest round-trip form, so a
/// save/load cycle is lossless.
struct Checkpoint {
  static constexpr int kSchemaVersion = 1;

  int schema_version = kSchemaVersion;
  std::string module_kind;
  std::map<std::string, HyperValue> hyperparameters;
  std::map<std::string, Matrix> parameters;

  double number(const std::string& key) const;
  const std::string& text(const std::string& key) const;
  /// Throws Error(kSchema) when the parameter is missing or its shape differs
  /// from `like`.
  const Matrix& parameter(const std::string& name, Eigen::Index rows, Eigen::Index cols) const;

  void add_parameters(const ParameterList& params);
  /// Copies stored values into `params` (matched by name, shapes checked).
  void restore_parameters(const ParameterList& params) const;
};

std::string checkpoint_to_string(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_string(const std::string& text);
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
/// Throws Error(kMissingCheckpoint) when the file does not exist.
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// Also checks module_kind.
Checkpoint load_checkpoint(const std::filesystem::path& path, const std::string& expected_kind);

}  // namespace swipeforge::nn
