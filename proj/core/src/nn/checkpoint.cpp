#include "swipeforge/nn/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "swipeforge/error.hpp"

namespace swipeforge::nn {

double Checkpoint::number(const std::string& key) const {
  auto it = hyperparameters.find(key);
  if (it == hyperparameters.end() || !std::holds_alternative<double>(it->second)) {
    throw Error(ErrorCode::kSchema, "checkpoint is missing numeric hyperparameter '" + key + "'");
  }
  return std::get<double>(it->second);
}

const std::string& Checkpoint::text(const std::string& key) const {
  auto it = hyperparameters.find(key);
  if (it == hyperparameters.end() || !std::holds_alternative<std::string>(it->second)) {
    throw Error(ErrorCode::kSchema, "checkpoint is missing text hyperparameter '" + key + "'");
  }
  return std::get<std::string>(it->second);
}

const Matrix& Checkpoint::parameter(const std::string& name, Eigen::Index rows, Eigen::Index cols) const {
  auto it = parameters.find(name);
  if (it == parameters.end()) throw Error(ErrorCode::kSchema, "checkpoint is missing parameter '" + name + "'");
  if (it->second.rows() != rows || it->second.cols() != cols) {
    throw Error(ErrorCode::kSchema, "checkpoint parameter '" + name + "' has the wrong shape");
  }
  return it->second;
}

void Checkpoint::add_parameters(const ParameterList& params) {
  for (const auto& p : params) parameters[p.name] = p.tensor.value();
}

void Checkpoint::restore_parameters(const ParameterList& params) const {
  for (const auto& p : params) {
    Tensor t = p.tensor;
    t.mutable_value() = parameter(p.name, t.rows(), t.cols());
  }
}

std::string checkpoint_to_string(const Checkpoint& checkpoint) {
  nlohmann::ordered_json doc;
  doc["schema_version"] = checkpoint.schema_version;
  doc["module_kind"] = checkpoint.module_kind;
  doc["hyperparameters"] = nlohmann::ordered_json::object();
  for (const auto& [key, value] : checkpoint.hyperparameters) {
    std::visit([&](const auto& v) { doc["hyperparameters"][key] = v; }, value);
  }
  doc["parameters"] = nlohmann::ordered_json::object();
  for (const auto& [name, m] : checkpoint.parameters) {
    std::vector<double> flat(m.data(), m.data() + m.size());
    doc["parameters"][name] = {{"shape", {m.rows(), m.cols()}}, {"values", flat}};
  }
  return doc.dump() + "\n";
}

Checkpoint checkpoint_from_string(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kSchema, std::string("checkpoint is not valid JSON: ") + e.what());
  }
  Checkpoint ck;
  try {
    ck.schema_version = doc.at("schema_version").get<int>();
    if (ck.schema_version != Checkpoint::kSchemaVersion) throw Error(ErrorCode::kSchema, "unsupported checkpoint schema_version");
    ck.module_kind = doc.at("module_kind").get<std::string>();
    for (const auto& [key, value] : doc.at("hyperparameters").items()) {
      if (value.is_number()) {
        ck.hyperparameters[key] = value.get<double>();
      } else if (value.is_string()) {
        ck.hyperparameters[key] = value.get<std::string>();
      } else {
        throw Error(ErrorCode::kSchema, "hyperparameter '" + key + "' must be a number or string");
      }
    }
    for (const auto& [name, entry] : doc.at("parameters").items()) {
      const auto shape = entry.at("shape").get<std::vector<Eigen::Index>>();
      const auto values = entry.at("values").get<std::vector<double>>();
      if (shape.size() != 2 || shape[0] * shape[1] != static_cast<Eigen::Index>(values.size())) {
        throw Error(ErrorCode::kSchema, "parameter '" + name + "' shape does not match its values");
      }
      Matrix m(shape[0], shape[1]);
      std::copy(values.begin(), values.end(), m.data());
      ck.parameters.emplace(name, std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchema, std::string("malformed checkpoint: ") + e.what());
  }
  return ck;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write checkpoint " + path.string());
  out << checkpoint_to_string(checkpoint);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingCheckpoint, "cannot read checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_string(ss.str());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const std::string& expected_kind) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.module_kind != expected_kind) {
    throw Error(ErrorCode::kConfigConflict,
                "checkpoint " + path.string() + " holds '" + ck.module_kind + "', expected '" + expected_kind + "'");
  }
  return ck;
}

}  // namespace swipeforge::nn
