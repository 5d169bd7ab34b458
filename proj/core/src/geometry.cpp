#include "swipeforge/geometry.hpp"

#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "bundled_layouts.hpp"
#include "swipeforge/error.hpp"

namespace swipeforge {
namespace {

constexpr double kBoundsTolerance = 1e-9;

double require_number(const nlohmann::json& obj, const char* field) {
  if (!obj.contains(field) || !obj[field].is_number()) {
    throw Error(ErrorCode::kSchema, std::string("layout field '") + field + "' must be a number");
  }
  const double v = obj[field].get<double>();
  if (!std::isfinite(v)) throw Error(ErrorCode::kSchema, std::string("layout field '") + field + "' is not finite");
  return v;
}

}  // namespace

KeyboardLayout::KeyboardLayout(std::string name, double aspect, std::vector<KeyRect> keys)
    : name_(std::move(name)), aspect_(aspect), keys_(std::move(keys)) {
  if (name_.empty()) throw Error(ErrorCode::kSchema, "layout name must be non-empty");
  if (!(aspect_ > 0.0) || !std::isfinite(aspect_)) throw Error(ErrorCode::kSchema, "layout aspect must be positive");
  if (keys_.empty()) throw Error(ErrorCode::kSchema, "layout has no keys");
  std::u32string chars;
  for (const auto& k : keys_) {
    if (!(k.w > 0.0) || !(k.h > 0.0)) {
      throw Error(ErrorCode::kSchema, "key '" + to_utf8(k.ch) + "' must have positive size");
    }
    const bool inside = k.cx - k.w / 2 >= -kBoundsTolerance && k.cx + k.w / 2 <= 1.0 + kBoundsTolerance &&
                        k.cy - k.h / 2 >= -kBoundsTolerance && k.cy + k.h / 2 <= aspect_ + kBoundsTolerance;
    if (!inside) throw Error(ErrorCode::kOutOfBounds, "key '" + to_utf8(k.ch) + "' lies outside the keyboard");
    chars.push_back(k.ch);
  }
  alphabet_ = Alphabet(std::move(chars));
}

int KeyboardLayout::nearest_key(Point p) const {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < keys_.size(); ++i) {
    const double d = squared_distance(p, keys_[i].center());
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

KeyboardLayout load_layout(std::string_view document) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(document);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kSchema, std::string("layout is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::kSchema, "layout document must be an object");
  if (!doc.contains("schema_version") || !doc["schema_version"].is_number_integer() ||
      doc["schema_version"].get<int>() != KeyboardLayout::kSchemaVersion) {
    throw Error(ErrorCode::kSchema, "unsupported or missing layout schema_version");
  }
  if (!doc.contains("name") || !doc["name"].is_string()) throw Error(ErrorCode::kSchema, "layout name missing");
  if (!doc.contains("keys") || !doc["keys"].is_array()) throw Error(ErrorCode::kSchema, "layout keys missing");
  const double aspect = require_number(doc, "aspect");
  std::vector<KeyRect> keys;
  for (const auto& k : doc["keys"]) {
    if (!k.is_object() || !k.contains("char") || !k["char"].is_string()) {
      throw Error(ErrorCode::kSchema, "key entry needs a 'char' string");
    }
    const std::u32string ch = utf8_to_u32(k["char"].get<std::string>());
    if (ch.size() != 1) throw Error(ErrorCode::kSchema, "key 'char' must be a single codepoint");
    keys.push_back({ch[0], require_number(k, "cx"), require_number(k, "cy"), require_number(k, "w"),
                    require_number(k, "h")});
  }
  return KeyboardLayout(doc["name"].get<std::string>(), aspect, std::move(keys));
}

KeyboardLayout load_layout_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open layout file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return load_layout(ss.str());
}

std::string serialize_layout(const KeyboardLayout& layout) {
  nlohmann::json doc;
  doc["schema_version"] = KeyboardLayout::kSchemaVersion;
  doc["name"] = layout.name();
  doc["aspect"] = layout.aspect();
  doc["keys"] = nlohmann::json::array();
  for (const auto& k : layout.keys()) {
    doc["keys"].push_back({{"char", to_utf8(k.ch)}, {"cx", k.cx}, {"cy", k.cy}, {"w", k.w}, {"h", k.h}});
  }
  return doc.dump(1);
}

std::vector<std::string> bundled_layout_names() {
  std::vector<std::string> names;
  for (const auto& entry : detail::kBundledLayouts) names.emplace_back(entry.name);
  return names;
}

std::string_view bundled_layout_document(std::string_view name) {
  for (const auto& entry : detail::kBundledLayouts) {
    if (entry.name == name) return entry.document;
  }
  throw Error(ErrorCode::kInvalidArgument, "no bundled layout named '" + std::string(name) + "'");
}

KeyboardLayout bundled_layout(std::string_view name) { return load_layout(bundled_layout_document(name)); }

KeyboardLayout resolve_layout(const std::string& name_or_path) {
  for (const auto& entry : detail::kBundledLayouts) {
    if (entry.name == name_or_path) return load_layout(entry.document);
  }
  return load_layout_file(name_or_path);
}

}  // namespace swipeforge
