#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "swipeforge/text.hpp"

namespace swipeforge {

/// Position in abstract keyboard units: x spans [0, 1], y spans [0, aspect].
struct Point {
  double x = 0.0;
  double y = 0.0;

  friend Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
  friend Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
  friend Point operator*(double s, Point p) { return {s * p.x, s * p.y}; }
  friend bool operator==(Point a, Point b) = default;
};

inline double norm(Point p) { return std::hypot(p.x, p.y); }
inline double distance(Point a, Point b) { return norm(a - b); }
inline double squared_distance(Point a, Point b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

struct KeyRect {
  char32_t ch = 0;
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  Point center() const { return {cx, cy}; }
  friend bool operator==(const KeyRect&, const KeyRect&) = default;
};

/// Immutable, validated key geometry for one script. Key order defines the
/// character index used by one-hot features and emission columns.
class KeyboardLayout {
 public:
  static constexpr int kSchemaVersion = 1;

  /// Validates: unique characters, positive sizes, rectangles inside
  /// [0,1] x [0,aspect].
  KeyboardLayout(std::string name, double aspect, std::vector<KeyRect> keys);

  const std::string& name() const { return name_; }
  double aspect() const { return aspect_; }
  const std::vector<KeyRect>& keys() const { return keys_; }
  const Alphabet& alphabet() const { return alphabet_; }
  std::size_t size() const { return keys_.size(); }

  const KeyRect& key(char32_t c) const { return keys_[static_cast<std::size_t>(alphabet_.index(c))]; }
  Point key_center(char32_t c) const { return key(c).center(); }
  bool contains(char32_t c) const { return alphabet_.find(c).has_value(); }

  /// Index of the key whose center is closest to `p`; ties go to the lowest
  /// index. Defined for every finite point, on or off the keys.
  int nearest_key(Point p) const;

  friend bool operator==(const KeyboardLayout&, const KeyboardLayout&) = default;

 private:
  std::string name_;
  double aspect_ = 1.0;
  std::vector<KeyRect> keys_;
  Alphabet alphabet_;
};

/// Parses and validates a layout document (JSON: schema_version, name,
/// aspect, keys[{char, cx, cy, w, h}]).
KeyboardLayout load_layout(std::string_view document);
KeyboardLayout load_layout_file(const std::filesystem::path& path);
std::string serialize_layout(const KeyboardLayout& layout);

std::vector<std::string> bundled_layout_names();
/// The verbatim bundled document. Throws Error(kInvalidArgument) for an
/// unknown name.
std::string_view bundled_layout_document(std::string_view name);
KeyboardLayout bundled_layout(std::string_view name);
/// A bundled layout name, or a path to a layout document.
KeyboardLayout resolve_layout(const std::string& name_or_path);

}  // namespace swipeforge
