#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace swipeforge {

/// Decodes UTF-8 into codepoints. Throws Error(kSchema) on malformed input.
std::u32string utf8_to_u32(std::string_view text);
std::string u32_to_utf8(std::u32string_view text);
std::string to_utf8(char32_t c);

/// Ordered symbol inventory. The position of a symbol is its one-hot /
/// emission / embedding index everywhere it is used.
class Alphabet {
 public:
  Alphabet() = default;
  explicit Alphabet(std::u32string symbols);

  /// Sorted union of all codepoints in `words`.
  static Alphabet from_words(std::span<const std::u32string> words);

  std::size_t size() const { return symbols_.size(); }
  bool empty() const { return symbols_.empty(); }
  char32_t symbol(std::size_t i) const { return symbols_.at(i); }
  const std::u32string& symbols() const { return symbols_; }

  std::optional<int> find(char32_t c) const;
  /// Throws Error(kUnknownChar).
  int index(char32_t c) const;
  std::vector<int> encode(std::u32string_view word) const;
  std::u32string decode(std::span<const int> indices) const;

  bool operator==(const Alphabet& other) const { return symbols_ == other.symbols_; }

 private:
  std::u32string symbols_;
  std::unordered_map<char32_t, int> index_;
};

}  // namespace swipeforge
