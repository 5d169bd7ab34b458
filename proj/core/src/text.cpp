#include "swipeforge/text.hpp"

#include <algorithm>
#include <set>

#include "swipeforge/error.hpp"

namespace swipeforge {

std::u32string utf8_to_u32(std::string_view text) {
  std::u32string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const auto lead = static_cast<unsigned char>(text[i]);
    int extra = 0;
    char32_t cp = 0;
    if (lead < 0x80) {
      cp = lead;
    } else if ((lead & 0xE0) == 0xC0) {
      cp = lead & 0x1F;
      extra = 1;
    } else if ((lead & 0xF0) == 0xE0) {
      cp = lead & 0x0F;
      extra = 2;
    } else if ((lead & 0xF8) == 0xF0) {
      cp = lead & 0x07;
      extra = 3;
    } else {
      throw Error(ErrorCode::kSchema, "malformed UTF-8 lead byte");
    }
    if (i + static_cast<std::size_t>(extra) >= text.size() && extra > 0) {
      throw Error(ErrorCode::kSchema, "truncated UTF-8 sequence");
    }
    for (int k = 1; k <= extra; ++k) {
      const auto cont = static_cast<unsigned char>(text[i + k]);
      if ((cont & 0xC0) != 0x80) throw Error(ErrorCode::kSchema, "malformed UTF-8 continuation byte");
      cp = (cp << 6) | (cont & 0x3F);
    }
    out.push_back(cp);
    i += extra + 1;
  }
  return out;
}

std::string to_utf8(char32_t c) {
  std::string out;
  if (c < 0x80) {
    out.push_back(static_cast<char>(c));
  } else if (c < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (c >> 6)));
    out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
  } else if (c < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (c >> 12)));
    out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (c >> 18)));
    out.push_back(static_cast<char>(0x80 | ((c >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
  }
  return out;
}

std::string u32_to_utf8(std::u32string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char32_t c : text) out += to_utf8(c);
  return out;
}

Alphabet::Alphabet(std::u32string symbols) : symbols_(std::move(symbols)) {
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    if (!index_.emplace(symbols_[i], static_cast<int>(i)).second) {
      throw Error(ErrorCode::kDuplicateChar, "duplicate symbol '" + to_utf8(symbols_[i]) + "' in alphabet");
    }
  }
}

Alphabet Alphabet::from_words(std::span<const std::u32string> words) {
  std::set<char32_t> seen;
  for (const auto& w : words) seen.insert(w.begin(), w.end());
  return Alphabet(std::u32string(seen.begin(), seen.end()));
}

std::optional<int> Alphabet::find(char32_t c) const {
  auto it = index_.find(c);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int Alphabet::index(char32_t c) const {
  auto it = index_.find(c);
  if (it == index_.end()) throw Error(ErrorCode::kUnknownChar, "unknown character '" + to_utf8(c) + "'");
  return it->second;
}

std::vector<int> Alphabet::encode(std::u32string_view word) const {
  std::vector<int> out;
  out.reserve(word.size());
  for (char32_t c : word) out.push_back(index(c));
  return out;
}

std::u32string Alphabet::decode(std::span<const int> indices) const {
  std::u32string out;
  out.reserve(indices.size());
  for (int i : indices) out.push_back(symbols_.at(static_cast<std::size_t>(i)));
  return out;
}

}  // namespace swipeforge
