#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace narralign::text {

inline bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

/// Collapses whitespace runs to one space, drops ASCII control characters and trims.
/// Case and non-ASCII bytes are preserved.
inline std::string normalize_whitespace(std::string_view in) {
  std::string out;
  out.reserve(in.size());
  bool pending_space = false;
  for (unsigned char c : in) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (c < 0x20 || c == 0x7f) continue;
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(c));
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline std::string to_upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Bytes >= 0x80 belong to words so UTF-8 letters are not split apart.
inline bool is_word_byte(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; }

/// Lowercased words split on every non-alphanumeric ASCII byte. Stopwords are kept.
inline std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> words;
  std::string cur;
  for (unsigned char c : s) {
    if (is_word_byte(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

/// True if the text has at least one letter and no lowercase ASCII letters.
inline bool is_all_caps(std::string_view s) {
  bool letter = false;
  for (unsigned char c : s) {
    if (std::islower(c)) return false;
    if (std::isupper(c)) letter = true;
  }
  return letter;
}

inline std::size_t word_count(std::string_view s) { return tokenize(s).size(); }

/// A straight pair ("...") or a curly pair (U+201C ... U+201D).
inline bool contains_quote_pair(std::string_view s) {
  const auto first = s.find('"');
  if (first != std::string_view::npos && s.find('"', first + 1) != std::string_view::npos) return true;
  constexpr std::string_view open = "\xE2\x80\x9C";
  constexpr std::string_view close = "\xE2\x80\x9D";
  const auto o = s.find(open);
  return o != std::string_view::npos && s.find(close, o + open.size()) != std::string_view::npos;
}

}  // namespace narralign::text
