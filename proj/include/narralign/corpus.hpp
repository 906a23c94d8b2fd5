#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "narralign/error.hpp"
#include "narralign/text.hpp"

namespace narralign {

enum class DocKind { book, script };
enum class Gender { female, male, unknown };

constexpr std::string_view to_string(DocKind k) { return k == DocKind::book ? "book" : "script"; }

constexpr std::string_view to_string(Gender g) {
  switch (g) {
    case Gender::female: return "female";
    case Gender::male: return "male";
    case Gender::unknown: return "unknown";
  }
  return "unknown";
}

struct Paragraph {
  std::size_t index = 0;
  std::string text;
  std::optional<std::size_t> chapter_id;
  std::optional<std::size_t> scene_id;
  std::optional<std::size_t> unit_id;
  bool is_dialog = false;
  std::optional<std::string> speaker;

  bool operator==(const Paragraph&) const = default;
};

struct Document {
  std::string doc_id;
  DocKind kind = DocKind::book;
  std::vector<Paragraph> paragraphs;
  // Keys are uppercase.
  std::map<std::string, Gender> characters;

  std::size_t size() const { return paragraphs.size(); }
  bool operator==(const Document&) const = default;
};

/// Half-open paragraph interval [start, end).
struct BookUnit {
  std::size_t unit_id = 0;
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - start; }
  bool operator==(const BookUnit&) const = default;
};

namespace detail {

inline void check_monotone(const std::vector<Paragraph>& ps, std::optional<std::size_t> Paragraph::*field,
                           std::string_view name) {
  std::optional<std::size_t> prev;
  for (const auto& p : ps) {
    const auto& v = p.*field;
    if (!v) continue;
    if (prev && *v < *prev)
      fail(ErrorKind::InvariantViolation,
           std::string(name) + " decreases at paragraph " + std::to_string(p.index));
    prev = v;
  }
}

inline std::vector<std::string> split_lines(std::string_view raw) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos <= raw.size()) {
    auto nl = raw.find('\n', pos);
    if (nl == std::string_view::npos) nl = raw.size();
    std::string line(raw.substr(pos, nl - pos));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    pos = nl + 1;
  }
  return lines;
}

inline std::string join(const std::vector<std::string>& parts, std::size_t from = 0) {
  std::string out;
  for (std::size_t i = from; i < parts.size(); ++i) {
    if (!out.empty()) out.push_back(' ');
    out += parts[i];
  }
  return out;
}

inline bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

}  // namespace detail

/// Checks every Paragraph/Document invariant; throws InvariantViolation.
inline void validate(const Document& doc) {
  for (std::size_t i = 0; i < doc.paragraphs.size(); ++i) {
    const auto& p = doc.paragraphs[i];
    if (p.index != i)
      fail(ErrorKind::InvariantViolation,
           "paragraph indices are not contiguous: expected " + std::to_string(i) + ", got " + std::to_string(p.index));
    if (text::normalize_whitespace(p.text).empty())
      fail(ErrorKind::InvariantViolation, "paragraph " + std::to_string(i) + " has empty text");
    if (doc.kind == DocKind::script && !p.scene_id)
      fail(ErrorKind::InvariantViolation, "script paragraph " + std::to_string(i) + " has no scene_id");
    if (doc.kind == DocKind::book && !p.chapter_id)
      fail(ErrorKind::InvariantViolation, "book paragraph " + std::to_string(i) + " has no chapter_id");
  }
  detail::check_monotone(doc.paragraphs, &Paragraph::chapter_id, "chapter_id");
  detail::check_monotone(doc.paragraphs, &Paragraph::scene_id, "scene_id");
  detail::check_monotone(doc.paragraphs, &Paragraph::unit_id, "unit_id");
  for (const auto& [name, g] : doc.characters)
    if (name != text::to_upper(name))
      fail(ErrorKind::InvariantViolation, "character key is not uppercase: " + name);
}

// ---------------------------------------------------------------------------
// Screenplays

namespace script_grammar {

inline constexpr std::array<std::string_view, 4> kSlugPrefixes = {"INT.", "EXT.", "INT/EXT", "I/E"};
inline constexpr std::array<std::string_view, 14> kTimesOfDay = {
    "DAY",  "NIGHT",  "MORNING",    "EVENING",       "AFTERNOON", "DAWN",    "DUSK",
    "LATER", "CONTINUOUS", "MOMENTS LATER", "SAME TIME", "SUNSET", "SUNRISE", "NOON"};

/// Scene heading: an INT./EXT. style prefix, or an all-caps "LOCATION - TIME" heading.
inline bool is_slug_line(std::string_view line) {
  const std::string upper = text::to_upper(text::trim(line));
  for (auto p : kSlugPrefixes)
    if (detail::starts_with(upper, p)) return true;
  const auto t = text::trim(line);
  if (!text::is_all_caps(t)) return false;
  const auto dash = t.rfind(" - ");
  if (dash == std::string_view::npos || dash == 0) return false;
  const auto suffix = text::trim(t.substr(dash + 3));
  return std::find(kTimesOfDay.begin(), kTimesOfDay.end(), suffix) != kTimesOfDay.end();
}

/// "CUT TO:", "FADE IN:", "FADE OUT." and similar.
inline bool is_transition(std::string_view line) {
  const auto t = text::trim(line);
  if (!text::is_all_caps(t)) return false;
  return t.back() == ':' || detail::starts_with(t, "FADE ");
}

/// Strips "(V.O.)"-style extensions from a cue line.
inline std::string cue_name(std::string_view line) {
  std::string out;
  int depth = 0;
  for (char c : line) {
    if (c == '(') ++depth;
    else if (c == ')') depth = std::max(0, depth - 1);
    else if (depth == 0) out.push_back(c);
  }
  return text::normalize_whitespace(out);
}

inline bool is_character_cue(std::string_view line) {
  const auto t = text::trim(line);
  if (!text::is_all_caps(t) || is_slug_line(t) || is_transition(t)) return false;
  const std::string name = cue_name(t);
  if (name.empty() || name.size() > 40) return false;
  for (unsigned char c : name)
    if (!(std::isalnum(c) || c == ' ' || c == '\'' || c == '.' || c == '-' || c == '&' || c >= 0x80)) return false;
  const auto words = std::count(name.begin(), name.end(), ' ') + 1;
  return words <= 4;
}

}  // namespace script_grammar

/// Splits a screenplay into paragraphs on blank lines. Every slug line opens a new scene and is
/// dropped; a block whose first line is a character cue becomes a dialog paragraph for that speaker.
/// Text before the first slug line (title pages) and transitions are dropped.
inline Document parse_script(std::string_view raw, std::string doc_id = "script") {
  if (text::trim(raw).empty()) fail(ErrorKind::EmptyInput, "script text is empty");

  Document doc;
  doc.doc_id = std::move(doc_id);
  doc.kind = DocKind::script;

  std::optional<std::size_t> scene;
  std::vector<std::string> block;

  auto flush = [&] {
    if (block.empty()) return;
    if (scene) {
      Paragraph p;
      p.scene_id = scene;
      if (block.size() >= 2 && script_grammar::is_character_cue(block.front())) {
        p.is_dialog = true;
        p.speaker = script_grammar::cue_name(block.front());
        p.text = text::normalize_whitespace(detail::join(block, 1));
      } else {
        p.text = text::normalize_whitespace(detail::join(block));
      }
      if (!p.text.empty()) {
        p.index = doc.paragraphs.size();
        doc.paragraphs.push_back(std::move(p));
      }
    }
    block.clear();
  };

  for (const auto& line : detail::split_lines(raw)) {
    const auto t = text::trim(line);
    if (t.empty()) {
      flush();
    } else if (script_grammar::is_slug_line(t)) {
      flush();
      scene = scene ? *scene + 1 : 0;
    } else if (script_grammar::is_transition(t)) {
      flush();
    } else {
      block.emplace_back(t);
    }
  }
  flush();

  if (!scene) fail(ErrorKind::NoScenesFound, "no slug lines detected; input does not look like a screenplay");
  return doc;
}

/// Inverse of parse_script for documents whose texts are already normalized.
inline std::string render_script(const Document& doc) {
  std::string out;
  std::size_t next_scene = 0;
  for (const auto& p : doc.paragraphs) {
    const std::size_t scene = p.scene_id.value_or(0);
    while (next_scene <= scene) {
      out += "INT. SCENE " + std::to_string(next_scene) + " - DAY\n\n";
      ++next_scene;
    }
    if (p.is_dialog && p.speaker) out += *p.speaker + "\n";
    out += p.text + "\n\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Books

namespace book_grammar {

inline const std::regex& default_chapter_pattern() {
  static const std::regex re(R"(^(CHAPTER|Chapter)\b)");
  return re;
}

/// Short all-caps line standing alone in its block, e.g. "THE BOY WHO LIVED".
inline bool is_caps_heading(std::string_view line) {
  const auto t = text::trim(line);
  return text::is_all_caps(t) && text::word_count(t) <= 8 && t.find('"') == std::string_view::npos &&
         t.find("\xE2\x80\x9C") == std::string_view::npos;
}

}  // namespace book_grammar

/// Splits a book into paragraphs on blank lines and assigns chapter ids. Heading lines are dropped.
/// Without an explicit pattern, lines starting with "CHAPTER"/"Chapter" and standalone short all-caps
/// lines are headings. Consecutive headings open a single chapter.
inline Document parse_book(std::string_view raw, const std::optional<std::regex>& chapter_pattern = std::nullopt,
                           std::string doc_id = "book") {
  if (text::trim(raw).empty()) fail(ErrorKind::EmptyInput, "book text is empty");

  Document doc;
  doc.doc_id = std::move(doc_id);
  doc.kind = DocKind::book;

  std::size_t chapter = 0;
  bool chapter_has_text = false;
  std::vector<std::string> block;

  auto open_chapter = [&] {
    if (chapter_has_text) {
      ++chapter;
      chapter_has_text = false;
    }
  };
  auto is_heading = [&](std::string_view line) {
    const std::string l(text::trim(line));
    return std::regex_search(l, chapter_pattern ? *chapter_pattern : book_grammar::default_chapter_pattern());
  };
  auto flush = [&] {
    if (block.empty()) return;
    if (!chapter_pattern && block.size() == 1 && book_grammar::is_caps_heading(block.front())) {
      open_chapter();
      block.clear();
      return;
    }
    Paragraph p;
    p.text = text::normalize_whitespace(detail::join(block));
    block.clear();
    if (p.text.empty()) return;
    p.index = doc.paragraphs.size();
    p.chapter_id = chapter;
    p.is_dialog = text::contains_quote_pair(p.text);
    doc.paragraphs.push_back(std::move(p));
    chapter_has_text = true;
  };

  for (const auto& line : detail::split_lines(raw)) {
    const auto t = text::trim(line);
    if (t.empty()) {
      flush();
    } else if (is_heading(t)) {
      flush();
      open_chapter();
    } else {
      block.emplace_back(t);
    }
  }
  flush();

  if (doc.paragraphs.empty()) fail(ErrorKind::EmptyInput, "book contains no paragraphs");
  return doc;
}

// ---------------------------------------------------------------------------
// Book units

namespace detail {

inline const std::set<std::string>& stopwords() {
  static const std::set<std::string> words = {
      "a",    "about", "after", "all",   "also",  "an",    "and",   "any",  "are",   "as",    "at",   "be",
      "been", "but",   "by",    "can",   "could", "did",   "do",    "for",  "from",  "had",   "has",  "have",
      "he",   "her",   "him",   "his",   "i",     "if",    "in",    "into", "is",    "it",    "its",  "me",
      "my",   "no",    "not",   "now",   "of",    "on",    "one",   "or",   "our",   "out",   "said", "she",
      "so",   "some",  "than",  "that",  "the",   "their", "them",  "then", "there", "they",  "this", "to",
      "up",   "us",    "was",   "we",    "were",  "what",  "when",  "which", "who",  "will",  "with", "would",
      "you",  "your"};
  return words;
}

inline std::set<std::string> content_words(std::string_view s) {
  std::set<std::string> out;
  for (auto& w : text::tokenize(s))
    if (!stopwords().contains(w)) out.insert(std::move(w));
  return out;
}

}  // namespace detail

/// Vocabulary overlap across the boundary before paragraph `boundary` within [lo, hi).
inline double boundary_overlap(const std::vector<std::set<std::string>>& vocab, std::size_t lo, std::size_t hi,
                               std::size_t boundary, std::size_t window) {
  std::set<std::string> left, right;
  for (std::size_t k = boundary > lo + window ? boundary - window : lo; k < boundary; ++k)
    left.insert(vocab[k].begin(), vocab[k].end());
  for (std::size_t k = boundary; k < std::min(hi, boundary + window); ++k)
    right.insert(vocab[k].begin(), vocab[k].end());
  std::size_t inter = 0;
  for (const auto& w : left) inter += right.contains(w);
  const std::size_t uni = left.size() + right.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// Segments a book into units of roughly `target_size` paragraphs. Breakpoints are local minima of
/// windowed vocabulary overlap, taken lowest first until each chapter has about len/target_size units;
/// any unit longer than 2*target_size is then split at its weakest admissible boundary. Chapter
/// boundaries are always breakpoints.
inline std::vector<BookUnit> segment_book_units(const Document& book, std::size_t target_size = 8,
                                                std::size_t window = 3) {
  if (book.paragraphs.empty()) fail(ErrorKind::InvalidArgument, "book has no paragraphs");
  if (target_size < 2 || window < 1) fail(ErrorKind::InvalidArgument, "target_size must be >= 2 and window >= 1");

  const std::size_t n = book.paragraphs.size();
  std::vector<std::set<std::string>> vocab(n);
  for (std::size_t i = 0; i < n; ++i) vocab[i] = detail::content_words(book.paragraphs[i].text);

  const std::size_t min_size = std::max<std::size_t>(1, target_size / 2);
  const std::size_t max_size = 2 * target_size;

  std::vector<std::size_t> cuts;  // every unit start except 0
  std::size_t lo = 0;
  while (lo < n) {
    std::size_t hi = lo + 1;
    while (hi < n && book.paragraphs[hi].chapter_id == book.paragraphs[lo].chapter_id) ++hi;
    const std::size_t len = hi - lo;

    std::vector<double> score(n + 1, 0.0);
    for (std::size_t b = lo + 1; b < hi; ++b) score[b] = boundary_overlap(vocab, lo, hi, b, window);

    std::vector<std::size_t> minima;
    for (std::size_t b = lo + 1; b < hi; ++b) {
      const bool left_ok = b == lo + 1 || score[b] <= score[b - 1];
      const bool right_ok = b + 1 == hi || score[b] <= score[b + 1];
      if (left_ok && right_ok) minima.push_back(b);
    }
    std::stable_sort(minima.begin(), minima.end(), [&](auto a, auto b) { return score[a] < score[b]; });

    const auto desired = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(static_cast<double>(len) / static_cast<double>(target_size))));
    std::set<std::size_t> chosen = {lo, hi};
    for (auto b : minima) {
      if (chosen.size() - 1 >= desired) break;
      const auto next = chosen.upper_bound(b);
      const auto prev = std::prev(next);
      if (b - *prev >= min_size && *next - b >= min_size) chosen.insert(b);
    }

    // Split oversized pieces at the lowest-overlap boundary that keeps both sides >= min_size.
    bool changed = true;
    while (changed) {
      changed = false;
      for (auto it = chosen.begin(); std::next(it) != chosen.end(); ++it) {
        const std::size_t a = *it, z = *std::next(it);
        if (z - a <= max_size) continue;
        std::size_t best = a + min_size;
        for (std::size_t b = a + min_size; b + min_size <= z; ++b)
          if (score[b] < score[best]) best = b;
        chosen.insert(best);
        changed = true;
        break;
      }
    }
    for (auto b : chosen)
      if (b != 0 && b < n) cuts.push_back(b);
    lo = hi;
  }

  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  std::vector<BookUnit> units;
  std::size_t start = 0;
  for (auto c : cuts) {
    units.push_back({units.size(), start, c});
    start = c;
  }
  units.push_back({units.size(), start, n});
  return units;
}

/// Fixed-size units, used for synthetic books and as a fallback segmentation.
inline std::vector<BookUnit> fixed_units(std::size_t paragraph_count, std::size_t unit_size) {
  if (unit_size == 0) fail(ErrorKind::InvalidArgument, "unit_size must be positive");
  std::vector<BookUnit> units;
  for (std::size_t s = 0; s < paragraph_count; s += unit_size)
    units.push_back({units.size(), s, std::min(paragraph_count, s + unit_size)});
  return units;
}

inline void assign_units(Document& book, const std::vector<BookUnit>& units) {
  for (const auto& u : units)
    for (std::size_t i = u.start; i < u.end; ++i) book.paragraphs.at(i).unit_id = u.unit_id;
}

/// Rebuilds units from per-paragraph unit_id tags (external segmentations).
inline std::vector<BookUnit> units_from_document(const Document& book) {
  std::vector<BookUnit> units;
  for (const auto& p : book.paragraphs) {
    if (!p.unit_id) fail(ErrorKind::InvariantViolation, "paragraph " + std::to_string(p.index) + " has no unit_id");
    if (units.empty() || units.back().unit_id != *p.unit_id) {
      if (!units.empty() && *p.unit_id != units.back().unit_id + 1)
        fail(ErrorKind::InvariantViolation, "unit ids must be consecutive");
      if (units.empty() && *p.unit_id != 0) fail(ErrorKind::InvariantViolation, "unit ids must start at 0");
      units.push_back({*p.unit_id, p.index, p.index + 1});
    } else {
      units.back().end = p.index + 1;
    }
  }
  return units;
}

}  // namespace narralign
