#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "narralign/align.hpp"
#include "narralign/corpus.hpp"
#include "narralign/error.hpp"
#include "narralign/stats.hpp"
#include "narralign/text.hpp"

namespace narralign {

// ---------------------------------------------------------------------------
// Retention

struct RetentionReport {
  std::size_t book_size = 0;
  std::set<std::size_t> retained;        // r_b, book paragraph indices
  std::vector<bool> unit_retained;       // indexed by unit_id
  std::vector<std::size_t> unit_aligned; // aligned paragraph count per unit
  double retention_pct = 0.0;
};

inline void check_partition(const std::vector<BookUnit>& units, std::size_t book_size) {
  std::size_t expect = 0;
  for (std::size_t k = 0; k < units.size(); ++k) {
    const auto& u = units[k];
    if (u.unit_id != k || u.start != expect || u.end <= u.start)
      fail(ErrorKind::InvariantViolation, "book units do not partition the book at unit " + std::to_string(k));
    expect = u.end;
  }
  if (expect != book_size) fail(ErrorKind::InvariantViolation, "book units do not cover the book");
}

/// A book paragraph is retained when it occurs in any aligned pair. A unit is removed only when fewer
/// than half of its paragraphs are retained, so exactly half counts as retained.
inline RetentionReport retention(const AlignmentResult& align, const std::vector<BookUnit>& units, std::size_t book_size) {
  check_partition(units, book_size);
  RetentionReport r;
  r.book_size = book_size;
  for (const auto& [b, s] : align.pair_set) {
    if (b >= book_size) fail(ErrorKind::InvariantViolation, "aligned book index out of range");
    r.retained.insert(b);
  }
  for (const auto& u : units) {
    std::size_t hit = 0;
    for (std::size_t i = u.start; i < u.end; ++i) hit += r.retained.contains(i);
    r.unit_aligned.push_back(hit);
    r.unit_retained.push_back(2 * hit >= u.size());
  }
  r.retention_pct = book_size == 0 ? 0.0 : 100.0 * static_cast<double>(r.retained.size()) / static_cast<double>(book_size);
  return r;
}

// ---------------------------------------------------------------------------
// Chapter voting

/// Each aligned pair casts one vote from its script paragraph's scene for its book paragraph's chapter.
/// Ties go to the larger summed match score, then the lower chapter. Scenes without votes are absent.
inline std::map<std::size_t, std::size_t> chapter_vote(const AlignmentResult& align, const Document& book,
                                                       const Document& script) {
  struct Tally {
    std::size_t votes = 0;
    double score = 0.0;
  };
  std::map<std::size_t, std::map<std::size_t, Tally>> tallies;
  for (const auto& mt : align.matches)
    for (const auto& [b, s] : mt.pairs) {
      const auto scene = script.paragraphs.at(s).scene_id;
      const auto chapter = book.paragraphs.at(b).chapter_id;
      if (!scene || !chapter) fail(ErrorKind::InvariantViolation, "chapter_vote needs scene and chapter ids");
      auto& t = tallies[*scene][*chapter];
      ++t.votes;
      t.score += mt.score;
    }
  std::map<std::size_t, std::size_t> out;
  for (const auto& [scene, per_chapter] : tallies) {
    const Tally* best = nullptr;
    std::size_t best_chapter = 0;
    for (const auto& [chapter, t] : per_chapter) {
      if (!best || t.votes > best->votes || (t.votes == best->votes && t.score > best->score)) {
        best = &t;
        best_chapter = chapter;
      }
    }
    out[scene] = best_chapter;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dialog retention

struct DialogReport {
  std::size_t book_size = 0;
  std::size_t retained_count = 0;      // |r_b|
  std::size_t dialog_count = 0;        // |d_b|
  std::size_t retained_dialog = 0;     // |r_b ∩ d_b|
  std::size_t nondialog_count = 0;
  std::size_t retained_nondialog = 0;
  std::optional<double> u_b;
  std::optional<double> v_b;
};

namespace detail {

inline std::optional<double> retention_ratio(std::size_t kept_subset, std::size_t subset, std::size_t total,
                                             std::size_t kept_total) {
  if (subset == 0 || kept_total == 0) return std::nullopt;
  return (static_cast<double>(kept_subset) / static_cast<double>(subset)) *
         (static_cast<double>(total) / static_cast<double>(kept_total));
}

}  // namespace detail

/// Counts and ratios; undefined ratios are left empty.
inline DialogReport dialog_counts(const RetentionReport& ret, const Document& book) {
  DialogReport d;
  d.book_size = book.size();
  d.retained_count = ret.retained.size();
  for (const auto& p : book.paragraphs) {
    const bool kept = ret.retained.contains(p.index);
    if (p.is_dialog) {
      ++d.dialog_count;
      d.retained_dialog += kept;
    } else {
      ++d.nondialog_count;
      d.retained_nondialog += kept;
    }
  }
  d.u_b = detail::retention_ratio(d.retained_dialog, d.dialog_count, d.book_size, d.retained_count);
  d.v_b = detail::retention_ratio(d.retained_nondialog, d.nondialog_count, d.book_size, d.retained_count);
  return d;
}

/// Dialog retention u_b and its non-dialog counterpart v_b; throws UndefinedRatio on a zero denominator.
inline DialogReport dialog_ratio(const RetentionReport& ret, const Document& book) {
  auto d = dialog_counts(ret, book);
  if (!d.u_b) fail(ErrorKind::UndefinedRatio, "u_b undefined: no dialog paragraphs or nothing retained");
  if (!d.v_b) fail(ErrorKind::UndefinedRatio, "v_b undefined: no non-dialog paragraphs or nothing retained");
  return d;
}

// ---------------------------------------------------------------------------
// Narrative order

struct OrderReport {
  std::size_t n = 0;
  std::size_t lis_length = 0;
  double expected_random = 0.0;  // 2*sqrt(n)
  std::size_t upper_bound = 0;
};

/// Script indices in book order: one per aligned book paragraph (its highest-scoring pair, ties to the
/// smaller script index), or every pair when `all_pairs` is set.
inline std::vector<std::size_t> order_sequence(const AlignmentResult& align, bool all_pairs = false) {
  std::vector<std::size_t> seq;
  if (all_pairs) {
    for (const auto& [b, s] : align.pair_set) seq.push_back(s);
    return seq;
  }
  std::map<std::size_t, std::pair<double, std::size_t>> best;  // book -> (score, script)
  for (const auto& [pair, score] : align.scored_pairs()) {
    const auto [b, s] = pair;
    auto it = best.find(b);
    if (it == best.end() || score > it->second.first || (score == it->second.first && s < it->second.second))
      best[b] = {score, s};
  }
  for (const auto& [b, v] : best) seq.push_back(v.second);
  return seq;
}

inline OrderReport lis_order(const AlignmentResult& align, bool all_pairs = false) {
  const auto seq = order_sequence(align, all_pairs);
  OrderReport r;
  r.n = seq.size();
  r.lis_length = stats::lis_length(seq);
  r.expected_random = 2.0 * std::sqrt(static_cast<double>(r.n));
  r.upper_bound = r.n;
  return r;
}

// ---------------------------------------------------------------------------
// Bechdel representation ratio

struct GenderLexicon {
  std::map<std::string, Gender> names;  // uppercase
  std::set<std::string> male_tokens = {"he", "him", "his", "mr"};
};

struct BechdelReport {
  std::size_t dialogs = 0;                 // |d|
  std::size_t retained_dialogs = 0;        // |rd|
  std::size_t female_only = 0;             // |d_{f,b}|
  std::size_t retained_female_only = 0;    // |d_{f,b} ∩ rd|
  std::size_t female = 0, retained_female = 0;
  std::size_t male = 0, retained_male = 0;
  std::optional<double> ratio;             // B
  std::optional<double> female_ratio;
  std::optional<double> male_ratio;
  bool predicted_pass = false;
};

namespace detail {

/// Text with every quoted span removed.
inline std::string outside_quotes(const std::string& s) {
  std::string out;
  bool inside = false;
  for (std::size_t k = 0; k < s.size();) {
    if (s[k] == '"') {
      inside = !inside;
      ++k;
    } else if (s.compare(k, 3, "\xE2\x80\x9C") == 0) {
      inside = true;
      k += 3;
    } else if (s.compare(k, 3, "\xE2\x80\x9D") == 0) {
      inside = false;
      k += 3;
    } else {
      if (!inside) out.push_back(s[k]);
      ++k;
    }
  }
  return out;
}

/// Character names occurring in `s`, in order of appearance.
inline std::vector<std::string> name_mentions(const std::string& s, const std::map<std::string, Gender>& genders) {
  auto words = text::tokenize(s);
  for (auto& w : words) w = text::to_upper(w);
  std::vector<std::pair<std::size_t, std::string>> hits;
  for (const auto& [name, g] : genders) {
    auto parts = text::tokenize(name);
    for (auto& p : parts) p = text::to_upper(p);
    if (parts.empty() || parts.size() > words.size()) continue;
    for (std::size_t k = 0; k + parts.size() <= words.size(); ++k)
      if (std::equal(parts.begin(), parts.end(), words.begin() + static_cast<std::ptrdiff_t>(k))) hits.emplace_back(k, name);
  }
  std::sort(hits.begin(), hits.end());
  std::vector<std::string> out;
  for (auto& h : hits) out.push_back(std::move(h.second));
  return out;
}

}  // namespace detail

/// Gender of the speaker of each paragraph: the explicit speaker tag, else the first character named
/// outside quotes, else the last character named in the two preceding paragraphs.
inline std::vector<Gender> speaker_genders(const Document& book, const std::map<std::string, Gender>& genders) {
  std::vector<Gender> out(book.size(), Gender::unknown);
  auto gender_of = [&](const std::string& name) {
    const auto it = genders.find(text::to_upper(name));
    return it == genders.end() ? Gender::unknown : it->second;
  };
  for (std::size_t i = 0; i < book.size(); ++i) {
    const auto& p = book.paragraphs[i];
    if (p.speaker) {
      out[i] = gender_of(*p.speaker);
      continue;
    }
    const auto own = detail::name_mentions(detail::outside_quotes(p.text), genders);
    if (!own.empty()) {
      out[i] = gender_of(own.front());
      continue;
    }
    for (std::size_t back = 1; back <= 2 && back <= i; ++back) {
      const auto prev = detail::name_mentions(book.paragraphs[i - back].text, genders);
      if (!prev.empty()) {
        out[i] = gender_of(prev.back());
        break;
      }
    }
  }
  return out;
}

/// The film is predicted to pass when female-only dialog is retained above the overall dialog rate.
inline bool bechdel_predicts_pass(std::optional<double> b) { return b && *b > 1.0; }

/// Counts and ratios; undefined ratios are left empty.
inline BechdelReport bechdel_counts(const RetentionReport& ret, const Document& book, const GenderLexicon& lexicon = {}) {
  std::map<std::string, Gender> genders;
  for (const auto& [name, g] : lexicon.names) genders[text::to_upper(name)] = g;
  for (const auto& [name, g] : book.characters) genders[text::to_upper(name)] = g;
  const bool any_tag = std::any_of(genders.begin(), genders.end(), [](const auto& kv) { return kv.second != Gender::unknown; });
  if (!any_tag) fail(ErrorKind::MissingGenderData, "no character carries a gender tag");

  std::map<std::string, Gender> male_names;
  for (const auto& [name, g] : genders)
    if (g == Gender::male) male_names.emplace(name, g);

  const auto speakers = speaker_genders(book, genders);
  BechdelReport r;
  for (const auto& p : book.paragraphs) {
    if (!p.is_dialog) continue;
    const bool kept = ret.retained.contains(p.index);
    ++r.dialogs;
    r.retained_dialogs += kept;
    const Gender g = speakers[p.index];
    if (g == Gender::female) {
      ++r.female;
      r.retained_female += kept;
      bool mentions_male = !detail::name_mentions(p.text, male_names).empty();
      for (const auto& w : text::tokenize(p.text)) mentions_male = mentions_male || lexicon.male_tokens.contains(w);
      if (!mentions_male) {
        ++r.female_only;
        r.retained_female_only += kept;
      }
    } else if (g == Gender::male) {
      ++r.male;
      r.retained_male += kept;
    }
  }
  r.ratio = detail::retention_ratio(r.retained_female_only, r.female_only, r.dialogs, r.retained_dialogs);
  r.female_ratio = detail::retention_ratio(r.retained_female, r.female, r.dialogs, r.retained_dialogs);
  r.male_ratio = detail::retention_ratio(r.retained_male, r.male, r.dialogs, r.retained_dialogs);
  r.predicted_pass = bechdel_predicts_pass(r.ratio);
  return r;
}

/// B; throws UndefinedRatio when |d_{f,b}| or |rd| is zero.
inline BechdelReport bechdel_ratio(const RetentionReport& ret, const Document& book, const GenderLexicon& lexicon = {}) {
  auto r = bechdel_counts(ret, book, lexicon);
  if (!r.ratio) fail(ErrorKind::UndefinedRatio, "B undefined: no female-only dialog or no retained dialog");
  return r;
}

// ---------------------------------------------------------------------------
// Faithfulness

struct FaithfulnessRank {
  double spearman_rho = 0.0;
  double p_value = 1.0;
  double auc = 0.5;
};

inline FaithfulnessRank faithfulness_rank(const std::vector<RetentionReport>& reports, const std::vector<bool>& faithful) {
  if (reports.size() != faithful.size()) fail(ErrorKind::InvalidArgument, "faithfulness_rank: length mismatch");
  std::vector<double> pct, lab;
  for (std::size_t k = 0; k < reports.size(); ++k) {
    pct.push_back(reports[k].retention_pct);
    lab.push_back(faithful[k] ? 1.0 : 0.0);
  }
  const auto c = stats::spearman_rho(pct, lab);
  return {c.rho, c.p_value, stats::auc_roc(pct, faithful)};
}

}  // namespace narralign
