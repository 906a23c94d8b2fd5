#pragma once

#include <algorithm>
#include <barrier>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "narralign/error.hpp"

namespace narralign {

/// Predecessor of a DP cell. Gap moves carry kCredited when max(0, S) contributed a positive term.
enum class Move : std::uint8_t { stop = 0, diag = 1, up = 2, left = 3 };
inline constexpr std::uint8_t kCredited = 0x4;

using IndexPair = std::pair<std::size_t, std::size_t>;  // (book paragraph, script paragraph)

inline constexpr double kDefaultGap = -0.7;
inline constexpr std::size_t kDefaultCellBudget = 1'000'000'000;

struct FillOptions {
  double gap = kDefaultGap;
  std::size_t cell_budget = kDefaultCellBudget;
  unsigned threads = 1;
  std::size_t tile = 64;
};

/// The (m+1) x (n+1) Smith-Waterman matrix. Row i is book paragraph i-1, column j is script paragraph j-1.
class ScoreMatrix {
 public:
  ScoreMatrix(std::size_t m, std::size_t n)
      : m_(m), n_(n), h_((m + 1) * (n + 1), 0.0), moves_((m + 1) * (n + 1), 0) {}

  std::size_t m() const { return m_; }
  std::size_t n() const { return n_; }
  std::size_t idx(std::size_t i, std::size_t j) const { return i * (n_ + 1) + j; }

  double h(std::size_t i, std::size_t j) const { return h_[idx(i, j)]; }
  Move move(std::size_t i, std::size_t j) const { return static_cast<Move>(moves_[idx(i, j)] & 0x3); }
  bool credited(std::size_t i, std::size_t j) const { return (moves_[idx(i, j)] & kCredited) != 0; }
  std::uint8_t raw_move(std::size_t i, std::size_t j) const { return moves_[idx(i, j)]; }

  void set(std::size_t i, std::size_t j, double h, std::uint8_t mv) {
    h_[idx(i, j)] = h;
    moves_[idx(i, j)] = mv;
  }

  double max_score() const { return h_.empty() ? 0.0 : *std::max_element(h_.begin(), h_.end()); }

  bool operator==(const ScoreMatrix& o) const {
    return m_ == o.m_ && n_ == o.n_ && moves_ == o.moves_ &&
           std::equal(h_.begin(), h_.end(), o.h_.begin(), o.h_.end(),
                      [](double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); });
  }

 private:
  std::size_t m_, n_;
  std::vector<double> h_;
  std::vector<std::uint8_t> moves_;
};

struct CellValue {
  double h;
  std::uint8_t move;
};

/// One application of the recurrence. Ties resolve diag, then up, then left, then stop.
inline CellValue sw_cell(double diag_h, double up_h, double left_h, double s, double gap) {
  const double credit = std::max(0.0, s);
  const double diag = diag_h + s;
  const double up = up_h + gap + credit;
  const double left = left_h + gap + credit;
  const std::uint8_t flag = s > 0.0 ? kCredited : 0;
  CellValue best{diag, static_cast<std::uint8_t>(Move::diag)};
  if (up > best.h) best = {up, static_cast<std::uint8_t>(static_cast<std::uint8_t>(Move::up) | flag)};
  if (left > best.h) best = {left, static_cast<std::uint8_t>(static_cast<std::uint8_t>(Move::left) | flag)};
  if (0.0 > best.h) best = {0.0, static_cast<std::uint8_t>(Move::stop)};
  return best;
}

namespace detail {

inline void check_fill_args(std::size_t m, std::size_t n, const FillOptions& opt) {
  if (m == 0 || n == 0) fail(ErrorKind::InvalidArgument, "both sequences must be non-empty");
  if (!(opt.gap < 0.0)) fail(ErrorKind::InvalidArgument, "gap penalty must be negative");
  const double cells = static_cast<double>(m + 1) * static_cast<double>(n + 1);
  if (cells > static_cast<double>(opt.cell_budget))
    fail(ErrorKind::CapacityExceeded, "DP matrix needs " + std::to_string(static_cast<unsigned long long>(cells)) +
                                          " cells, budget is " + std::to_string(opt.cell_budget));
}

template <class Scorer>
void fill_block(ScoreMatrix& hm, const Scorer& s, double gap, std::size_t i0, std::size_t i1, std::size_t j0,
                std::size_t j1) {
  for (std::size_t i = i0; i < i1; ++i)
    for (std::size_t j = j0; j < j1; ++j) {
      const auto c = sw_cell(hm.h(i - 1, j - 1), hm.h(i - 1, j), hm.h(i, j - 1), s(i - 1, j - 1), gap);
      hm.set(i, j, c.h, c.move);
    }
}

}  // namespace detail

/// Fills the many-to-many Smith-Waterman matrix. `s(i, j)` is the similarity of book paragraph i and
/// script paragraph j (0-based). With threads > 1 tiles are processed in anti-diagonal waves; every
/// cell still sees the same operands, so the result is bit-identical to the serial fill.
template <class Scorer>
ScoreMatrix sw_fill(const Scorer& s, std::size_t m, std::size_t n, const FillOptions& opt = {}) {
  detail::check_fill_args(m, n, opt);
  ScoreMatrix hm(m, n);
  if (opt.threads <= 1) {
    detail::fill_block(hm, s, opt.gap, 1, m + 1, 1, n + 1);
    return hm;
  }

  const std::size_t tile = std::max<std::size_t>(1, opt.tile);
  const std::size_t rows = (m + tile - 1) / tile;
  const std::size_t cols = (n + tile - 1) / tile;
  const unsigned workers = opt.threads;
  std::barrier sync(static_cast<std::ptrdiff_t>(workers));

  auto work = [&](unsigned t) {
    for (std::size_t d = 0; d + 1 < rows + cols; ++d) {
      const std::size_t first = d >= cols ? d - cols + 1 : 0;
      const std::size_t last = std::min(d, rows - 1);
      for (std::size_t bi = first, k = 0; bi <= last; ++bi, ++k) {
        if (k % workers != t) continue;
        const std::size_t bj = d - bi;
        detail::fill_block(hm, s, opt.gap, 1 + bi * tile, 1 + std::min(m, (bi + 1) * tile), 1 + bj * tile,
                           1 + std::min(n, (bj + 1) * tile));
      }
      sync.arrive_and_wait();
    }
  };

  std::vector<std::jthread> pool;
  for (unsigned t = 1; t < workers; ++t) pool.emplace_back(work, t);
  work(0);
  return hm;
}

/// Recomputes every cell from its stored neighbours; returns the first cell that disagrees bitwise.
template <class Scorer>
std::optional<IndexPair> audit_fill(const ScoreMatrix& hm, const Scorer& s, double gap) {
  for (std::size_t i = 0; i <= hm.m(); ++i)
    for (std::size_t j = 0; j <= hm.n(); ++j) {
      if (i == 0 || j == 0) {
        if (hm.h(i, j) != 0.0 || hm.raw_move(i, j) != 0) return IndexPair{i, j};
        continue;
      }
      const auto c = sw_cell(hm.h(i - 1, j - 1), hm.h(i - 1, j), hm.h(i, j - 1), s(i - 1, j - 1), gap);
      if (std::bit_cast<std::uint64_t>(c.h) != std::bit_cast<std::uint64_t>(hm.h(i, j)) || c.move != hm.raw_move(i, j))
        return IndexPair{i, j};
      if (hm.h(i, j) < 0.0) return IndexPair{i, j};
    }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Independent local matches

struct LocalMatch {
  std::vector<IndexPair> pairs;  // ascending along the alignment path
  double score = 0.0;

  bool operator==(const LocalMatch&) const = default;
};

struct AlignmentParams {
  double gap = kDefaultGap;
  double th_s = 0.6;
  std::string metric = "embedding_cosine";
  std::uint64_t seed = 0;
  std::string aligner = "sw";
  bool diagonal_only = false;
  double min_score = 0.0;

  bool operator==(const AlignmentParams&) const = default;
};

struct AlignmentResult {
  std::vector<LocalMatch> matches;  // descending score
  std::set<IndexPair> pair_set;
  AlignmentParams params;

  bool operator==(const AlignmentResult&) const = default;

  /// Best score of any match containing each pair.
  std::vector<std::pair<IndexPair, double>> scored_pairs() const {
    std::vector<std::pair<IndexPair, double>> out;
    for (const auto& mt : matches)
      for (const auto& p : mt.pairs) out.emplace_back(p, mt.score);
    std::sort(out.begin(), out.end());
    return out;
  }
};

struct ExtractOptions {
  double min_score = 0.0;
  // Record gap steps whose similarity was credited as aligned pairs (many-to-many).
  bool gap_pairs = true;
};

/// Greedy extraction of non-overlapping local alignments. Cells are visited by descending H (ties by
/// smaller i, then j); each unconsumed cell is traced back until a zero cell or an already consumed
/// cell, and every visited cell becomes consumed. The match score is H at the start minus H where the
/// traceback ended, so a traceback cut short by an earlier match keeps only its own contribution. A
/// traceback yields a match when it has a diagonal step and its score exceeds min_score.
inline AlignmentResult extract_matches(const ScoreMatrix& hm, const ExtractOptions& opt = {}) {
  std::vector<std::size_t> order;
  for (std::size_t i = 1; i <= hm.m(); ++i)
    for (std::size_t j = 1; j <= hm.n(); ++j)
      if (hm.h(i, j) > opt.min_score) order.push_back(hm.idx(i, j));
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ha = hm.h(a / (hm.n() + 1), a % (hm.n() + 1));
    const double hb = hm.h(b / (hm.n() + 1), b % (hm.n() + 1));
    if (ha != hb) return ha > hb;
    return a < b;  // row-major index: smaller i, then smaller j
  });

  AlignmentResult result;
  result.params.min_score = opt.min_score;
  result.params.diagonal_only = !opt.gap_pairs;
  std::vector<bool> consumed((hm.m() + 1) * (hm.n() + 1), false);

  for (std::size_t start : order) {
    if (consumed[start]) continue;
    std::size_t i = start / (hm.n() + 1);
    std::size_t j = start % (hm.n() + 1);
    LocalMatch match;
    match.score = hm.h(i, j);
    bool has_diag = false;
    while (i > 0 && j > 0) {
      const std::size_t c = hm.idx(i, j);
      if (consumed[c] || hm.h(i, j) <= 0.0 || hm.move(i, j) == Move::stop) break;
      consumed[c] = true;
      switch (hm.move(i, j)) {
        case Move::diag:
          match.pairs.emplace_back(i - 1, j - 1);
          has_diag = true;
          --i;
          --j;
          break;
        case Move::up:
          if (opt.gap_pairs && hm.credited(i, j)) match.pairs.emplace_back(i - 1, j - 1);
          --i;
          break;
        case Move::left:
          if (opt.gap_pairs && hm.credited(i, j)) match.pairs.emplace_back(i - 1, j - 1);
          --j;
          break;
        case Move::stop:
          break;
      }
    }
    if (i > 0 && j > 0) match.score -= hm.h(i, j);
    if (!has_diag || !(match.score > opt.min_score)) continue;
    std::reverse(match.pairs.begin(), match.pairs.end());
    result.pair_set.insert(match.pairs.begin(), match.pairs.end());
    result.matches.push_back(std::move(match));
  }
  std::stable_sort(result.matches.begin(), result.matches.end(),
                   [](const LocalMatch& a, const LocalMatch& b) { return a.score > b.score; });
  return result;
}

template <class Scorer>
AlignmentResult smith_waterman_align(const Scorer& s, std::size_t m, std::size_t n, const FillOptions& fill = {},
                                     const ExtractOptions& extract = {}) {
  auto result = extract_matches(sw_fill(s, m, n, fill), extract);
  result.params.gap = fill.gap;
  return result;
}

// ---------------------------------------------------------------------------
// Baselines

/// 1-1 matching by descending similarity; only positive similarities are accepted.
template <class Scorer>
AlignmentResult greedy_baseline(const Scorer& s, std::size_t m, std::size_t n) {
  struct Cand {
    double s;
    std::size_t i, j;
  };
  std::vector<Cand> cands;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double v = s(i, j);
      if (v > 0.0) cands.push_back({v, i, j});
    }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.s != b.s) return a.s > b.s;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  });
  std::vector<bool> book_used(m, false), script_used(n, false);
  AlignmentResult result;
  result.params.aligner = "greedy";
  for (const auto& c : cands) {
    if (book_used[c.i] || script_used[c.j]) continue;
    book_used[c.i] = script_used[c.j] = true;
    result.matches.push_back({{{c.i, c.j}}, c.s});
    result.pair_set.insert({c.i, c.j});
  }
  return result;
}

/// Splits `scene_count` scenes over chapters in proportion to chapter length (largest remainder,
/// ties to the earlier chapter) and assigns them in order. Returns the chapter of each scene.
inline std::vector<std::size_t> length_baseline(const std::vector<std::size_t>& chapter_lengths,
                                                std::size_t scene_count) {
  if (chapter_lengths.empty()) fail(ErrorKind::InvalidArgument, "no chapters");
  const std::size_t c = chapter_lengths.size();
  std::vector<double> weights(chapter_lengths.begin(), chapter_lengths.end());
  double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (total == 0.0) {
    std::fill(weights.begin(), weights.end(), 1.0);
    total = static_cast<double>(c);
  }

  std::vector<std::size_t> alloc(c);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < c; ++k) {
    const double quota = static_cast<double>(scene_count) * weights[k] / total;
    alloc[k] = static_cast<std::size_t>(std::floor(quota));
    assigned += alloc[k];
    remainders.emplace_back(quota - std::floor(quota), k);
  }
  std::stable_sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < scene_count; ++r, ++assigned) ++alloc[remainders[r % c].second];

  std::vector<std::size_t> scene_to_chapter;
  scene_to_chapter.reserve(scene_count);
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t t = 0; t < alloc[k]; ++t) scene_to_chapter.push_back(k);
  return scene_to_chapter;
}

}  // namespace narralign
