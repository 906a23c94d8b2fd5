#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "narralign/corpus.hpp"
#include "narralign/embedding.hpp"
#include "narralign/error.hpp"
#include "narralign/text.hpp"

namespace narralign {

enum class Metric { embedding_cosine, jaccard, tfidf, glove_mean, hamming };

constexpr std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::embedding_cosine: return "embedding_cosine";
    case Metric::jaccard: return "jaccard";
    case Metric::tfidf: return "tfidf";
    case Metric::glove_mean: return "glove_mean";
    case Metric::hamming: return "hamming";
  }
  return "unknown";
}

inline Metric parse_metric(std::string_view s) {
  for (auto m : {Metric::embedding_cosine, Metric::jaccard, Metric::tfidf, Metric::glove_mean, Metric::hamming})
    if (to_string(m) == s) return m;
  fail(ErrorKind::InvalidArgument, "unknown metric '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Raw text metrics

using WordCounts = std::map<std::string, std::size_t>;

inline WordCounts word_counts(std::string_view s) {
  WordCounts c;
  for (auto& w : text::tokenize(s)) ++c[std::move(w)];
  return c;
}

/// Multiset Jaccard: sum of min counts over sum of max counts.
inline double jaccard(const WordCounts& a, const WordCounts& b) {
  std::size_t inter = 0, uni = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() || ib != b.end()) {
    if (ib == b.end() || (ia != a.end() && ia->first < ib->first)) {
      uni += ia->second;
      ++ia;
    } else if (ia == a.end() || ib->first < ia->first) {
      uni += ib->second;
      ++ib;
    } else {
      inter += std::min(ia->second, ib->second);
      uni += std::max(ia->second, ib->second);
      ++ia;
      ++ib;
    }
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline double raw_jaccard(std::string_view a, std::string_view b) { return jaccard(word_counts(a), word_counts(b)); }

/// Chunked Hamming similarity. The longer word sequence is cut into as many chunks as the shorter one
/// has words; the score is the fraction of chunks that contain the aligned word of the shorter text.
inline double hamming(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  const auto& shorter = a.size() <= b.size() ? a : b;
  const auto& longer = a.size() <= b.size() ? b : a;
  const std::size_t m = shorter.size();
  const std::size_t n = longer.size();
  if (m == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t lo = i * n / m;
    const std::size_t hi = (i + 1) * n / m;
    for (std::size_t k = lo; k < hi; ++k) {
      if (longer[k] == shorter[i]) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(m);
}

inline double raw_hamming(std::string_view a, std::string_view b) { return hamming(text::tokenize(a), text::tokenize(b)); }

template <class T, class U>
double cosine(std::span<const T> a, std::span<const U> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    dot += static_cast<double>(a[k]) * static_cast<double>(b[k]);
    na += static_cast<double>(a[k]) * static_cast<double>(a[k]);
    nb += static_cast<double>(b[k]) * static_cast<double>(b[k]);
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

/// TF-IDF over a fixed set of texts, tf = raw count, idf = ln((1+N)/(1+df)) + 1.
class TfidfIndex {
 public:
  explicit TfidfIndex(const std::vector<std::string>& texts) {
    std::vector<WordCounts> counts;
    counts.reserve(texts.size());
    std::unordered_map<std::string, std::size_t> df;
    for (const auto& t : texts) {
      counts.push_back(word_counts(t));
      for (const auto& [w, c] : counts.back()) ++df[w];
    }
    const double n = static_cast<double>(texts.size());
    vectors_.reserve(texts.size());
    norms_.reserve(texts.size());
    for (const auto& c : counts) {
      std::map<std::string, double> v;
      double sq = 0.0;
      for (const auto& [w, tf] : c) {
        const double idf = std::log((1.0 + n) / (1.0 + static_cast<double>(df[w]))) + 1.0;
        const double x = static_cast<double>(tf) * idf;
        v.emplace(w, x);
        sq += x * x;
      }
      vectors_.push_back(std::move(v));
      norms_.push_back(std::sqrt(sq));
    }
  }

  std::size_t size() const { return vectors_.size(); }

  double similarity(std::size_t a, std::size_t b) const {
    if (norms_[a] == 0.0 || norms_[b] == 0.0) return 0.0;
    const auto& va = vectors_[a];
    const auto& vb = vectors_[b];
    double dot = 0.0;
    auto ia = va.begin();
    auto ib = vb.begin();
    while (ia != va.end() && ib != vb.end()) {
      if (ia->first < ib->first) ++ia;
      else if (ib->first < ia->first) ++ib;
      else {
        dot += ia->second * ib->second;
        ++ia;
        ++ib;
      }
    }
    return dot / (norms_[a] * norms_[b]);
  }

 private:
  std::vector<std::map<std::string, double>> vectors_;
  std::vector<double> norms_;
};

/// Word-vector table in the plain "word v1 ... vD" text format.
class WordVectors {
 public:
  WordVectors() = default;

  void add(std::string word, std::vector<double> v) {
    if (dim_ == 0) dim_ = v.size();
    if (v.size() != dim_ || dim_ == 0) fail(ErrorKind::InvalidArgument, "word vector has wrong dimension: " + word);
    table_[std::move(word)] = std::move(v);
  }

  static WordVectors load(std::istream& is) {
    WordVectors wv;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
      ++line_no;
      std::istringstream ls(line);
      std::string word;
      if (!(ls >> word)) continue;
      std::vector<double> v;
      std::string tok;
      while (ls >> tok) {
        try {
          v.push_back(std::stod(tok));
        } catch (const std::exception&) {
          throw MalformedRecord(line_no, "bad vector component '" + tok + "'");
        }
      }
      if (v.empty()) throw MalformedRecord(line_no, "word without vector");
      if (wv.dim_ != 0 && v.size() != wv.dim_) throw MalformedRecord(line_no, "inconsistent vector dimension");
      wv.add(text::to_lower(word), std::move(v));
    }
    return wv;
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return table_.size(); }

  /// Mean of in-vocabulary word vectors; nullopt when every word is out of vocabulary.
  std::optional<std::vector<double>> mean_vector(std::string_view s) const {
    std::vector<double> acc(dim_, 0.0);
    std::size_t hits = 0;
    for (const auto& w : text::tokenize(s)) {
      const auto it = table_.find(w);
      if (it == table_.end()) continue;
      for (std::size_t k = 0; k < dim_; ++k) acc[k] += it->second[k];
      ++hits;
    }
    if (hits == 0) return std::nullopt;
    for (auto& x : acc) x /= static_cast<double>(hits);
    return acc;
  }

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::vector<double>> table_;
};

inline double raw_glove_mean(std::string_view a, std::string_view b, const WordVectors& wv) {
  const auto va = wv.mean_vector(a);
  const auto vb = wv.mean_vector(b);
  if (!va || !vb) return 0.0;
  return cosine(std::span<const double>(*va), std::span<const double>(*vb));
}

inline double raw_embedding_cosine(const EmbeddingMatrix& book, std::size_t a, const EmbeddingMatrix& script,
                                   std::size_t b) {
  if (book.is_zero_row(a) || script.is_zero_row(b)) return 0.0;
  return cosine(book.row(a), script.row(b));
}

// ---------------------------------------------------------------------------
// Book x script raw scorer

/// A raw metric bound to one book/script pair: fn(i, j) scores book paragraph i against script paragraph j.
struct RawMetric {
  Metric metric = Metric::embedding_cosine;
  std::size_t book_size = 0;
  std::size_t script_size = 0;
  std::function<double(std::size_t, std::size_t)> fn;
  // Paragraphs eligible for calibration sampling.
  std::vector<std::size_t> book_usable;
  std::vector<std::size_t> script_usable;

  double operator()(std::size_t i, std::size_t j) const { return fn(i, j); }
};

namespace detail {

inline std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

inline std::vector<std::string> texts_of(const Document& d) {
  std::vector<std::string> t;
  t.reserve(d.size());
  for (const auto& p : d.paragraphs) t.push_back(p.text);
  return t;
}

}  // namespace detail

inline RawMetric embedding_metric(EmbeddingMatrix book, EmbeddingMatrix script) {
  if (book.dim() != script.dim()) fail(ErrorKind::InvalidArgument, "book and script embeddings differ in dim");
  RawMetric r;
  r.metric = Metric::embedding_cosine;
  r.book_size = book.rows();
  r.script_size = script.rows();
  for (std::size_t i = 0; i < book.rows(); ++i)
    if (!book.is_zero_row(i)) r.book_usable.push_back(i);
  for (std::size_t j = 0; j < script.rows(); ++j)
    if (!script.is_zero_row(j)) r.script_usable.push_back(j);
  auto state = std::make_shared<const std::pair<EmbeddingMatrix, EmbeddingMatrix>>(std::move(book), std::move(script));
  r.fn = [state](std::size_t i, std::size_t j) { return raw_embedding_cosine(state->first, i, state->second, j); };
  return r;
}

inline RawMetric jaccard_metric(const Document& book, const Document& script) {
  auto state = std::make_shared<std::pair<std::vector<WordCounts>, std::vector<WordCounts>>>();
  for (const auto& p : book.paragraphs) state->first.push_back(word_counts(p.text));
  for (const auto& p : script.paragraphs) state->second.push_back(word_counts(p.text));
  RawMetric r{Metric::jaccard, book.size(), script.size(), {}, detail::iota_indices(book.size()),
              detail::iota_indices(script.size())};
  r.fn = [state](std::size_t i, std::size_t j) {
    return jaccard(state->first[i], state->second[j]);
  };
  return r;
}

inline RawMetric hamming_metric(const Document& book, const Document& script) {
  auto state = std::make_shared<std::pair<std::vector<std::vector<std::string>>, std::vector<std::vector<std::string>>>>();
  for (const auto& p : book.paragraphs) state->first.push_back(text::tokenize(p.text));
  for (const auto& p : script.paragraphs) state->second.push_back(text::tokenize(p.text));
  RawMetric r{Metric::hamming, book.size(), script.size(), {}, detail::iota_indices(book.size()),
              detail::iota_indices(script.size())};
  r.fn = [state](std::size_t i, std::size_t j) {
    return hamming(state->first[i], state->second[j]);
  };
  return r;
}

/// The IDF corpus is every book paragraph followed by every script paragraph.
inline RawMetric tfidf_metric(const Document& book, const Document& script) {
  auto texts = detail::texts_of(book);
  for (const auto& p : script.paragraphs) texts.push_back(p.text);
  auto index = std::make_shared<const TfidfIndex>(texts);
  const std::size_t m = book.size();
  RawMetric r{Metric::tfidf, book.size(), script.size(), {}, detail::iota_indices(book.size()),
              detail::iota_indices(script.size())};
  r.fn = [index, m](std::size_t i, std::size_t j) { return index->similarity(i, m + j); };
  return r;
}

inline RawMetric glove_metric(const Document& book, const Document& script, const WordVectors& wv) {
  using Vec = std::optional<std::vector<double>>;
  auto state = std::make_shared<std::pair<std::vector<Vec>, std::vector<Vec>>>();
  for (const auto& p : book.paragraphs) state->first.push_back(wv.mean_vector(p.text));
  for (const auto& p : script.paragraphs) state->second.push_back(wv.mean_vector(p.text));
  RawMetric r{Metric::glove_mean, book.size(), script.size(), {}, detail::iota_indices(book.size()),
              detail::iota_indices(script.size())};
  r.fn = [state](std::size_t i, std::size_t j) {
    const auto& a = state->first[i];
    const auto& b = state->second[j];
    if (!a || !b) return 0.0;
    return cosine(std::span<const double>(*a), std::span<const double>(*b));
  };
  return r;
}

/// Raw scores taken from an explicit book x script table.
inline RawMetric table_metric(std::vector<std::vector<double>> table, Metric tag = Metric::embedding_cosine) {
  RawMetric r;
  r.metric = tag;
  r.book_size = table.size();
  r.script_size = table.empty() ? 0 : table.front().size();
  r.book_usable = detail::iota_indices(r.book_size);
  r.script_usable = detail::iota_indices(r.script_size);
  auto state = std::make_shared<const std::vector<std::vector<double>>>(std::move(table));
  r.fn = [state](std::size_t i, std::size_t j) { return (*state)[i][j]; };
  return r;
}

// ---------------------------------------------------------------------------
// Calibration and the squashed score

struct Calibration {
  double mu = 0.0;
  double sigma = 1.0;
  std::size_t sample_count = 0;
  std::uint64_t seed = 0;

  bool operator==(const Calibration&) const = default;
};

inline constexpr double kMinSigma = 1e-9;

/// Uniform draw from [0, n) without modulo bias; portable across standard libraries.
inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return static_cast<std::size_t>(x % bound);
}

/// Mean and population standard deviation (two-pass).
inline Calibration calibration_from_samples(std::span<const double> samples) {
  if (samples.empty()) fail(ErrorKind::InvalidArgument, "no calibration samples");
  double sum = 0.0;
  for (double x : samples) sum += x;
  const double mu = sum / static_cast<double>(samples.size());
  double ss = 0.0;
  for (double x : samples) ss += (x - mu) * (x - mu);
  const double sigma = std::sqrt(ss / static_cast<double>(samples.size()));
  if (!(sigma >= kMinSigma))
    fail(ErrorKind::DegenerateDistribution, "calibration scores have zero spread (sigma=" + std::to_string(sigma) + ")");
  return {mu, sigma, samples.size(), 0};
}

inline std::vector<double> calibration_samples(const RawMetric& raw, std::size_t sample_count, std::uint64_t seed) {
  if (raw.book_usable.size() < 2 || raw.script_usable.size() < 2)
    fail(ErrorKind::InvalidArgument, "calibration needs at least 2 usable paragraphs per document");
  if (sample_count < 100) fail(ErrorKind::InvalidArgument, "sample_count must be >= 100");
  std::mt19937_64 rng(seed);
  std::vector<double> samples;
  samples.reserve(sample_count);
  for (std::size_t k = 0; k < sample_count; ++k) {
    const auto i = raw.book_usable[uniform_index(rng, raw.book_usable.size())];
    const auto j = raw.script_usable[uniform_index(rng, raw.script_usable.size())];
    samples.push_back(raw(i, j));
  }
  return samples;
}

/// z-score statistics of the raw metric over uniformly random (book, script) paragraph pairs.
inline Calibration calibrate(const RawMetric& raw, std::size_t sample_count = 10000, std::uint64_t seed = 0) {
  const auto samples = calibration_samples(raw, sample_count, seed);
  auto cal = calibration_from_samples(samples);
  cal.seed = seed;
  return cal;
}

/// 2*sigmoid(z - th_s) - 1, evaluated as tanh((z - th_s)/2) and kept inside (-1, 1).
inline double squash(double z, double th_s) {
  const double s = std::tanh((z - th_s) / 2.0);
  constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2;
  return std::clamp(s, -hi, hi);
}

class SimilarityModel {
 public:
  SimilarityModel(RawMetric raw, Calibration cal, double th_s = 0.6)
      : raw_(std::move(raw)), cal_(cal), th_s_(th_s) {
    if (!(cal_.sigma > 0.0)) fail(ErrorKind::InvalidArgument, "sigma must be positive");
    if (!std::isfinite(th_s_)) fail(ErrorKind::InvalidArgument, "th_s must be finite");
  }

  static SimilarityModel calibrated(RawMetric raw, double th_s = 0.6, std::size_t sample_count = 10000,
                                    std::uint64_t seed = 0) {
    auto cal = calibrate(raw, sample_count, seed);
    return SimilarityModel(std::move(raw), cal, th_s);
  }

  double raw(std::size_t i, std::size_t j) const { return raw_(i, j); }
  double z(std::size_t i, std::size_t j) const { return (raw_(i, j) - cal_.mu) / cal_.sigma; }
  double score(std::size_t i, std::size_t j) const { return squash(z(i, j), th_s_); }
  double operator()(std::size_t i, std::size_t j) const { return score(i, j); }

  std::size_t book_size() const { return raw_.book_size; }
  std::size_t script_size() const { return raw_.script_size; }
  Metric metric() const { return raw_.metric; }
  double th_s() const { return th_s_; }
  const Calibration& calibration() const { return cal_; }
  const RawMetric& raw_metric() const { return raw_; }

 private:
  RawMetric raw_;
  Calibration cal_;
  double th_s_;
};

/// Dense book x script table of S values, filled once so the DP does not re-run the metric.
class SimilarityTable {
 public:
  SimilarityTable(std::size_t m, std::size_t n, std::vector<double> values) : m_(m), n_(n), v_(std::move(values)) {
    if (v_.size() != m_ * n_) fail(ErrorKind::InvalidArgument, "similarity table has the wrong size");
  }

  template <class Scorer>
  static SimilarityTable from(const Scorer& s, std::size_t m, std::size_t n) {
    std::vector<double> v(m * n);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) v[i * n + j] = s(i, j);
    return SimilarityTable(m, n, std::move(v));
  }

  static SimilarityTable from(const SimilarityModel& model) {
    return from(model, model.book_size(), model.script_size());
  }

  double operator()(std::size_t i, std::size_t j) const { return v_[i * n_ + j]; }
  std::size_t rows() const { return m_; }
  std::size_t cols() const { return n_; }

 private:
  std::size_t m_, n_;
  std::vector<double> v_;
};

}  // namespace narralign
