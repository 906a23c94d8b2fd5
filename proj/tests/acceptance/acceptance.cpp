// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "narralign/narralign.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"
#include "workspace.hpp"

using namespace narralign;
using namespace narralign::cli;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct TableScorer {
  const oracle::Table& t;
  double operator()(std::size_t i, std::size_t j) const { return t[i][j]; }
};

oracle::Table level_table(std::mt19937_64& rng, std::size_t m, std::size_t n) {
  std::uniform_int_distribution<int> level(-9, 9);
  oracle::Table t(m, std::vector<double>(n));
  for (auto& r : t)
    for (auto& x : r) x = level(rng) / 10.0;
  return t;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

// ---------------------------------------------------------------------------

Outcome oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1001);
  std::size_t mismatches = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const auto t = level_table(rng, 1 + rng() % 6, 1 + rng() % 6);
    const auto r = smith_waterman_align(TableScorer{t}, t.size(), t.front().size());
    const double expect = oracle::best_local_alignment(t, kDefaultGap);
    const double got = r.matches.empty() ? 0.0 : r.matches.front().score;
    worst = std::max(worst, std::abs(got - expect));
    if (!(std::abs(got - expect) <= 1e-12)) ++mismatches;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {mismatches == 0 && secs < 30.0,
          "500 instances, mismatches " + std::to_string(mismatches) + ", max error " + fmt(worst) + ", " + fmt(secs) + " s"};
}

Outcome audit_and_parallel() {
  std::mt19937_64 rng(1002);
  std::size_t fixtures = 0, audit_failures = 0, parallel_failures = 0;
  auto check = [&](const auto& scorer, std::size_t m, std::size_t n) {
    const auto serial = sw_fill(scorer, m, n);
    ++fixtures;
    if (audit_fill(serial, scorer, kDefaultGap)) ++audit_failures;
    for (unsigned threads : {2u, 4u, 7u})
      for (std::size_t tile : {1u, 13u, 64u}) {
        FillOptions opt;
        opt.threads = threads;
        opt.tile = tile;
        if (!(sw_fill(scorer, m, n, opt) == serial)) ++parallel_failures;
      }
  };
  for (int trial = 0; trial < 60; ++trial) {
    const auto t = level_table(rng, 1 + rng() % 40, 1 + rng() % 40);
    check(TableScorer{t}, t.size(), t.front().size());
  }
  for (std::uint64_t seed : {1u, 2u}) {
    const auto p = synthetic::planted_retention(seed);
    const auto table = SimilarityTable::from(SimilarityModel::calibrated(embedding_metric(p.book_vectors, p.script_vectors)));
    check(table, p.book.size(), p.script.size());
  }
  return {audit_failures == 0 && parallel_failures == 0,
          std::to_string(fixtures) + " fixtures, audit failures " + std::to_string(audit_failures) +
              ", parallel mismatches " + std::to_string(parallel_failures)};
}

Outcome planted_retention() {
  const auto t0 = std::chrono::steady_clock::now();
  synthetic::Scratch scratch("acceptance-planted");
  const auto pair = synthetic::planted_retention(2024);
  auto c = synthetic::write_pair(pair, scratch);
  nlohmann::json gold;
  std::vector<std::size_t> units;
  for (std::size_t u = 0; u < pair.planted_units.size(); ++u)
    if (pair.planted_units[u]) units.push_back(u);
  gold["retained_units"] = units;
  c.gold = scratch.path("gold.json");
  write_file(c.gold, gold.dump());
  const auto out = cmd_align(c);
  const auto m = cmd_evaluate(c, out.alignment_json.string());
  const double f1 = m["retention"]["f1"].get<double>();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {f1 >= 0.90 && secs < 60.0,
          "F1 " + fmt(f1) + " (precision " + fmt(m["retention"]["precision"].get<double>()) + ", recall " +
              fmt(m["retention"]["recall"].get<double>()) + "), " + std::to_string(out.result.matches.size()) +
              " matches, " + fmt(secs) + " s"};
}

Outcome split_narrative() {
  const auto p = synthetic::split_narrative(77);
  const std::size_t half = p.book.size() / 2;
  const auto table = SimilarityTable::from(SimilarityModel::calibrated(embedding_metric(p.book_vectors, p.script_vectors)));
  const auto r = smith_waterman_align(table, p.book.size(), p.script.size());

  std::map<std::size_t, std::size_t> assigned;  // script paragraph -> book paragraph of its best match
  for (const auto& mt : r.matches)
    for (const auto& [b, s] : mt.pairs) assigned.try_emplace(s, b);
  std::size_t sw_correct = 0;
  for (std::size_t j = 0; j < p.script.size(); ++j) {
    const auto it = assigned.find(j);
    if (it != assigned.end() && (it->second >= half) == (*p.source[j] >= half)) ++sw_correct;
  }

  std::vector<std::size_t> lengths;
  for (const auto& para : p.book.paragraphs) {
    if (*para.chapter_id >= lengths.size()) lengths.resize(*para.chapter_id + 1, 0);
    ++lengths[*para.chapter_id];
  }
  const auto base = length_baseline(lengths, p.script.size());
  const std::size_t half_chapter = lengths.size() / 2;
  std::size_t base_correct = 0;
  for (std::size_t j = 0; j < p.script.size(); ++j) base_correct += (base[j] >= half_chapter) == (*p.source[j] >= half);

  const double n = static_cast<double>(p.script.size());
  const double sw_pct = 100.0 * static_cast<double>(sw_correct) / n;
  const double base_pct = 100.0 * static_cast<double>(base_correct) / n;
  return {sw_pct >= 80.0 && base_pct <= 55.0, "SW " + fmt(sw_pct) + "% correct half, length baseline " + fmt(base_pct) + "%"};
}

Outcome lis() {
  std::mt19937_64 rng(1005);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = rng() % 1001;
    std::vector<int> a(n);
    const int range = 1 + static_cast<int>(rng() % 2000);
    for (auto& x : a) x = static_cast<int>(rng() % static_cast<std::uint64_t>(range));
    if (stats::lis_length(a) != oracle::lis_quadratic(a)) ++mismatches;
  }
  double total = 0.0;
  std::vector<int> perm(400);
  for (int trial = 0; trial < 200; ++trial) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    total += static_cast<double>(stats::lis_length(perm));
  }
  const double mean = total / 200.0;
  return {mismatches == 0 && std::abs(mean - 40.0) <= 6.0,
          "1000 sequences, mismatches " + std::to_string(mismatches) + "; mean LIS n=400 " + fmt(mean)};
}

Outcome calibration_sign() {
  const auto p = synthetic::planted_retention(1006);
  const auto model = SimilarityModel::calibrated(embedding_metric(p.book_vectors, p.script_vectors), 0.6, 10000, 0);
  const auto samples = calibration_samples(model.raw_metric(), 10000, 0);
  double mean = 0.0;
  for (double raw : samples) mean += squash((raw - model.calibration().mu) / model.calibration().sigma, 0.6);
  mean /= static_cast<double>(samples.size());

  std::mt19937_64 rng(1006);
  std::normal_distribution<double> z(0.6, 3.0);
  std::size_t violations = 0;
  auto sign = [](double v) { return (v > 0.0) - (v < 0.0); };
  for (int k = 0; k < 1'000'000; ++k) {
    const double v = z(rng);
    if (sign(squash(v, 0.6)) != sign(v - 0.6)) ++violations;
  }
  for (double v : {0.6, std::nextafter(0.6, 1.0), std::nextafter(0.6, 0.0)})
    if (sign(squash(v, 0.6)) != sign(v - 0.6)) ++violations;
  return {mean < 0.0 && violations == 0, "mean S " + fmt(mean) + ", sign violations " + std::to_string(violations)};
}

// Independent recomputations of the statistics on fixed fixtures.
double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n, my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
    syy += (y[k] - my) * (y[k] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

std::vector<double> ranks_by_counting(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double less = 0, equal = 0;
    for (double v : x) {
      less += v < x[i];
      equal += v == x[i];
    }
    r[i] = less + (equal + 1.0) / 2.0;
  }
  return r;
}

Outcome stats_oracles() {
  std::vector<std::string> failed;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failed.push_back(what);
  };

  const std::vector<bool> pred = {1, 1, 0, 1, 0, 0, 1, 1, 0, 1, 0, 1};
  const std::vector<bool> truth = {1, 0, 0, 1, 1, 0, 1, 1, 1, 0, 0, 1};
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    tp += pred[k] && truth[k];
    fp += pred[k] && !truth[k];
    fn += !pred[k] && truth[k];
  }
  expect(near(stats::f1_score(pred, truth).f1, 2 * tp / (2 * tp + fp + fn), 1e-9), "f1");

  const std::vector<double> x = {1, 2, 2, 3, 4, 4, 4, 5, 6, 7, 8, 8};
  const std::vector<double> y = {2, 1, 3, 3, 5, 4, 6, 7, 7, 9, 8, 10};
  const auto sp = stats::spearman_rho(x, y);
  expect(near(sp.rho, pearson(ranks_by_counting(x), ranks_by_counting(y)), 1e-9), "spearman rho");
  expect(near(sp.rho, 0.9627901715778581, 1e-9), "spearman rho reference");
  expect(near(sp.p_value, 5.277315493042768e-07, 1e-9), "spearman p reference");

  const std::vector<double> s = {0.9, 0.8, 0.35, 0.7, 0.2, 0.6, 0.55, 0.1, 0.4, 0.3, 0.65, 0.05, 0.6, 0.35};
  const std::vector<bool> l = {1, 1, 0, 1, 0, 0, 1, 0, 1, 0, 1, 0, 1, 1};
  expect(near(stats::auc_roc(s, l), oracle::auc_pairs(s, l), 1e-9), "auc");

  const std::vector<double> a = {1.04, 1.21, 0.98, 1.10, 1.33, 1.07, 1.15, 0.95, 1.26, 1.12, 1.01, 1.19};
  const std::vector<double> b = {0.97, 0.88, 1.02, 0.91, 0.85, 0.99, 0.93, 1.05, 0.90, 0.94, 0.96, 0.89, 0.92, 1.00};
  auto moments = [](const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0;
    for (double e : v) ss += (e - mean) * (e - mean);
    return std::pair{mean, ss / (n - 1.0)};
  };
  const auto [ma, va] = moments(a);
  const auto [mb, vb] = moments(b);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double se2 = va / na + vb / nb;
  const double t = (ma - mb) / std::sqrt(se2);
  const double df = se2 * se2 / ((va / na) * (va / na) / (na - 1) + (vb / nb) * (vb / nb) / (nb - 1));
  const double d = (ma - mb) / std::sqrt(((na - 1) * va + (nb - 1) * vb) / (na + nb - 2));
  const auto w = stats::welch_t_test(a, b);
  expect(near(w.t, t, 1e-9), "welch t");
  expect(near(w.df, df, 1e-9), "welch df");
  expect(near(w.cohens_d, d, 1e-9), "cohens d");
  expect(near(w.p_value, 0.0002445865991204238, 1e-9), "welch p reference");

  std::size_t runs = 0, identity_failures = 0;
  std::mt19937_64 rng(1007);
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    auto p = seed % 2 ? synthetic::planted_retention(seed, 120, 8, 7, 30) : synthetic::split_narrative(seed, 120, 6);
    for (auto& para : p.book.paragraphs) para.is_dialog = rng() % 3 == 0;
    p.book.paragraphs[0].is_dialog = true;
    p.book.paragraphs[1].is_dialog = false;
    const auto table =
        SimilarityTable::from(SimilarityModel::calibrated(embedding_metric(p.book_vectors, p.script_vectors)));
    for (double min_score : {0.0, 3.0}) {
      const auto r = smith_waterman_align(table, p.book.size(), p.script.size(), {}, {min_score, true});
      const auto ret = retention(r, p.units, p.book.size());
      const auto dr = dialog_counts(ret, p.book);
      if (!dr.u_b || !dr.v_b) continue;
      ++runs;
      const double kept = static_cast<double>(ret.retained.size()), size = static_cast<double>(p.book.size());
      const double mixed = static_cast<double>(dr.dialog_count) * (*dr.u_b * kept / size) +
                           static_cast<double>(dr.nondialog_count) * (*dr.v_b * kept / size);
      if (!near(mixed, kept, 1e-9 * kept)) ++identity_failures;
    }
  }
  expect(runs > 0 && identity_failures == 0, "mixing identity");

  std::string detail = "f1, spearman, auc, welch t/df/d, mixing identity on " + std::to_string(runs) + " runs";
  for (const auto& f : failed) detail += "; FAILED " + f;
  return {failed.empty(), detail};
}

Document dialog_book(const std::vector<std::pair<std::string, bool>>& speakers_dialog) {
  Document d;
  d.doc_id = "book";
  d.kind = DocKind::book;
  d.characters = {{"HERMIONE", Gender::female}, {"RON", Gender::male}};
  for (std::size_t i = 0; i < speakers_dialog.size(); ++i) {
    Paragraph p;
    p.index = i;
    p.chapter_id = 0;
    p.is_dialog = speakers_dialog[i].second;
    p.speaker = speakers_dialog[i].first.empty() ? std::nullopt : std::optional(speakers_dialog[i].first);
    p.text = p.is_dialog ? (p.speaker == "HERMIONE" ? "\"We need the library.\"" : "\"Bloody hell.\"") : "The hall was cold.";
    d.paragraphs.push_back(p);
  }
  return d;
}

RetentionReport kept(std::size_t size, std::set<std::size_t> r) {
  RetentionReport out;
  out.book_size = size;
  out.retained = std::move(r);
  out.retention_pct = 100.0 * static_cast<double>(out.retained.size()) / static_cast<double>(size);
  return out;
}

Outcome ratio_arithmetic() {
  std::vector<std::pair<std::string, bool>> ten;
  for (bool dialog : {true, false, true, false, false, true, false, true, false, false}) ten.emplace_back("", dialog);
  const auto u = dialog_ratio(kept(10, {0, 2, 5, 7}), dialog_book(ten));

  std::vector<std::pair<std::string, bool>> lines;
  std::set<std::size_t> r;
  for (std::size_t k = 0; k < 4; ++k) {
    lines.emplace_back("HERMIONE", true);
    if (k < 3) r.insert(lines.size() - 1);
  }
  for (std::size_t k = 0; k < 16; ++k) {
    lines.emplace_back("RON", true);
    if (k < 7) r.insert(lines.size() - 1);
  }
  const auto b = bechdel_ratio(kept(lines.size(), r), dialog_book(lines));

  const bool flip = !bechdel_predicts_pass(1.0) && bechdel_predicts_pass(std::nextafter(1.0, 2.0)) &&
                    !bechdel_predicts_pass(std::nextafter(1.0, 0.0));
  const bool ok = u.u_b && *u.u_b == 2.5 && b.ratio && *b.ratio == 1.5 && b.predicted_pass && flip;
  return {ok, "u_b " + (u.u_b ? fmt(*u.u_b) : std::string("null")) + ", B " + (b.ratio ? fmt(*b.ratio) : std::string("null")) +
                  ", flip at 1 " + (flip ? "exact" : "wrong")};
}

std::string slurp(const std::filesystem::path& p) { return read_file(p.string()); }

Outcome determinism() {
  synthetic::Scratch scratch("acceptance-determinism");
  const auto pair = synthetic::planted_retention(1009, 160, 8, 10, 40);
  std::size_t differing = 0, runs = 0;
  for (auto metric : {Metric::embedding_cosine, Metric::jaccard, Metric::tfidf, Metric::glove_mean, Metric::hamming}) {
    auto c = synthetic::write_pair(pair, scratch, std::string("a-") + std::string(to_string(metric)));
    c.metric = metric;
    const auto first = cmd_align(c);
    const auto json = slurp(first.alignment_json), csv = slurp(first.heatmap_csv);
    c.out_dir = scratch.path(std::string("b-") + std::string(to_string(metric)));
    const auto second = cmd_align(c);
    differing += slurp(second.alignment_json) != json;
    differing += slurp(second.heatmap_csv) != csv;
    runs += 2;
  }
  return {differing == 0, std::to_string(runs) + " output files compared, differing " + std::to_string(differing)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"C1 SW oracle equivalence", oracle_equivalence},
      {"C2 cell audit and parallel fill", audit_and_parallel},
      {"C3 planted retention F1", planted_retention},
      {"C4 split narrative recovery", split_narrative},
      {"C5 LIS", lis},
      {"C6 similarity calibration sign", calibration_sign},
      {"C7 stats oracles", stats_oracles},
      {"C8 ratio arithmetic", ratio_arithmetic},
      {"C9 determinism", determinism},
  };
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %s: %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
    failures += !o.pass;
  }
  std::fflush(stdout);
  return failures == 0 ? 0 : 1;
}
