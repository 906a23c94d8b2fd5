#pragma once

// Pipeline stages behind the narralign command-line tool. Every stage reads files, writes files into
// an output directory, and embeds the run configuration plus a SHA-256 of its inputs in each output.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include <json.hpp>

#include "narralign/align.hpp"
#include "narralign/alignment_io.hpp"
#include "narralign/analysis.hpp"
#include "narralign/corpus.hpp"
#include "narralign/corpus_io.hpp"
#include "narralign/embedding.hpp"
#include "narralign/error.hpp"
#include "narralign/similarity.hpp"
#include "narralign/stats.hpp"

namespace narralign::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

struct RunConfig {
  Metric metric = Metric::embedding_cosine;
  std::string aligner = "sw";  // sw | greedy
  double gap = kDefaultGap;
  double th_s = 0.6;
  std::uint64_t seed = 0;
  std::size_t sample_count = 10000;
  double min_score = 0.0;
  bool diagonal_only = false;
  std::size_t target_size = 8;
  std::size_t window = 3;
  unsigned threads = 1;
  std::size_t cell_budget = kDefaultCellBudget;

  std::string book;
  std::string script;
  std::string book_embeddings;
  std::string script_embeddings;
  std::string word_vectors;
  std::string gold;
  std::string lexicon;
  std::string out_dir = ".";
};

/// Provenance view of the config. The output directory is left out so identical runs written to
/// different places produce identical bytes.
inline ojson config_to_json(const RunConfig& c) {
  ojson j;
  j["metric"] = to_string(c.metric);
  j["aligner"] = c.aligner;
  j["g"] = c.gap;
  j["th_s"] = c.th_s;
  j["seed"] = c.seed;
  j["sample_count"] = c.sample_count;
  j["min_score"] = c.min_score;
  j["diagonal_only"] = c.diagonal_only;
  j["target_size"] = c.target_size;
  j["window"] = c.window;
  j["threads"] = c.threads;
  j["cell_budget"] = c.cell_budget;
  j["book"] = c.book;
  j["script"] = c.script;
  j["book_embeddings"] = c.book_embeddings;
  j["script_embeddings"] = c.script_embeddings;
  j["word_vectors"] = c.word_vectors;
  j["gold"] = c.gold;
  j["lexicon"] = c.lexicon;
  return j;
}

/// Applies keys present in `j` (flag names in either snake_case or kebab-case) on top of `c`.
inline void apply_config_json(RunConfig& c, const nlohmann::json& j) {
  auto get = [&](const char* snake, auto& field) {
    std::string kebab = snake;
    std::replace(kebab.begin(), kebab.end(), '_', '-');
    for (const auto& key : {std::string(snake), kebab})
      if (j.contains(key)) j.at(key).get_to(field);
  };
  try {
    if (j.contains("metric")) c.metric = parse_metric(j.at("metric").get<std::string>());
    get("aligner", c.aligner);
    get("g", c.gap);
    get("gap", c.gap);
    get("th_s", c.th_s);
    get("seed", c.seed);
    get("sample_count", c.sample_count);
    get("min_score", c.min_score);
    get("diagonal_only", c.diagonal_only);
    get("target_size", c.target_size);
    get("window", c.window);
    get("threads", c.threads);
    get("cell_budget", c.cell_budget);
    get("book", c.book);
    get("script", c.script);
    get("book_embeddings", c.book_embeddings);
    get("script_embeddings", c.script_embeddings);
    get("word_vectors", c.word_vectors);
    get("gold", c.gold);
    get("lexicon", c.lexicon);
    get("out_dir", c.out_dir);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::MalformedRecord, std::string("bad config JSON: ") + e.what());
  }
}

inline void apply_environment(RunConfig& c) {
  if (const char* v = std::getenv("NARRALIGN_CELL_BUDGET"); v && *v) {
    try {
      c.cell_budget = static_cast<std::size_t>(std::stoull(v));
    } catch (const std::exception&) {
      fail(ErrorKind::InvalidArgument, std::string("NARRALIGN_CELL_BUDGET is not an integer: ") + v);
    }
  }
}

// ---------------------------------------------------------------------------
// Files

inline std::string read_file(const std::string& path) {
  if (path.empty()) fail(ErrorKind::MissingInput, "required input path not given");
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::MissingInput, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::MissingInput, "cannot write " + path.string());
  out << content;
}

inline std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
  std::ostringstream os;
  for (unsigned int k = 0; k < len; ++k) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[k]);
  return os.str();
}

/// Hash over the named input files, in the given order; empty paths are skipped.
inline std::string inputs_hash(const std::vector<std::string>& paths) {
  std::string blob;
  for (const auto& p : paths) {
    if (p.empty()) continue;
    const auto content = read_file(p);
    blob += std::to_string(content.size()) + ":" + content;
  }
  return sha256_hex(blob);
}

inline ojson provenance(const RunConfig& c, const std::vector<std::string>& inputs) {
  ojson j;
  j["config"] = config_to_json(c);
  j["inputs_sha256"] = inputs_hash(inputs);
  return j;
}

inline std::string dump(const ojson& j) { return j.dump(2) + "\n"; }

inline std::string csv_number(std::optional<double> v) {
  if (!v || !std::isfinite(*v)) return "";
  ojson j = *v;
  return j.dump();
}

// ---------------------------------------------------------------------------
// parse

struct ParseRequest {
  std::string input;
  std::string output;
  DocKind kind = DocKind::book;
  std::string doc_id;
  std::optional<std::string> chapter_pattern;
};

inline Document cmd_parse(const ParseRequest& req) {
  const auto raw = read_file(req.input);
  const std::string id = req.doc_id.empty() ? fs::path(req.input).stem().string() : req.doc_id;
  Document doc;
  if (req.kind == DocKind::script) {
    doc = parse_script(raw, id);
  } else {
    std::optional<std::regex> pattern;
    if (req.chapter_pattern) {
      try {
        pattern.emplace(*req.chapter_pattern);
      } catch (const std::regex_error& e) {
        fail(ErrorKind::InvalidArgument, std::string("bad chapter pattern: ") + e.what());
      }
    }
    doc = parse_book(raw, pattern, id);
  }
  std::ostringstream os;
  save_documents(os, doc);
  write_file(req.output, os.str());
  return doc;
}

// ---------------------------------------------------------------------------
// segment

inline Document cmd_segment(const std::string& book_path, const std::string& output, std::size_t target_size,
                            std::size_t window) {
  auto book = load_documents(fs::path(book_path));
  if (book.kind != DocKind::book) fail(ErrorKind::InvalidArgument, "segment expects a book");
  assign_units(book, segment_book_units(book, target_size, window));
  std::ostringstream os;
  save_documents(os, book);
  write_file(output, os.str());
  return book;
}

// ---------------------------------------------------------------------------
// align

inline RawMetric build_metric(const RunConfig& c, const Document& book, const Document& script) {
  switch (c.metric) {
    case Metric::embedding_cosine: {
      if (c.book_embeddings.empty() || c.script_embeddings.empty())
        fail(ErrorKind::MissingInput, "metric embedding_cosine needs --book-embeddings and --script-embeddings");
      auto be = read_embeddings(fs::path(c.book_embeddings));
      auto se = read_embeddings(fs::path(c.script_embeddings));
      if (be.rows() != book.size())
        fail(ErrorKind::InvariantViolation, "book embeddings have " + std::to_string(be.rows()) + " rows for " +
                                                std::to_string(book.size()) + " paragraphs");
      if (se.rows() != script.size())
        fail(ErrorKind::InvariantViolation, "script embeddings have " + std::to_string(se.rows()) + " rows for " +
                                                std::to_string(script.size()) + " paragraphs");
      return embedding_metric(std::move(be), std::move(se));
    }
    case Metric::jaccard: return jaccard_metric(book, script);
    case Metric::tfidf: return tfidf_metric(book, script);
    case Metric::hamming: return hamming_metric(book, script);
    case Metric::glove_mean: {
      if (c.word_vectors.empty()) fail(ErrorKind::MissingInput, "metric glove_mean needs --word-vectors");
      std::ifstream in(c.word_vectors);
      if (!in) fail(ErrorKind::MissingInput, "cannot open " + c.word_vectors);
      return glove_metric(book, script, WordVectors::load(in));
    }
  }
  fail(ErrorKind::InvalidArgument, "unknown metric");
}

struct AlignOutput {
  AlignmentResult result;
  Calibration calibration;
  fs::path alignment_json;
  fs::path heatmap_csv;
};

inline std::vector<std::string> align_inputs(const RunConfig& c) {
  std::vector<std::string> in = {c.book, c.script};
  if (c.metric == Metric::embedding_cosine) {
    in.push_back(c.book_embeddings);
    in.push_back(c.script_embeddings);
  }
  if (c.metric == Metric::glove_mean) in.push_back(c.word_vectors);
  return in;
}

/// Aligns a book with a script. Writes alignment.json and heatmap.csv into the output directory.
inline AlignOutput cmd_align(const RunConfig& c) {
  if (c.book.empty()) fail(ErrorKind::MissingInput, "--book is required");
  if (c.script.empty()) fail(ErrorKind::MissingInput, "--script is required");
  const auto book = load_documents(fs::path(c.book));
  const auto script = load_documents(fs::path(c.script));
  if (book.size() == 0 || script.size() == 0) fail(ErrorKind::EmptyInput, "book and script need paragraphs");

  auto model = SimilarityModel::calibrated(build_metric(c, book, script), c.th_s, c.sample_count, c.seed);
  const auto table = SimilarityTable::from(model);

  AlignOutput out;
  out.calibration = model.calibration();
  if (c.aligner == "sw") {
    FillOptions fill;
    fill.gap = c.gap;
    fill.cell_budget = c.cell_budget;
    fill.threads = std::max(1u, c.threads);
    out.result = smith_waterman_align(table, book.size(), script.size(), fill, {c.min_score, !c.diagonal_only});
  } else if (c.aligner == "greedy") {
    out.result = greedy_baseline(table, book.size(), script.size());
  } else {
    fail(ErrorKind::InvalidArgument, "aligner must be 'sw' or 'greedy'");
  }
  out.result.params.gap = c.gap;
  out.result.params.th_s = c.th_s;
  out.result.params.metric = std::string(to_string(c.metric));
  out.result.params.seed = c.seed;
  out.result.params.aligner = c.aligner;
  out.result.params.diagonal_only = c.diagonal_only;
  out.result.params.min_score = c.min_score;

  const auto prov = provenance(c, align_inputs(c));
  ojson j = alignment_to_json(out.result);
  ojson doc;
  doc["params"] = j["params"];
  doc["provenance"] = prov;
  doc["book_id"] = book.doc_id;
  doc["script_id"] = script.doc_id;
  doc["calibration"] = {{"mu", out.calibration.mu},
                        {"sigma", out.calibration.sigma},
                        {"sample_count", out.calibration.sample_count},
                        {"seed", out.calibration.seed}};
  doc["matches"] = j["matches"];

  out.alignment_json = fs::path(c.out_dir) / "alignment.json";
  write_file(out.alignment_json, dump(doc));

  // Best match score per book paragraph.
  std::vector<std::optional<double>> best(book.size());
  for (const auto& [pair, score] : out.result.scored_pairs())
    if (!best[pair.first] || score > *best[pair.first]) best[pair.first] = score;
  std::ostringstream csv;
  csv << "# provenance " << prov.dump() << "\n";
  csv << "book_index,aligned,confidence\n";
  for (std::size_t i = 0; i < book.size(); ++i)
    csv << i << ',' << (best[i] ? 1 : 0) << ','
        << (best[i] ? csv_number(storage_round(*best[i])) : std::string()) << '\n';
  out.heatmap_csv = fs::path(c.out_dir) / "heatmap.csv";
  write_file(out.heatmap_csv, csv.str());
  return out;
}

// ---------------------------------------------------------------------------
// evaluate

inline std::vector<BookUnit> units_for(const Document& book, const RunConfig& c) {
  const bool tagged = std::all_of(book.paragraphs.begin(), book.paragraphs.end(), [](const auto& p) { return p.unit_id.has_value(); });
  return tagged ? units_from_document(book) : segment_book_units(book, c.target_size, c.window);
}

/// Gold file: {"retained_units": [unit ids], "scene_to_chapter": {"scene": chapter}}; either key optional.
inline ojson cmd_evaluate(const RunConfig& c, const std::string& alignment_path) {
  const auto align = load_alignment(alignment_path);
  const auto book = load_documents(fs::path(c.book));
  nlohmann::json gold;
  try {
    gold = nlohmann::json::parse(read_file(c.gold));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::MalformedRecord, std::string("bad gold JSON: ") + e.what());
  }

  ojson metrics;
  metrics["provenance"] = provenance(c, {alignment_path, c.book, c.script, c.gold});
  metrics["params"] = params_to_json(align.params);

  try {
    if (gold.contains("retained_units")) {
      const auto units = units_for(book, c);
      const auto ret = retention(align, units, book.size());
      std::vector<bool> gold_flags(units.size(), false);
      for (const auto& u : gold.at("retained_units")) {
        const auto id = u.get<std::size_t>();
        if (id >= units.size()) fail(ErrorKind::InvariantViolation, "gold unit id out of range");
        gold_flags[id] = true;
      }
      const auto f = stats::f1_score(ret.unit_retained, gold_flags);
      metrics["retention"] = {{"units", units.size()},   {"tp", f.tp},         {"fp", f.fp},
                              {"fn", f.fn},               {"tn", f.tn},         {"precision", f.precision},
                              {"recall", f.recall},       {"f1", f.f1}};
    }
    if (gold.contains("scene_to_chapter")) {
      const auto script = load_documents(fs::path(c.script));
      std::map<std::size_t, std::size_t> gold_map;
      for (const auto& [k, v] : gold.at("scene_to_chapter").items()) gold_map[std::stoul(k)] = v.get<std::size_t>();
      const auto assigned = chapter_vote(align, book, script);

      std::map<std::size_t, std::size_t> chapter_words;
      for (const auto& p : book.paragraphs) chapter_words[*p.chapter_id] += text::word_count(p.text);
      std::vector<std::size_t> lengths;
      for (std::size_t ch = 0; ch < chapter_words.size(); ++ch) lengths.push_back(chapter_words[ch]);
      std::size_t scenes = 0;
      for (const auto& p : script.paragraphs) scenes = std::max(scenes, *p.scene_id + 1);
      const auto by_length = length_baseline(lengths, scenes);
      std::map<std::size_t, std::size_t> length_map;
      for (std::size_t s = 0; s < by_length.size(); ++s) length_map[s] = by_length[s];

      metrics["chapter_alignment"] = {{"scenes", gold_map.size()},
                                      {"accuracy", stats::alignment_accuracy(assigned, gold_map)},
                                      {"length_baseline_accuracy", stats::alignment_accuracy(length_map, gold_map)}};
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::MalformedRecord, std::string("bad gold JSON: ") + e.what());
  }

  write_file(fs::path(c.out_dir) / "evaluation.json", dump(metrics));
  return metrics;
}

// ---------------------------------------------------------------------------
// analyze

inline ojson optional_json(std::optional<double> v) { return v && std::isfinite(*v) ? ojson(*v) : ojson(nullptr); }

inline GenderLexicon load_lexicon(const std::string& path) {
  GenderLexicon lex;
  if (path.empty()) return lex;
  try {
    const auto j = nlohmann::json::parse(read_file(path));
    for (const auto& [name, g] : j.value("names", nlohmann::json::object()).items())
      lex.names[text::to_upper(name)] = detail::parse_gender(g.get<std::string>(), 1);
    if (j.contains("male_tokens")) {
      lex.male_tokens.clear();
      for (const auto& t : j.at("male_tokens")) lex.male_tokens.insert(text::to_lower(t.get<std::string>()));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::MalformedRecord, std::string("bad lexicon JSON: ") + e.what());
  }
  return lex;
}

struct AnalyzeOutput {
  ojson report;
  RetentionReport retention;
  DialogReport dialog;
  OrderReport order;
  std::optional<BechdelReport> bechdel;
};

/// Writes analysis.json and a one-row analysis.csv. Undefined ratios become null / empty fields.
inline AnalyzeOutput cmd_analyze(const RunConfig& c, const std::string& alignment_path) {
  const auto align = load_alignment(alignment_path);
  const auto book = load_documents(fs::path(c.book));
  AnalyzeOutput out;
  const auto units = units_for(book, c);
  out.retention = retention(align, units, book.size());
  out.dialog = dialog_counts(out.retention, book);
  out.order = lis_order(align, false);
  std::string bechdel_error;
  try {
    out.bechdel = bechdel_counts(out.retention, book, load_lexicon(c.lexicon));
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::MissingGenderData) throw;
    bechdel_error = e.what();
  }

  ojson r;
  r["provenance"] = provenance(c, {alignment_path, c.book, c.lexicon});
  r["doc_id"] = book.doc_id;
  std::size_t units_kept = 0;
  for (bool b : out.retention.unit_retained) units_kept += b;
  r["retention"] = {{"book_paragraphs", book.size()},
                    {"retained_paragraphs", out.retention.retained.size()},
                    {"retention_pct", out.retention.retention_pct},
                    {"units", units.size()},
                    {"retained_units", units_kept}};
  r["dialog"] = {{"dialog_paragraphs", out.dialog.dialog_count},
                 {"retained_dialog", out.dialog.retained_dialog},
                 {"u_b", optional_json(out.dialog.u_b)},
                 {"v_b", optional_json(out.dialog.v_b)}};
  r["order"] = {{"n", out.order.n},
                {"lis_length", out.order.lis_length},
                {"expected_random", out.order.expected_random},
                {"upper_bound", out.order.upper_bound}};
  if (out.bechdel) {
    const auto& b = *out.bechdel;
    r["bechdel"] = {{"dialogs", b.dialogs},
                    {"retained_dialogs", b.retained_dialogs},
                    {"female_only_dialogs", b.female_only},
                    {"retained_female_only_dialogs", b.retained_female_only},
                    {"B", optional_json(b.ratio)},
                    {"female_ratio", optional_json(b.female_ratio)},
                    {"male_ratio", optional_json(b.male_ratio)},
                    {"predicted_pass", b.ratio ? ojson(b.predicted_pass) : ojson(nullptr)}};
  } else {
    r["bechdel"] = {{"B", nullptr}, {"predicted_pass", nullptr}, {"error", bechdel_error}};
  }
  out.report = r;

  write_file(fs::path(c.out_dir) / "analysis.json", dump(r));
  std::ostringstream csv;
  csv << "# provenance " << r["provenance"].dump() << "\n";
  csv << "doc_id,retention_pct,u_b,v_b,lis_length,expected_random,B,prediction\n";
  const std::optional<double> bval = out.bechdel ? out.bechdel->ratio : std::nullopt;
  csv << book.doc_id << ',' << csv_number(out.retention.retention_pct) << ',' << csv_number(out.dialog.u_b) << ','
      << csv_number(out.dialog.v_b) << ',' << out.order.lis_length << ',' << csv_number(out.order.expected_random)
      << ',' << csv_number(bval) << ',' << (bval ? (bechdel_predicts_pass(bval) ? "pass" : "fail") : "") << '\n';
  write_file(fs::path(c.out_dir) / "analysis.csv", csv.str());
  return out;
}

// ---------------------------------------------------------------------------
// report

/// Aggregates several analysis.json files into report.csv plus corpus statistics in report.json.
/// `labels_path` optionally maps doc_id -> faithful (bool).
inline ojson cmd_report(const RunConfig& c, const std::vector<std::string>& analyses, const std::string& labels_path) {
  if (analyses.empty()) fail(ErrorKind::MissingInput, "report needs at least one analysis.json");
  std::vector<nlohmann::json> docs;
  for (const auto& p : analyses) {
    try {
      docs.push_back(nlohmann::json::parse(read_file(p)));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::MalformedRecord, p + ": " + e.what());
    }
  }

  auto opt = [](const nlohmann::json& v) -> std::optional<double> {
    return v.is_number() ? std::optional<double>(v.get<double>()) : std::nullopt;
  };

  std::vector<std::string> inputs = analyses;
  inputs.push_back(labels_path);
  ojson out;
  out["provenance"] = provenance(c, inputs);

  std::ostringstream csv;
  csv << "# provenance " << out["provenance"].dump() << "\n";
  csv << "doc_id,retention_pct,u_b,v_b,lis_length,expected_random,B,prediction\n";
  std::vector<double> us, vs;
  for (const auto& d : docs) {
    const auto u = opt(d["dialog"]["u_b"]);
    const auto v = opt(d["dialog"]["v_b"]);
    const auto b = opt(d["bechdel"]["B"]);
    if (u && v) {
      us.push_back(*u);
      vs.push_back(*v);
    }
    csv << d.value("doc_id", "") << ',' << csv_number(opt(d["retention"]["retention_pct"])) << ',' << csv_number(u)
        << ',' << csv_number(v) << ',' << d["order"]["lis_length"].get<std::size_t>() << ','
        << csv_number(opt(d["order"]["expected_random"])) << ',' << csv_number(b) << ','
        << (b ? (bechdel_predicts_pass(b) ? "pass" : "fail") : "") << '\n';
  }
  write_file(fs::path(c.out_dir) / "report.csv", csv.str());

  out["pairs"] = docs.size();
  if (us.size() >= 2) {
    const auto t = stats::welch_t_test(us, vs);
    out["dialog_t_test"] = {{"t", t.t}, {"df", t.df}, {"p_value", t.p_value}, {"cohens_d", t.cohens_d},
                            {"mean_u", stats::mean(us)}, {"mean_v", stats::mean(vs)}};
  }
  if (!labels_path.empty()) {
    nlohmann::json labels;
    try {
      labels = nlohmann::json::parse(read_file(labels_path));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::MalformedRecord, std::string("bad labels JSON: ") + e.what());
    }
    std::vector<RetentionReport> reports;
    std::vector<bool> faithful;
    for (const auto& d : docs) {
      const auto id = d.value("doc_id", "");
      if (!labels.contains(id)) continue;
      RetentionReport r;
      r.retention_pct = d["retention"]["retention_pct"].get<double>();
      reports.push_back(r);
      faithful.push_back(labels[id].get<bool>());
    }
    const auto f = faithfulness_rank(reports, faithful);
    out["faithfulness"] = {{"labeled_pairs", reports.size()}, {"spearman_rho", f.spearman_rho},
                           {"p_value", f.p_value}, {"auc", f.auc}};
  }
  write_file(fs::path(c.out_dir) / "report.json", dump(out));
  return out;
}

// ---------------------------------------------------------------------------
// Exit codes

inline int exit_code(const Error& e) { return e.kind() == ErrorKind::InvariantViolation ? 3 : 2; }

inline std::string error_json(std::string_view kind, const std::string& message) {
  ojson j;
  j["error"] = kind;
  j["message"] = message;
  return j.dump();
}

}  // namespace narralign::cli
