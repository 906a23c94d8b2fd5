#include <cstdlib>
#include <fstream>
#include <sys/wait.h>

#include <gtest/gtest.h>

#include "workspace.hpp"

using namespace narralign;
using namespace narralign::cli;
using synthetic::Scratch;

namespace {

std::string slurp(const std::string& path) { return read_file(path); }

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an exception";
  return ErrorKind::InvalidArgument;
}

synthetic::Pair small_pair(std::uint64_t seed = 1) { return synthetic::planted_retention(seed, 80, 8, 5, 20, 50, 0.1); }

/// Majority chapter of the planted source paragraphs of each scene.
nlohmann::json gold_for(const synthetic::Pair& p) {
  nlohmann::json gold;
  std::vector<std::size_t> units;
  for (std::size_t u = 0; u < p.planted_units.size(); ++u)
    if (p.planted_units[u]) units.push_back(u);
  gold["retained_units"] = units;
  std::map<std::size_t, std::map<std::size_t, int>> votes;
  for (std::size_t j = 0; j < p.script.size(); ++j)
    if (p.source[j]) ++votes[*p.script.paragraphs[j].scene_id][*p.book.paragraphs[*p.source[j]].chapter_id];
  nlohmann::json s2c = nlohmann::json::object();
  for (const auto& [scene, v] : votes) {
    const auto best = std::max_element(v.begin(), v.end(), [](auto& a, auto& b) { return a.second < b.second; });
    s2c[std::to_string(scene)] = best->first;
  }
  gold["scene_to_chapter"] = s2c;
  return gold;
}

void write_json(const std::string& path, const nlohmann::json& j) { write_file(path, j.dump()); }

int run_cli(const std::string& args, const std::string& err_path) {
  const std::string cmd = std::string(NARRALIGN_CLI) + " " + args + " >/dev/null 2>" + err_path;
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Parse, ScreenplayToJsonl) {
  Scratch s("parse");
  write_file(s.path("film.txt"), "INT. HALL - DAY\n\nHarry runs.\n\nRON\nWait!\n\nEXT. LAKE - NIGHT\n\nWater.\n");
  ParseRequest req{s.path("film.txt"), s.path("film.jsonl"), DocKind::script, "", std::nullopt};
  const auto doc = cmd_parse(req);
  EXPECT_EQ(doc.doc_id, "film");
  const auto back = load_documents(std::filesystem::path(s.path("film.jsonl")));
  EXPECT_EQ(back, doc);
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back.paragraphs[2].scene_id, 1u);
  EXPECT_EQ(back.paragraphs[1].speaker, "RON");
}

TEST(Parse, BookWithChapters) {
  Scratch s("parse");
  write_file(s.path("b.txt"), "Chapter One\n\nOnce.\n\nChapter Two\n\nTwice.\n\nThrice.\n");
  const auto doc = cmd_parse({s.path("b.txt"), s.path("b.jsonl"), DocKind::book, "hp", std::nullopt});
  EXPECT_EQ(doc.doc_id, "hp");
  ASSERT_EQ(doc.size(), 3u);
  EXPECT_EQ(doc.paragraphs[2].chapter_id, 1u);
}

TEST(Parse, Errors) {
  Scratch s("parse");
  write_file(s.path("empty.txt"), "");
  EXPECT_EQ(kind_of([&] { cmd_parse({s.path("empty.txt"), s.path("o.jsonl"), DocKind::book, "", std::nullopt}); }),
            ErrorKind::EmptyInput);
  EXPECT_EQ(kind_of([&] { cmd_parse({s.path("none.txt"), s.path("o.jsonl"), DocKind::book, "", std::nullopt}); }),
            ErrorKind::MissingInput);
  write_file(s.path("b.txt"), "Text.\n");
  EXPECT_EQ(kind_of([&] { cmd_parse({s.path("b.txt"), s.path("o.jsonl"), DocKind::book, "", std::string("(")}); }),
            ErrorKind::InvalidArgument);
}

TEST(Segment, AssignsUnits) {
  Scratch s("segment");
  write_file(s.path("b.txt"), "Chapter 1\n\n" + [] {
    std::string t;
    for (int i = 0; i < 30; ++i) t += "Paragraph about owls number " + std::to_string(i) + ".\n\n";
    return t;
  }());
  cmd_parse({s.path("b.txt"), s.path("b.jsonl"), DocKind::book, "", std::nullopt});
  const auto book = cmd_segment(s.path("b.jsonl"), s.path("u.jsonl"), 8, 3);
  const auto units = units_from_document(load_documents(std::filesystem::path(s.path("u.jsonl"))));
  EXPECT_EQ(units, units_from_document(book));
  EXPECT_EQ(units.back().end, 30u);
}

TEST(Align, DeterministicBytes) {
  Scratch s("align");
  auto c = synthetic::write_pair(small_pair(), s, "run1");
  const auto first = cmd_align(c);
  const auto json1 = slurp(first.alignment_json.string());
  const auto csv1 = slurp(first.heatmap_csv.string());
  cmd_align(c);
  EXPECT_EQ(slurp(first.alignment_json.string()), json1);
  EXPECT_EQ(slurp(first.heatmap_csv.string()), csv1);
  c.out_dir = s.path("run2");
  const auto second = cmd_align(c);
  EXPECT_EQ(slurp(second.alignment_json.string()), json1);
  EXPECT_EQ(slurp(second.heatmap_csv.string()), csv1);

  c.threads = 4;
  c.out_dir = s.path("run3");
  const auto threaded = cmd_align(c);
  EXPECT_EQ(threaded.result.matches, first.result.matches);
}

TEST(Align, OutputLayout) {
  Scratch s("align");
  const auto c = synthetic::write_pair(small_pair(), s);
  const auto out = cmd_align(c);
  const auto j = nlohmann::json::parse(slurp(out.alignment_json.string()));
  EXPECT_EQ(j["params"]["g"], -0.7);
  EXPECT_EQ(j["params"]["th_s"], 0.6);
  EXPECT_EQ(j["provenance"]["config"]["metric"], "embedding_cosine");
  EXPECT_FALSE(j["provenance"]["config"].contains("out_dir"));
  EXPECT_EQ(j["provenance"]["inputs_sha256"].get<std::string>().size(), 64u);
  EXPECT_EQ(j["book_id"], "planted-book");
  EXPECT_EQ(load_alignment(out.alignment_json).pair_set, out.result.pair_set);
  for (std::size_t k = 1; k < j["matches"].size(); ++k)
    EXPECT_GE(j["matches"][k - 1]["score"].get<double>(), j["matches"][k]["score"].get<double>());

  std::ifstream csv(out.heatmap_csv);
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line.rfind("# provenance ", 0), 0u);
  std::getline(csv, line);
  EXPECT_EQ(line, "book_index,aligned,confidence");
  std::size_t rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 80u);
}

TEST(Align, InputChangesHash) {
  Scratch a("align"), b("align");
  const auto ca = synthetic::write_pair(small_pair(1), a);
  const auto cb = synthetic::write_pair(small_pair(2), b);
  EXPECT_NE(inputs_hash(align_inputs(ca)), inputs_hash(align_inputs(cb)));
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Align, Errors) {
  Scratch s("align");
  auto c = synthetic::write_pair(small_pair(), s);
  auto missing = c;
  missing.book_embeddings.clear();
  EXPECT_EQ(kind_of([&] { cmd_align(missing); }), ErrorKind::MissingInput);
  missing = c;
  missing.script_embeddings = s.path("nope.f32");
  EXPECT_EQ(kind_of([&] { cmd_align(missing); }), ErrorKind::MissingInput);
  auto swapped = c;
  std::swap(swapped.book_embeddings, swapped.script_embeddings);
  EXPECT_EQ(kind_of([&] { cmd_align(swapped); }), ErrorKind::InvariantViolation);
  auto tiny = c;
  tiny.cell_budget = 1000;
  EXPECT_EQ(kind_of([&] { cmd_align(tiny); }), ErrorKind::CapacityExceeded);
  auto bad = c;
  bad.aligner = "dijkstra";
  EXPECT_EQ(kind_of([&] { cmd_align(bad); }), ErrorKind::InvalidArgument);
  auto glove = c;
  glove.metric = Metric::glove_mean;
  glove.word_vectors.clear();
  EXPECT_EQ(kind_of([&] { cmd_align(glove); }), ErrorKind::MissingInput);
}

TEST(Evaluate, MetricGridIsComplete) {
  Scratch s("grid");
  const auto pair = small_pair(3);
  auto c = synthetic::write_pair(pair, s);
  c.gold = s.path("gold.json");
  write_json(c.gold, gold_for(pair));
  for (auto metric : {Metric::embedding_cosine, Metric::jaccard, Metric::tfidf, Metric::glove_mean, Metric::hamming})
    for (std::string aligner : {"sw", "greedy"}) {
      c.metric = metric;
      c.aligner = aligner;
      c.out_dir = s.path(std::string(to_string(metric)) + "-" + aligner);
      const auto out = cmd_align(c);
      const auto m = cmd_evaluate(c, out.alignment_json.string());
      const double f1 = m["retention"]["f1"].get<double>();
      const double acc = m["chapter_alignment"]["accuracy"].get<double>();
      EXPECT_GE(f1, 0.0);
      EXPECT_LE(f1, 1.0);
      EXPECT_GE(acc, 0.0);
      EXPECT_LE(acc, 100.0);
      EXPECT_EQ(m["params"]["aligner"], aligner);
      EXPECT_EQ(m["params"]["metric"], to_string(metric));
      EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(c.out_dir) / "evaluation.json"));
    }
}

TEST(Evaluate, PerfectAndDisjointGold) {
  Scratch s("eval");
  auto c = synthetic::write_pair(small_pair(4), s);
  c.min_score = 3.0;
  const auto out = cmd_align(c);
  const auto book = load_documents(std::filesystem::path(c.book));
  const auto script = load_documents(std::filesystem::path(c.script));
  const auto ret = retention(out.result, units_from_document(book), book.size());
  std::vector<std::size_t> kept, dropped;
  for (std::size_t u = 0; u < ret.unit_retained.size(); ++u) (ret.unit_retained[u] ? kept : dropped).push_back(u);
  ASSERT_FALSE(kept.empty());
  ASSERT_FALSE(dropped.empty());

  nlohmann::json gold;
  gold["retained_units"] = kept;
  nlohmann::json s2c = nlohmann::json::object();
  for (const auto& [scene, ch] : chapter_vote(out.result, book, script)) s2c[std::to_string(scene)] = ch;
  gold["scene_to_chapter"] = s2c;
  c.gold = s.path("gold.json");
  write_json(c.gold, gold);
  auto m = cmd_evaluate(c, out.alignment_json.string());
  EXPECT_DOUBLE_EQ(m["retention"]["f1"].get<double>(), 1.0);
  EXPECT_DOUBLE_EQ(m["chapter_alignment"]["accuracy"].get<double>(), 100.0);

  gold["retained_units"] = dropped;
  for (auto& [k, v] : s2c.items()) v = v.get<std::size_t>() + 100;
  gold["scene_to_chapter"] = s2c;
  write_json(c.gold, gold);
  m = cmd_evaluate(c, out.alignment_json.string());
  EXPECT_DOUBLE_EQ(m["retention"]["f1"].get<double>(), 0.0);
  EXPECT_DOUBLE_EQ(m["chapter_alignment"]["accuracy"].get<double>(), 0.0);
}

TEST(Analyze, KnownRetentionAndNullRatios) {
  Scratch s("analyze");
  auto c = synthetic::write_pair(small_pair(5), s);
  AlignmentResult r;
  for (std::size_t b = 0; b < 10; ++b) {
    r.matches.push_back({{{b, b}}, 0.5});
    r.pair_set.insert({b, b});
  }
  write_file(s.path("align.json"), dump(alignment_to_json(r)));
  const auto out = cmd_analyze(c, s.path("align.json"));
  EXPECT_DOUBLE_EQ(out.retention.retention_pct, 12.5);
  const auto j = nlohmann::json::parse(slurp(s.path("out/analysis.json")));
  EXPECT_DOUBLE_EQ(j["retention"]["retention_pct"].get<double>(), 12.5);
  EXPECT_TRUE(j["dialog"]["u_b"].is_null());
  EXPECT_TRUE(j["bechdel"]["B"].is_null());
  EXPECT_EQ(j["order"]["lis_length"], 10);

  std::ifstream csv(s.path("out/analysis.csv"));
  std::string line;
  std::getline(csv, line);
  std::getline(csv, line);
  EXPECT_EQ(line, "doc_id,retention_pct,u_b,v_b,lis_length,expected_random,B,prediction");
  std::getline(csv, line);
  EXPECT_EQ(line.substr(0, 26), "planted-book,12.5,,1.0,10,");
}

TEST(Analyze, UniformRetentionAndBechdel) {
  Scratch s("analyze");
  Document book;
  book.doc_id = "uniform";
  book.kind = DocKind::book;
  book.characters = {{"GINNY", Gender::female}, {"RON", Gender::male}};
  for (std::size_t i = 0; i < 8; ++i) {
    const bool dialog = i < 4;
    Paragraph p{i, dialog ? "\"Hello.\"" : "Rain fell.", 0, std::nullopt, i / 4, dialog, std::nullopt};
    if (dialog) p.speaker = i < 2 ? "GINNY" : "RON";
    book.paragraphs.push_back(p);
  }
  save_documents(std::filesystem::path(s.path("book.jsonl")), book);
  AlignmentResult r;
  for (std::size_t b : {0, 2, 4, 5}) {
    r.matches.push_back({{{b, b}}, 0.5});
    r.pair_set.insert({b, b});
  }
  write_file(s.path("align.json"), dump(alignment_to_json(r)));
  RunConfig c;
  c.book = s.path("book.jsonl");
  c.out_dir = s.path("out");
  const auto out = cmd_analyze(c, s.path("align.json"));
  EXPECT_DOUBLE_EQ(*out.dialog.u_b, 1.0);
  EXPECT_DOUBLE_EQ(*out.dialog.v_b, 1.0);
  ASSERT_TRUE(out.bechdel);
  EXPECT_DOUBLE_EQ(*out.bechdel->ratio, 1.0);
  EXPECT_EQ(out.report["bechdel"]["predicted_pass"], false);
}

TEST(Report, AggregatesAnalyses) {
  Scratch s("report");
  std::vector<std::string> paths;
  nlohmann::json labels;
  const double pcts[] = {10, 20, 30, 40};
  const double us[] = {1.2, 1.4, 1.1, 1.3};
  const double vs[] = {0.9, 0.8, 0.95, 0.85};
  for (int k = 0; k < 4; ++k) {
    nlohmann::json a;
    a["doc_id"] = "pair" + std::to_string(k);
    a["retention"]["retention_pct"] = pcts[k];
    a["dialog"]["u_b"] = us[k];
    a["dialog"]["v_b"] = vs[k];
    a["order"]["lis_length"] = 5;
    a["order"]["expected_random"] = 4.0;
    a["bechdel"]["B"] = k == 0 ? nlohmann::json(nullptr) : nlohmann::json(0.5 + 0.5 * k);
    paths.push_back(s.path("a" + std::to_string(k) + ".json"));
    write_json(paths.back(), a);
    labels["pair" + std::to_string(k)] = k >= 2;
  }
  write_json(s.path("labels.json"), labels);
  RunConfig c;
  c.out_dir = s.path("out");
  const auto r = cmd_report(c, paths, s.path("labels.json"));
  EXPECT_EQ(r["pairs"], 4);
  EXPECT_GT(r["dialog_t_test"]["t"].get<double>(), 0.0);
  EXPECT_DOUBLE_EQ(r["faithfulness"]["auc"].get<double>(), 1.0);

  std::ifstream csv(s.path("out/report.csv"));
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(csv, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 6u);
  EXPECT_EQ(lines[2], "pair0,10.0,1.2,0.9,5,4.0,,");
  EXPECT_EQ(lines[3], "pair1,20.0,1.4,0.8,5,4.0,1.0,fail");
  EXPECT_EQ(lines[4], "pair2,30.0,1.1,0.95,5,4.0,1.5,pass");
}

TEST(Config, JsonEnvironmentAndDefaults) {
  RunConfig c;
  EXPECT_DOUBLE_EQ(c.gap, -0.7);
  EXPECT_DOUBLE_EQ(c.th_s, 0.6);
  apply_config_json(c, nlohmann::json::parse(R"({"metric":"tfidf","th-s":0.4,"g":-0.5,"sample_count":500,"out_dir":"x"})"));
  EXPECT_EQ(c.metric, Metric::tfidf);
  EXPECT_DOUBLE_EQ(c.th_s, 0.4);
  EXPECT_DOUBLE_EQ(c.gap, -0.5);
  EXPECT_EQ(c.sample_count, 500u);
  EXPECT_EQ(c.out_dir, "x");
  EXPECT_EQ(kind_of([&] { apply_config_json(c, nlohmann::json::parse(R"({"seed":"abc"})")); }),
            ErrorKind::MalformedRecord);

  setenv("NARRALIGN_CELL_BUDGET", "12345", 1);
  apply_environment(c);
  EXPECT_EQ(c.cell_budget, 12345u);
  setenv("NARRALIGN_CELL_BUDGET", "lots", 1);
  EXPECT_THROW(apply_environment(c), Error);
  unsetenv("NARRALIGN_CELL_BUDGET");
}

TEST(Binary, ExitCodesAndErrorJson) {
  Scratch s("cli");
  const auto c = synthetic::write_pair(small_pair(6), s);
  const std::string base = " --book " + c.book + " --script " + c.script + " --out-dir " + s.path("out");
  const std::string err = s.path("err.txt");

  EXPECT_EQ(run_cli("align" + base + " --book-embeddings " + c.book_embeddings + " --script-embeddings " +
                        c.script_embeddings,
                    err),
            0);
  EXPECT_TRUE(std::filesystem::exists(s.path("out/alignment.json")));

  EXPECT_EQ(run_cli("align" + base, err), 2);
  const auto e = nlohmann::json::parse(slurp(err));
  EXPECT_EQ(e["error"], "MissingInput");

  EXPECT_EQ(run_cli("align" + base + " --book-embeddings " + c.script_embeddings + " --script-embeddings " +
                        c.book_embeddings,
                    err),
            3);
  EXPECT_EQ(nlohmann::json::parse(slurp(err))["error"], "InvariantViolation");

  write_json(s.path("cfg.json"), {{"metric", "jaccard"}, {"th_s", 0.3}});
  EXPECT_EQ(run_cli("align" + base + " --config " + s.path("cfg.json") + " --th-s 0.5", err), 0);
  const auto j = nlohmann::json::parse(slurp(s.path("out/alignment.json")));
  EXPECT_EQ(j["params"]["metric"], "jaccard");
  EXPECT_EQ(j["params"]["th_s"], 0.5);

  EXPECT_NE(run_cli("frobnicate", err), 0);
}
