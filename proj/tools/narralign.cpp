// narralign: align a book with its screenplay and report adaptation statistics.

#include <functional>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "narralign/commands.hpp"

namespace {

using narralign::cli::RunConfig;

/// Flags bound to temporaries; only flags the user actually passed override the config file.
class ConfigFlags {
 public:
  template <class T>
  void add(CLI::App* app, const std::string& flag, T RunConfig::*field, const std::string& help) {
    auto value = std::make_shared<T>();
    auto* opt = app->add_option(flag, *value, help);
    appliers_.push_back([opt, value, field](RunConfig& c) {
      if (opt->count() > 0) c.*field = *value;
    });
  }

  void add_flag(CLI::App* app, const std::string& flag, bool RunConfig::*field, const std::string& help) {
    auto value = std::make_shared<bool>(false);
    auto* opt = app->add_flag(flag, *value, help);
    appliers_.push_back([opt, value, field](RunConfig& c) {
      if (opt->count() > 0) c.*field = *value;
    });
  }

  void add_metric(CLI::App* app) {
    auto value = std::make_shared<std::string>();
    auto* opt = app->add_option("--metric", *value, "embedding_cosine | jaccard | tfidf | glove_mean | hamming");
    appliers_.push_back([opt, value](RunConfig& c) {
      if (opt->count() > 0) c.metric = narralign::parse_metric(*value);
    });
  }

  void add_config_file(CLI::App* app) { app->add_option("--config", config_path_, "JSON config; flags override it"); }

  RunConfig resolve() const {
    RunConfig c;
    if (!config_path_.empty()) {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(narralign::cli::read_file(config_path_));
      } catch (const nlohmann::json::exception& e) {
        narralign::fail(narralign::ErrorKind::MalformedRecord, std::string("bad config file: ") + e.what());
      }
      narralign::cli::apply_config_json(c, j);
    }
    narralign::cli::apply_environment(c);
    for (const auto& apply : appliers_) apply(c);
    return c;
  }

 private:
  std::string config_path_;
  std::vector<std::function<void(RunConfig&)>> appliers_;
};

void add_run_flags(CLI::App* app, ConfigFlags& f) {
  f.add_config_file(app);
  f.add_metric(app);
  f.add(app, "--aligner", &RunConfig::aligner, "sw | greedy");
  f.add(app, "--g", &RunConfig::gap, "gap penalty (negative)");
  f.add(app, "--th-s", &RunConfig::th_s, "z-score threshold of a positive similarity");
  f.add(app, "--seed", &RunConfig::seed, "seed for calibration sampling");
  f.add(app, "--sample-count", &RunConfig::sample_count, "random pairs drawn for calibration");
  f.add(app, "--min-score", &RunConfig::min_score, "minimum cell score that may seed a match");
  f.add_flag(app, "--diagonal-only", &RunConfig::diagonal_only, "record only diagonal steps as aligned pairs");
  f.add(app, "--target-size", &RunConfig::target_size, "target book-unit size in paragraphs");
  f.add(app, "--window", &RunConfig::window, "paragraph window of the unit segmenter");
  f.add(app, "--threads", &RunConfig::threads, "threads for the DP fill");
  f.add(app, "--book", &RunConfig::book, "book paragraph JSONL");
  f.add(app, "--script", &RunConfig::script, "script paragraph JSONL");
  f.add(app, "--book-embeddings", &RunConfig::book_embeddings, "book embedding matrix file");
  f.add(app, "--script-embeddings", &RunConfig::script_embeddings, "script embedding matrix file");
  f.add(app, "--word-vectors", &RunConfig::word_vectors, "word vector table (glove_mean)");
  f.add(app, "--gold", &RunConfig::gold, "gold labels JSON");
  f.add(app, "--lexicon", &RunConfig::lexicon, "gender lexicon JSON");
  f.add(app, "--out-dir", &RunConfig::out_dir, "output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Book-to-script narrative alignment"};
  app.require_subcommand(1);

  narralign::cli::ParseRequest parse_req;
  std::string parse_kind = "book";
  std::string chapter_pattern;
  auto* parse = app.add_subcommand("parse", "Parse a raw book or screenplay into paragraph JSONL");
  parse->add_option("--kind", parse_kind, "book | script")->check(CLI::IsMember({"book", "script"}));
  parse->add_option("--input", parse_req.input, "raw text file")->required();
  parse->add_option("--output", parse_req.output, "paragraph JSONL to write")->required();
  parse->add_option("--doc-id", parse_req.doc_id, "document id (default: input file stem)");
  parse->add_option("--chapter-pattern", chapter_pattern, "regex matching chapter heading lines");

  std::string seg_in, seg_out;
  ConfigFlags seg_flags;
  auto* segment = app.add_subcommand("segment", "Assign book units to a book JSONL");
  segment->add_option("--input", seg_in, "book JSONL")->required();
  segment->add_option("--output", seg_out, "book JSONL with unit ids")->required();
  seg_flags.add(segment, "--target-size", &RunConfig::target_size, "target unit size");
  seg_flags.add(segment, "--window", &RunConfig::window, "overlap window");

  ConfigFlags align_flags;
  auto* align = app.add_subcommand("align", "Align a book with a script");
  add_run_flags(align, align_flags);

  ConfigFlags eval_flags;
  std::string eval_alignment;
  auto* evaluate = app.add_subcommand("evaluate", "Score an alignment against gold labels");
  evaluate->add_option("--alignment", eval_alignment, "alignment.json")->required();
  add_run_flags(evaluate, eval_flags);

  ConfigFlags analyze_flags;
  std::string analyze_alignment;
  auto* analyze = app.add_subcommand("analyze", "Retention, dialog, order and Bechdel statistics");
  analyze->add_option("--alignment", analyze_alignment, "alignment.json")->required();
  add_run_flags(analyze, analyze_flags);

  ConfigFlags report_flags;
  std::vector<std::string> report_inputs;
  std::string report_labels;
  auto* report = app.add_subcommand("report", "Aggregate analysis.json files across book-script pairs");
  report->add_option("--analysis", report_inputs, "analysis.json files")->required();
  report->add_option("--labels", report_labels, "JSON map doc_id -> faithful");
  add_run_flags(report, report_flags);

  CLI11_PARSE(app, argc, argv);

  try {
    if (parse->parsed()) {
      parse_req.kind = parse_kind == "script" ? narralign::DocKind::script : narralign::DocKind::book;
      if (!chapter_pattern.empty()) parse_req.chapter_pattern = chapter_pattern;
      const auto doc = narralign::cli::cmd_parse(parse_req);
      std::cout << doc.size() << " paragraphs written to " << parse_req.output << '\n';
    } else if (segment->parsed()) {
      const auto c = seg_flags.resolve();
      const auto book = narralign::cli::cmd_segment(seg_in, seg_out, c.target_size, c.window);
      std::cout << narralign::units_from_document(book).size() << " units written to " << seg_out << '\n';
    } else if (align->parsed()) {
      const auto out = narralign::cli::cmd_align(align_flags.resolve());
      std::cout << out.result.matches.size() << " matches, " << out.result.pair_set.size() << " pairs -> "
                << out.alignment_json.string() << '\n';
    } else if (evaluate->parsed()) {
      std::cout << narralign::cli::cmd_evaluate(eval_flags.resolve(), eval_alignment).dump(2) << '\n';
    } else if (analyze->parsed()) {
      std::cout << narralign::cli::cmd_analyze(analyze_flags.resolve(), analyze_alignment).report.dump(2) << '\n';
    } else if (report->parsed()) {
      std::cout << narralign::cli::cmd_report(report_flags.resolve(), report_inputs, report_labels).dump(2) << '\n';
    }
  } catch (const narralign::Error& e) {
    std::cerr << narralign::cli::error_json(narralign::to_string(e.kind()), e.what()) << '\n';
    return narralign::cli::exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << narralign::cli::error_json("InternalError", e.what()) << '\n';
    return 1;
  }
  return 0;
}
