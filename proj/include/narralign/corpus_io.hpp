#pragma once

#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "narralign/corpus.hpp"
#include "narralign/error.hpp"

namespace narralign {

namespace detail {

using ojson = nlohmann::ordered_json;

template <class T>
ojson opt_json(const std::optional<T>& v) {
  return v ? ojson(*v) : ojson(nullptr);
}

inline Gender parse_gender(const std::string& s, std::size_t line_no) {
  if (s == "female") return Gender::female;
  if (s == "male") return Gender::male;
  if (s == "unknown") return Gender::unknown;
  throw MalformedRecord(line_no, "unknown gender tag '" + s + "'");
}

inline std::optional<std::size_t> opt_index(const nlohmann::json& rec, const char* key, std::size_t line_no) {
  if (!rec.contains(key) || rec[key].is_null()) return std::nullopt;
  if (!rec[key].is_number_unsigned()) throw MalformedRecord(line_no, std::string("'") + key + "' must be a non-negative integer");
  return rec[key].get<std::size_t>();
}

}  // namespace detail

/// One header line, then one line per paragraph. Keys are written in a fixed order.
inline void save_documents(std::ostream& os, const Document& doc) {
  detail::ojson header;
  header["doc_id"] = doc.doc_id;
  header["kind"] = to_string(doc.kind);
  detail::ojson chars = detail::ojson::object();
  for (const auto& [name, g] : doc.characters) chars[name] = to_string(g);
  header["characters"] = std::move(chars);
  os << header.dump() << '\n';
  for (const auto& p : doc.paragraphs) {
    detail::ojson rec;
    rec["index"] = p.index;
    rec["text"] = p.text;
    rec["chapter_id"] = detail::opt_json(p.chapter_id);
    rec["scene_id"] = detail::opt_json(p.scene_id);
    rec["unit_id"] = detail::opt_json(p.unit_id);
    rec["is_dialog"] = p.is_dialog;
    rec["speaker"] = detail::opt_json(p.speaker);
    os << rec.dump() << '\n';
  }
}

inline Document load_documents(std::istream& is) {
  Document doc;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw MalformedRecord(line_no, e.what());
    }
    if (!rec.is_object()) throw MalformedRecord(line_no, "record is not a JSON object");

    try {
      if (!have_header) {
        if (!rec.contains("doc_id") || !rec.contains("kind")) throw MalformedRecord(line_no, "missing document header");
        doc.doc_id = rec.at("doc_id").get<std::string>();
        const auto kind = rec.at("kind").get<std::string>();
        if (kind == "book") doc.kind = DocKind::book;
        else if (kind == "script") doc.kind = DocKind::script;
        else throw MalformedRecord(line_no, "kind must be 'book' or 'script'");
        if (rec.contains("characters") && !rec["characters"].is_null()) {
          for (const auto& [name, g] : rec["characters"].items())
            doc.characters[text::to_upper(name)] = detail::parse_gender(g.get<std::string>(), line_no);
        }
        have_header = true;
        continue;
      }
      if (!rec.contains("index") || !rec["index"].is_number_unsigned()) throw MalformedRecord(line_no, "missing or invalid 'index'");
      if (!rec.contains("text") || !rec["text"].is_string()) throw MalformedRecord(line_no, "missing or invalid 'text'");
      Paragraph p;
      p.index = rec["index"].get<std::size_t>();
      p.text = rec["text"].get<std::string>();
      p.chapter_id = detail::opt_index(rec, "chapter_id", line_no);
      p.scene_id = detail::opt_index(rec, "scene_id", line_no);
      p.unit_id = detail::opt_index(rec, "unit_id", line_no);
      if (rec.contains("is_dialog")) {
        if (!rec["is_dialog"].is_boolean()) throw MalformedRecord(line_no, "'is_dialog' must be boolean");
        p.is_dialog = rec["is_dialog"].get<bool>();
      }
      if (rec.contains("speaker") && !rec["speaker"].is_null()) {
        if (!rec["speaker"].is_string()) throw MalformedRecord(line_no, "'speaker' must be a string");
        p.speaker = rec["speaker"].get<std::string>();
      }
      doc.paragraphs.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw MalformedRecord(line_no, e.what());
    }
  }
  if (!have_header) fail(ErrorKind::EmptyInput, "no document header found");
  validate(doc);
  return doc;
}

inline Document load_documents(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::MissingInput, "cannot open " + path.string());
  return load_documents(in);
}

inline void save_documents(const std::filesystem::path& path, const Document& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::MissingInput, "cannot write " + path.string());
  save_documents(out, doc);
}

}  // namespace narralign
