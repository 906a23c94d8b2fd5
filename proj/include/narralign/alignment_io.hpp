#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "narralign/align.hpp"
#include "narralign/error.hpp"

namespace narralign {

// Stored scores are rounded to float32 so files do not depend on last-bit DP arithmetic.
inline double storage_round(double x) { return static_cast<double>(static_cast<float>(x)); }

inline nlohmann::ordered_json params_to_json(const AlignmentParams& p) {
  nlohmann::ordered_json j;
  j["g"] = p.gap;
  j["th_s"] = p.th_s;
  j["metric"] = p.metric;
  j["seed"] = p.seed;
  j["aligner"] = p.aligner;
  j["diagonal_only"] = p.diagonal_only;
  j["min_score"] = p.min_score;
  return j;
}

inline AlignmentParams params_from_json(const nlohmann::json& j) {
  AlignmentParams p;
  p.gap = j.value("g", p.gap);
  p.th_s = j.value("th_s", p.th_s);
  p.metric = j.value("metric", p.metric);
  p.seed = j.value("seed", p.seed);
  p.aligner = j.value("aligner", p.aligner);
  p.diagonal_only = j.value("diagonal_only", p.diagonal_only);
  p.min_score = j.value("min_score", p.min_score);
  return p;
}

/// {"params": {...}, "matches": [{"score": s, "pairs": [[b, s], ...]}, ...]}, matches by descending score.
inline nlohmann::ordered_json alignment_to_json(const AlignmentResult& r) {
  nlohmann::ordered_json j;
  j["params"] = params_to_json(r.params);
  auto matches = nlohmann::ordered_json::array();
  for (const auto& m : r.matches) {
    nlohmann::ordered_json jm;
    jm["score"] = storage_round(m.score);
    auto pairs = nlohmann::ordered_json::array();
    for (const auto& [b, s] : m.pairs) pairs.push_back({b, s});
    jm["pairs"] = std::move(pairs);
    matches.push_back(std::move(jm));
  }
  j["matches"] = std::move(matches);
  return j;
}

inline AlignmentResult alignment_from_json(const nlohmann::json& j) {
  AlignmentResult r;
  try {
    if (j.contains("params")) r.params = params_from_json(j.at("params"));
    for (const auto& jm : j.at("matches")) {
      LocalMatch m;
      m.score = jm.at("score").get<double>();
      for (const auto& p : jm.at("pairs")) {
        IndexPair ip{p.at(0).get<std::size_t>(), p.at(1).get<std::size_t>()};
        if (r.pair_set.contains(ip)) fail(ErrorKind::InvariantViolation, "pair appears in two matches");
        r.pair_set.insert(ip);
        m.pairs.push_back(ip);
      }
      r.matches.push_back(std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::MalformedRecord, std::string("bad alignment JSON: ") + e.what());
  }
  return r;
}

inline AlignmentResult load_alignment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::MissingInput, "cannot open alignment file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::MalformedRecord, std::string("bad alignment JSON: ") + e.what());
  }
  return alignment_from_json(j);
}

}  // namespace narralign
