#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "causalnet/error.hpp"
#include "causalnet/io.hpp"

namespace causalnet::collection {

enum class Segment { Alarmed, Concerned, Cautious, Disengaged, Doubtful, Dismissive };

inline constexpr std::array<Segment, 6> kAllSegments{Segment::Alarmed,    Segment::Concerned,
                                                     Segment::Cautious,   Segment::Disengaged,
                                                     Segment::Doubtful,   Segment::Dismissive};

constexpr std::string_view to_string(Segment s) {
  switch (s) {
    case Segment::Alarmed: return "Alarmed";
    case Segment::Concerned: return "Concerned";
    case Segment::Cautious: return "Cautious";
    case Segment::Disengaged: return "Disengaged";
    case Segment::Doubtful: return "Doubtful";
    case Segment::Dismissive: return "Dismissive";
  }
  return "Alarmed";
}

inline Segment segment_from_string(const std::string& s) {
  for (auto seg : kAllSegments)
    if (s == to_string(seg)) return seg;
  throw Error(ErrorCode::ParseError, "unknown SASSY segment '" + s + "'");
}

inline constexpr std::size_t kSassyQuestions = 4;

// Answer pattern -> segment lookup. Answers are 1-based option indices.
class SassyTable {
 public:
  SassyTable() = default;
  SassyTable(std::array<int, kSassyQuestions> option_counts,
             std::map<std::array<int, kSassyQuestions>, Segment> patterns)
      : option_counts_(option_counts), patterns_(std::move(patterns)) {
    for (const auto& [answers, _] : patterns_) check(answers);
  }

  Segment classify(const std::vector<int>& answers) const {
    if (answers.size() != kSassyQuestions)
      throw Error(ErrorCode::MalformedAnswers, "SASSY needs " + std::to_string(kSassyQuestions) +
                                                   " answers, got " + std::to_string(answers.size()));
    std::array<int, kSassyQuestions> key{};
    for (std::size_t i = 0; i < kSassyQuestions; ++i) key[i] = answers[i];
    check(key);
    auto it = patterns_.find(key);
    if (it == patterns_.end())
      throw Error(ErrorCode::MalformedAnswers, "answer pattern not covered by the SASSY table");
    return it->second;
  }

  const std::array<int, kSassyQuestions>& option_counts() const { return option_counts_; }
  std::size_t size() const { return patterns_.size(); }

 private:
  void check(const std::array<int, kSassyQuestions>& a) const {
    for (std::size_t i = 0; i < kSassyQuestions; ++i)
      if (a[i] < 1 || a[i] > option_counts_[i])
        throw Error(ErrorCode::MalformedAnswers, "SASSY answer " + std::to_string(i + 1) +
                                                     " out of range 1.." +
                                                     std::to_string(option_counts_[i]));
  }

  std::array<int, kSassyQuestions> option_counts_{};
  std::map<std::array<int, kSassyQuestions>, Segment> patterns_;
};

// {"option_counts": [5,4,5,5], "patterns": [{"answers": [1,1,1,1], "segment": "Alarmed"}, ...]}
inline SassyTable sassy_table_from_json(const nlohmann::json& j) {
  try {
    std::array<int, kSassyQuestions> counts{};
    const auto& oc = j.at("option_counts");
    if (oc.size() != kSassyQuestions) throw Error(ErrorCode::ParseError, "option_counts needs 4 entries");
    for (std::size_t i = 0; i < kSassyQuestions; ++i) counts[i] = oc.at(i).get<int>();
    std::map<std::array<int, kSassyQuestions>, Segment> patterns;
    for (const auto& p : j.at("patterns")) {
      const auto& a = p.at("answers");
      if (a.size() != kSassyQuestions) throw Error(ErrorCode::ParseError, "pattern needs 4 answers");
      std::array<int, kSassyQuestions> key{};
      for (std::size_t i = 0; i < kSassyQuestions; ++i) key[i] = a.at(i).get<int>();
      if (!patterns.emplace(key, segment_from_string(p.at("segment").get<std::string>())).second)
        throw Error(ErrorCode::ParseError, "duplicate SASSY pattern");
    }
    return SassyTable(counts, std::move(patterns));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("SASSY table: ") + e.what());
  }
}

inline SassyTable load_sassy_table(const std::filesystem::path& p) {
  return sassy_table_from_json(io::parse_json(io::read_file(p), p.string()));
}

}  // namespace causalnet::collection
