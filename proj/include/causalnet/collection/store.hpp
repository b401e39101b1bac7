#pragma once

#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "causalnet/error.hpp"
#include "causalnet/io.hpp"

namespace causalnet::collection {

// Append-only JSON-lines journal. Objects are dumped with sorted keys, so equal states
// always serialize to equal bytes.
class Journal {
 public:
  Journal() = default;
  explicit Journal(std::filesystem::path path) : path_(std::move(path)) {
    if (path_->has_parent_path()) std::filesystem::create_directories(path_->parent_path());
  }

  bool enabled() const { return path_.has_value(); }

  void append(const nlohmann::json& entry) {
    if (!path_) return;
    const std::string line = entry.dump() + "\n";
    std::lock_guard lock(mu_);
    std::ofstream out(*path_, std::ios::app | std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot append to " + path_->string());
    out << line;
    out.flush();
    if (!out) throw Error(ErrorCode::IoError, "write failed on " + path_->string());
  }

  // Every entry in file order. A torn last line (crash mid-append) is dropped.
  static std::vector<nlohmann::json> replay(const std::filesystem::path& path) {
    std::vector<nlohmann::json> out;
    if (!std::filesystem::exists(path)) return out;
    std::istringstream in(io::read_file(path));
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line))
      if (line.find_first_not_of(" \t\r") != std::string::npos) lines.push_back(line);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      auto j = nlohmann::json::parse(lines[i], nullptr, false);
      if (j.is_discarded()) {
        if (i + 1 == lines.size()) break;
        throw Error(ErrorCode::ParseError, path.string() + ": corrupt journal line " + std::to_string(i + 1));
      }
      out.push_back(std::move(j));
    }
    return out;
  }

 private:
  std::optional<std::filesystem::path> path_;
  std::mutex mu_;
};

}  // namespace causalnet::collection
