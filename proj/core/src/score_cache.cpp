#include "rumorgraph/score_cache.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "rumorgraph/error.hpp"

namespace rumorgraph {

ScoreCache::ScoreCache(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.empty() || !std::filesystem::exists(path_)) return;
  std::ifstream in(path_);
  if (!in) throw Error(ErrorCode::IoError, "cannot open cache '" + path_.string() + "'");
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto doc = nlohmann::json::parse(line);
      double p = doc.at("p").get<double>();
      if (p < 0.0 || p > 1.0) throw nlohmann::json::other_error::create(501, "p out of range", nullptr);
      entries_[ScoreKey{doc.at("tree").get<std::string>(), doc.at("node").get<std::string>(),
                        doc.at("oracle").get<std::string>()}] = p;
    } catch (const nlohmann::json::exception&) {
      warnings_.push_back(path_.filename().string() + ":" + std::to_string(line_no) +
                          ": corrupt cache line skipped");
    }
  }
}

std::optional<double> ScoreCache::get(const ScoreKey& key) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ScoreCache::put(const ScoreKey& key, double probability) {
  if (probability < 0.0 || probability > 1.0) {
    throw Error(ErrorCode::ConfigConflict,
                "probability " + std::to_string(probability) + " outside [0,1]");
  }
  nlohmann::json doc = {
      {"tree", key.tree}, {"node", key.node}, {"oracle", key.oracle}, {"p", probability}};
  std::string line = doc.dump();
  std::lock_guard lock(mutex_);
  entries_[key] = probability;
  if (path_.empty()) return;
  std::ofstream out(path_, std::ios::app);
  if (!out) throw Error(ErrorCode::IoError, "cannot append to cache '" + path_.string() + "'");
  out << line << '\n';
  out.flush();
}

std::size_t ScoreCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

}  // namespace rumorgraph
