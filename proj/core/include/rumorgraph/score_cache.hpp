#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace rumorgraph {

struct ScoreKey {
  std::string tree;
  std::string node;
  std::string oracle;

  auto operator<=>(const ScoreKey&) const = default;
};

/// Append-only JSON-lines score store, one object per line:
///   {"tree": str, "node": str, "oracle": str, "p": float}
/// Reload replays the log in order, so the last writer wins. Corrupt lines
/// are skipped with a warning. put() holds a lock around a single
/// line write + flush, so concurrent scoring workers can share one cache.
class ScoreCache {
 public:
  /// In-memory only when path is empty.
  explicit ScoreCache(std::filesystem::path path = {});

  std::optional<double> get(const ScoreKey& key) const;
  void put(const ScoreKey& key, double probability);

  std::size_t size() const;
  const std::vector<std::string>& warnings() const { return warnings_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::map<ScoreKey, double> entries_;
  std::vector<std::string> warnings_;
  mutable std::mutex mutex_;
};

}  // namespace rumorgraph
