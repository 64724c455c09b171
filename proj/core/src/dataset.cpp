#include "rumorgraph/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "rumorgraph/error.hpp"
#include "rumorgraph/hashing.hpp"

namespace rumorgraph {

namespace {

void ingest_document(LoadReport& report, const std::string& text, const std::string& origin) {
  PropagationTree tree;
  try {
    tree = tree_from_json(text);
  } catch (const Error& e) {
    ++report.skipped_malformed;
    report.messages.push_back(origin + ": skipped (" + e.what() + ")");
    return;
  }
  if (tree.size() < 2) {
    ++report.removed_no_reply;
    report.messages.push_back(origin + ": removed, tree '" + tree.event_id + "' has no replies");
    return;
  }
  report.trees.push_back(std::move(tree));
}

}  // namespace

LoadReport load_dataset(const std::filesystem::path& path) {
  LoadReport report;
  if (std::filesystem::is_directory(path)) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(path)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      std::ifstream in(file);
      std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      ingest_document(report, text, file.filename().string());
    }
  } else if (std::filesystem::is_regular_file(path)) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      ingest_document(report, line, path.filename().string() + ":" + std::to_string(line_no));
    }
  } else {
    throw Error(ErrorCode::IoError, "dataset path '" + path.string() + "' does not exist");
  }
  std::sort(report.trees.begin(), report.trees.end(),
            [](const PropagationTree& a, const PropagationTree& b) { return a.event_id < b.event_id; });
  return report;
}

void save_dataset_jsonl(const std::vector<PropagationTree>& trees,
                        const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  for (const auto& tree : trees) out << tree_to_json(tree) << '\n';
}

bool DatasetSplit::contains_train(const std::string& id) const {
  return std::find(train.begin(), train.end(), id) != train.end();
}

DatasetSplit split_dataset(const std::vector<PropagationTree>& trees, std::uint64_t seed) {
  const std::size_t n = trees.size();
  if (n < 10) {
    throw Error(ErrorCode::TooFewTrees, "need at least 10 trees, got " + std::to_string(n));
  }

  // Global sizes first (7:1:2 exactly), then per-stratum quotas by largest
  // remainder so each split keeps the global label mix.
  const std::size_t n_test = static_cast<std::size_t>(std::lround(0.2 * static_cast<double>(n)));
  const std::size_t n_val = static_cast<std::size_t>(std::lround(0.1 * static_cast<double>(n)));

  std::map<int, std::vector<std::string>> strata;
  for (const auto& t : trees) strata[t.label].push_back(t.event_id);
  std::mt19937_64 rng(splitmix64(seed) ^ 0xda7a5e7ULL);
  for (auto& [label, ids] : strata) {
    std::sort(ids.begin(), ids.end());
    std::shuffle(ids.begin(), ids.end(), rng);
  }

  std::map<int, std::size_t> taken;  // consumed prefix per stratum
  auto allocate = [&](std::size_t target) {
    std::vector<std::string> out;
    std::vector<std::pair<double, int>> remainders;  // (frac, label)
    std::size_t assigned = 0;
    for (const auto& [label, ids] : strata) {
      double exact = target * static_cast<double>(ids.size()) / static_cast<double>(n);
      std::size_t base = static_cast<std::size_t>(exact);
      base = std::min(base, ids.size() - taken[label]);
      for (std::size_t i = 0; i < base; ++i) out.push_back(ids[taken[label] + i]);
      taken[label] += base;
      assigned += base;
      remainders.push_back({exact - static_cast<double>(static_cast<std::size_t>(exact)), label});
    }
    std::sort(remainders.begin(), remainders.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    for (const auto& [frac, label] : remainders) {
      if (assigned >= target) break;
      auto& ids = strata[label];
      if (taken[label] < ids.size()) {
        out.push_back(ids[taken[label]++]);
        ++assigned;
      }
    }
    // Top up from any stratum if rounding starved the target.
    for (auto& [label, ids] : strata) {
      while (assigned < target && taken[label] < ids.size()) {
        out.push_back(ids[taken[label]++]);
        ++assigned;
      }
    }
    return out;
  };

  DatasetSplit split;
  split.seed = seed;
  split.test = allocate(n_test);
  split.val = allocate(n_val);
  for (const auto& [label, ids] : strata) {
    for (std::size_t i = taken[label]; i < ids.size(); ++i) split.train.push_back(ids[i]);
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

std::string split_to_json(const DatasetSplit& split) {
  nlohmann::json doc = {{"schema_version", 1},
                        {"seed", split.seed},
                        {"train", split.train},
                        {"val", split.val},
                        {"test", split.test}};
  return doc.dump();
}

DatasetSplit split_from_json(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("bad split JSON: ") + e.what());
  }
  DatasetSplit split;
  split.seed = doc.value("seed", 0ULL);
  split.train = doc.at("train").get<std::vector<std::string>>();
  split.val = doc.at("val").get<std::vector<std::string>>();
  split.test = doc.at("test").get<std::vector<std::string>>();
  return split;
}

}  // namespace rumorgraph
