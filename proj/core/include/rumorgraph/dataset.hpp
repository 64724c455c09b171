#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rumorgraph/tree.hpp"

namespace rumorgraph {

struct LoadReport {
  std::vector<PropagationTree> trees;
  int skipped_malformed = 0;
  int removed_no_reply = 0;
  std::vector<std::string> messages;  // one line per skipped/removed input
};

/// Loads a dataset from a directory of tree JSON files or a JSON-lines file.
/// Malformed documents are skipped and counted; trees without replies are
/// dropped and counted.
LoadReport load_dataset(const std::filesystem::path& path);

void save_dataset_jsonl(const std::vector<PropagationTree>& trees,
                        const std::filesystem::path& path);

struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
  std::uint64_t seed = 0;

  bool contains_train(const std::string& id) const;
};

/// Stratified 7:1:2 split, deterministic per seed. Throws TooFewTrees
/// below 10 trees.
DatasetSplit split_dataset(const std::vector<PropagationTree>& trees, std::uint64_t seed);

std::string split_to_json(const DatasetSplit& split);
DatasetSplit split_from_json(const std::string& json_text);

}  // namespace rumorgraph
