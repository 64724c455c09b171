#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rumorgraph/tree.hpp"

namespace rumorgraph {

enum class ExtractorKind { HashedBow, ExternalFile };

struct FeatureConfig {
  int dim = 64;  // F_in
  ExtractorKind extractor_kind = ExtractorKind::HashedBow;
  std::uint64_t seed = 0;
  std::string external_path;  // JSONL, used when extractor_kind == ExternalFile
};

using FeatureVector = std::vector<double>;
using FeatureMap = std::map<std::string, FeatureVector>;  // node_id -> vector

/// Signed feature hashing of word unigrams+bigrams, L2-normalized.
/// Pure in (text, config); empty text maps to the zero vector.
FeatureVector hash_text_features(const std::string& text, int dim, std::uint64_t seed);

/// One vector per node. ExternalFile mode reads {"tree","node","vec"} JSONL
/// and throws ExternalFileMissingNode when a node has no stored vector.
FeatureMap extract_features(const PropagationTree& tree, const FeatureConfig& config);

}  // namespace rumorgraph
