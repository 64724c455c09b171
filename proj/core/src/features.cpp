#include "rumorgraph/features.hpp"

#include <cctype>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "rumorgraph/error.hpp"
#include "rumorgraph/hashing.hpp"

namespace rumorgraph {

namespace {

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

void accumulate(FeatureVector& vec, const std::string& token, std::uint64_t seed) {
  std::uint64_t h = fnv1a64(token, seed);
  std::size_t bucket = static_cast<std::size_t>(h % vec.size());
  double sign = (h >> 63) ? -1.0 : 1.0;
  vec[bucket] += sign;
}

FeatureMap load_external(const PropagationTree& tree, const FeatureConfig& config) {
  std::ifstream in(config.external_path);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot open feature file '" + config.external_path + "'");
  }
  FeatureMap stored;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      continue;  // tolerate junk lines, same policy as the score cache
    }
    if (doc.value("tree", "") != tree.event_id) continue;
    FeatureVector vec = doc.at("vec").get<FeatureVector>();
    if (static_cast<int>(vec.size()) != config.dim) {
      throw Error(ErrorCode::ShapeMismatch,
                  "stored vector for node '" + doc.value("node", "") + "' has dim " +
                      std::to_string(vec.size()) + ", expected " + std::to_string(config.dim));
    }
    stored[doc.at("node").get<std::string>()] = std::move(vec);
  }
  FeatureMap out;
  for (const auto& node : tree.nodes) {
    auto it = stored.find(node.id);
    if (it == stored.end()) {
      throw Error(ErrorCode::ExternalFileMissingNode,
                  "no stored vector for node '" + node.id + "' of tree '" + tree.event_id + "'");
    }
    out[node.id] = it->second;
  }
  return out;
}

}  // namespace

FeatureVector hash_text_features(const std::string& text, int dim, std::uint64_t seed) {
  if (dim < 1) throw Error(ErrorCode::ConfigConflict, "feature dim must be >= 1");
  FeatureVector vec(static_cast<std::size_t>(dim), 0.0);
  std::vector<std::string> tokens = tokenize(text);
  for (const auto& tok : tokens) accumulate(vec, tok, seed);
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    accumulate(vec, tokens[i - 1] + "\x1f" + tokens[i], seed);
  }
  double norm = 0.0;
  for (double v : vec) norm += v * v;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& v : vec) v /= norm;
  }
  return vec;
}

FeatureMap extract_features(const PropagationTree& tree, const FeatureConfig& config) {
  if (config.extractor_kind == ExtractorKind::ExternalFile) {
    return load_external(tree, config);
  }
  FeatureMap out;
  for (const auto& node : tree.nodes) {
    out[node.id] = hash_text_features(node.text, config.dim, config.seed);
  }
  return out;
}

}  // namespace rumorgraph
