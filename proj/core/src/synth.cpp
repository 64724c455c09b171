#include "rumorgraph/synth.hpp"

#include <cmath>
#include <random>

#include "rumorgraph/error.hpp"
#include "rumorgraph/hashing.hpp"

namespace rumorgraph {

namespace {

std::string padded(const char* prefix, int i, int width = 4) {
  std::string digits = std::to_string(i);
  std::string out = prefix;
  out.append(static_cast<std::size_t>(width) - std::min<std::size_t>(width, digits.size()), '0');
  out += digits;
  return out;
}

// Posts mix a label-specific vocabulary with shared filler, so hashed
// features are separable but overlapping.
std::string make_text(int label, std::mt19937_64& rng) {
  std::string text;
  int words = 14 + static_cast<int>(rng() % 7);
  for (int w = 0; w < words; ++w) {
    if (!text.empty()) text += ' ';
    bool topical = (rng() % 100) < 95;
    int idx = static_cast<int>(rng() % 12);
    if (!topical) {
      text += "c" + std::to_string(idx);
    } else if (label == 1) {
      text += "r" + std::to_string(idx);
    } else {
      text += "n" + std::to_string(idx);
    }
  }
  return text;
}

}  // namespace

std::vector<ScoredTree> gen_synthetic_dataset(const SynthConfig& config) {
  if (config.n_trees < 10) {
    throw Error(ErrorCode::TooFewTrees, "synthetic datasets need n_trees >= 10");
  }
  if (config.min_replies < 1 || config.max_replies < config.min_replies) {
    throw Error(ErrorCode::ConfigConflict, "bad reply-count range");
  }

  const int n_positive =
      static_cast<int>(std::lround(config.positive_fraction * config.n_trees));

  std::vector<ScoredTree> dataset;
  dataset.reserve(static_cast<std::size_t>(config.n_trees));
  MockOracle oracle(config.profile);

  for (int t = 0; t < config.n_trees; ++t) {
    const int label = (t < n_positive) ? 1 : 0;
    std::mt19937_64 rng(splitmix64(config.seed ^ fnv1a64(padded("tree", t))));

    std::vector<PostRecord> records;
    records.push_back({"root", std::nullopt, make_text(label, rng)});
    std::vector<std::pair<std::string, int>> attachable = {{"root", 0}};  // (id, depth)
    const int replies =
        config.min_replies + static_cast<int>(rng() % (config.max_replies - config.min_replies + 1));
    for (int r = 0; r < replies; ++r) {
      const auto& [parent, parent_depth] = attachable[rng() % attachable.size()];
      std::string id = padded("p", r, 2);
      records.push_back({id, parent, make_text(label, rng)});
      if (parent_depth + 1 < config.max_depth) attachable.emplace_back(id, parent_depth + 1);
    }

    ScoredTree scored;
    scored.tree = build_tree(records, padded("synth-", t), label);
    scored.scores = score_tree(oracle, scored.tree, nullptr, 1);
    dataset.push_back(std::move(scored));
  }
  return dataset;
}

}  // namespace rumorgraph
