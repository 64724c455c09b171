#pragma once

#include <cstdint>
#include <vector>

#include "rumorgraph/augment.hpp"
#include "rumorgraph/oracle.hpp"

namespace rumorgraph {

/// Desk-scale synthetic corpus: random reply trees whose post texts carry a
/// label-dependent vocabulary mix, scored by the mock oracle under a bias
/// profile.
struct SynthConfig {
  int n_trees = 40;                // >= 10
  double positive_fraction = 0.5;  // exact count by construction
  int min_replies = 3;
  int max_replies = 10;
  int max_depth = 4;
  BiasProfile profile = make_bias_profile("oracle-perfect", 0);
  std::uint64_t seed = 0;
};

std::vector<ScoredTree> gen_synthetic_dataset(const SynthConfig& config);

}  // namespace rumorgraph
