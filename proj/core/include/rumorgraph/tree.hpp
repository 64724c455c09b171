#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace rumorgraph {

/// Separator used when joining subchain texts. Exactly " [SEP] ".
inline constexpr const char* kSeparator = " [SEP] ";

struct PostNode {
  std::string id;
  std::optional<std::string> parent_id;  // absent only for the root
  std::string text;
  int depth = 0;  // root = 0, child = parent + 1
};

struct PostRecord {
  std::string id;
  std::optional<std::string> parent_id;
  std::string text;
};

/// One source post plus its reply tree, directed along propagation.
/// Immutable after build_tree(); safe to share across threads.
struct PropagationTree {
  std::string event_id;
  int label = 0;  // 1 = rumor, 0 = non-rumor
  std::vector<PostNode> nodes;                               // sorted by id
  std::vector<std::pair<std::string, std::string>> edges;    // parent -> child
  std::vector<std::string> warnings;  // e.g. node text containing kSeparator

  const PostNode& root() const;
  const PostNode* find(const std::string& id) const;  // nullptr when absent
  std::size_t size() const { return nodes.size(); }
  /// Non-root node ids in lexicographic order.
  std::vector<std::string> child_ids() const;
};

/// The unique root-to-node path and its separator-joined text.
struct Subchain {
  std::string target_id;
  std::vector<std::string> path_ids;  // path_ids.front() is the root
  std::string joined_text;

  /// Hops from root to target: path_ids.size() - 1, always >= 1.
  int depth() const { return static_cast<int>(path_ids.size()) - 1; }
};

/// Validates records and assembles a tree with computed depths.
/// Throws NoRoot, DuplicateId, DanglingParent, Cycle.
PropagationTree build_tree(const std::vector<PostRecord>& records,
                           const std::string& event_id, int label);

/// Root-to-node path for a non-root node.
/// Throws RootHasNoSubchain for the root, UnknownNode otherwise.
Subchain extract_subchain(const PropagationTree& tree, const std::string& node_id);

/// One subchain per non-root node, in lexicographic id order.
std::vector<Subchain> enumerate_subchains(const PropagationTree& tree);

// Canonical tree file format, one JSON document per tree:
//   {"event_id": str, "label": 0|1, "posts": [{"id", "parent", "text"}]}
std::string tree_to_json(const PropagationTree& tree);
PropagationTree tree_from_json(const std::string& json_text);

}  // namespace rumorgraph
