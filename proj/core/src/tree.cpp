#include "rumorgraph/tree.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "rumorgraph/error.hpp"

namespace rumorgraph {

using json = nlohmann::json;

const PostNode& PropagationTree::root() const {
  for (const auto& n : nodes) {
    if (!n.parent_id) return n;
  }
  throw Error(ErrorCode::NoRoot, "tree '" + event_id + "' has no root");
}

const PostNode* PropagationTree::find(const std::string& id) const {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), id,
                             [](const PostNode& n, const std::string& key) { return n.id < key; });
  if (it == nodes.end() || it->id != id) return nullptr;
  return &*it;
}

std::vector<std::string> PropagationTree::child_ids() const {
  std::vector<std::string> out;
  out.reserve(nodes.size() > 0 ? nodes.size() - 1 : 0);
  for (const auto& n : nodes) {
    if (n.parent_id) out.push_back(n.id);
  }
  return out;  // nodes are id-sorted already
}

PropagationTree build_tree(const std::vector<PostRecord>& records,
                           const std::string& event_id, int label) {
  if (records.empty()) {
    throw Error(ErrorCode::NoRoot, "tree '" + event_id + "' has no posts");
  }
  if (label != 0 && label != 1) {
    throw Error(ErrorCode::ParseError,
                "tree '" + event_id + "' label must be 0 or 1, got " + std::to_string(label));
  }

  std::map<std::string, const PostRecord*> by_id;
  std::string root_id;
  int root_count = 0;
  for (const auto& r : records) {
    if (!by_id.emplace(r.id, &r).second) {
      throw Error(ErrorCode::DuplicateId, "duplicate node id '" + r.id + "' in tree '" + event_id + "'");
    }
    if (!r.parent_id) {
      ++root_count;
      root_id = r.id;
    }
  }
  if (root_count != 1) {
    throw Error(ErrorCode::NoRoot, "tree '" + event_id + "' has " + std::to_string(root_count) +
                                       " parentless nodes, expected exactly 1");
  }
  for (const auto& r : records) {
    if (r.parent_id && !by_id.count(*r.parent_id)) {
      throw Error(ErrorCode::DanglingParent,
                  "node '" + r.id + "' references unknown parent '" + *r.parent_id + "'");
    }
  }

  // Depth via walk-to-root; a walk longer than |nodes| means a parent cycle.
  std::map<std::string, int> depth;
  depth[root_id] = 0;
  for (const auto& r : records) {
    std::vector<const PostRecord*> chain;
    const PostRecord* cur = &r;
    while (!depth.count(cur->id)) {
      chain.push_back(cur);
      if (chain.size() > records.size()) {
        throw Error(ErrorCode::Cycle, "parent links of node '" + r.id + "' never reach the root");
      }
      cur = by_id.at(*cur->parent_id);
    }
    int d = depth.at(cur->id);
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
      depth[(*it)->id] = ++d;
    }
  }

  PropagationTree tree;
  tree.event_id = event_id;
  tree.label = label;
  tree.nodes.reserve(records.size());
  for (const auto& [id, rec] : by_id) {
    tree.nodes.push_back(PostNode{rec->id, rec->parent_id, rec->text, depth.at(id)});
    if (rec->text.find(kSeparator) != std::string::npos) {
      tree.warnings.push_back("node '" + rec->id + "' text contains the separator token");
    }
  }
  for (const auto& n : tree.nodes) {
    if (n.parent_id) tree.edges.emplace_back(*n.parent_id, n.id);
  }
  return tree;
}

Subchain extract_subchain(const PropagationTree& tree, const std::string& node_id) {
  const PostNode* node = tree.find(node_id);
  if (!node) {
    throw Error(ErrorCode::UnknownNode, "node '" + node_id + "' not in tree '" + tree.event_id + "'");
  }
  if (!node->parent_id) {
    throw Error(ErrorCode::RootHasNoSubchain, "root '" + node_id + "' has no subchain");
  }

  std::vector<const PostNode*> path;
  const PostNode* cur = node;
  while (true) {
    path.push_back(cur);
    if (!cur->parent_id) break;
    cur = tree.find(*cur->parent_id);
  }
  std::reverse(path.begin(), path.end());

  Subchain chain;
  chain.target_id = node_id;
  chain.path_ids.reserve(path.size());
  for (std::size_t i = 0; i < path.size(); ++i) {
    chain.path_ids.push_back(path[i]->id);
    if (i > 0) chain.joined_text += kSeparator;
    chain.joined_text += path[i]->text;
  }
  return chain;
}

std::vector<Subchain> enumerate_subchains(const PropagationTree& tree) {
  std::vector<Subchain> out;
  for (const auto& n : tree.nodes) {
    if (n.parent_id) out.push_back(extract_subchain(tree, n.id));
  }
  return out;
}

std::string tree_to_json(const PropagationTree& tree) {
  json posts = json::array();
  // Root first, then replies in id order; keeps files stable across runs.
  const PostNode& r = tree.root();
  posts.push_back({{"id", r.id}, {"parent", nullptr}, {"text", r.text}});
  for (const auto& n : tree.nodes) {
    if (!n.parent_id) continue;
    posts.push_back({{"id", n.id}, {"parent", *n.parent_id}, {"text", n.text}});
  }
  json doc = {{"event_id", tree.event_id}, {"label", tree.label}, {"posts", posts}};
  return doc.dump();
}

PropagationTree tree_from_json(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("bad tree JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("event_id") || !doc.contains("label") ||
      !doc.contains("posts") || !doc["posts"].is_array()) {
    throw Error(ErrorCode::ParseError, "tree JSON must have event_id, label, posts[]");
  }
  std::vector<PostRecord> records;
  for (const auto& p : doc["posts"]) {
    if (!p.is_object() || !p.contains("id") || !p.contains("text")) {
      throw Error(ErrorCode::ParseError, "post entries need id and text");
    }
    PostRecord rec;
    rec.id = p["id"].get<std::string>();
    if (p.contains("parent") && !p["parent"].is_null()) {
      rec.parent_id = p["parent"].get<std::string>();
    }
    rec.text = p["text"].get<std::string>();
    records.push_back(std::move(rec));
  }
  return build_tree(records, doc["event_id"].get<std::string>(), doc["label"].get<int>());
}

}  // namespace rumorgraph
