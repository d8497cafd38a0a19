#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace lmdx {

enum class Occurrence { single, repeated };

// Entity type tree node. A node is a leaf iff it has no children; sibling
// order is the file's key order and is preserved through rendering.
struct EntityTypeNode {
  std::string name;
  Occurrence occurrence = Occurrence::single;
  std::vector<EntityTypeNode> children;

  bool is_leaf() const { return children.empty(); }
  bool operator==(const EntityTypeNode&) const = default;
};

struct ExtractionSchema {
  std::vector<EntityTypeNode> roots;

  bool operator==(const ExtractionSchema&) const = default;
};

// Schema JSON dialect: "" single leaf, [] repeated leaf, {...} single
// hierarchical, [{...}] repeated hierarchical. Anything else (other scalars,
// arrays with other content, empty objects) is malformed; duplicate keys in
// one object raise duplicate_key.
ExtractionSchema load_schema(const std::string& json_text);
ExtractionSchema load_schema_file(const std::string& path);

const EntityTypeNode* find_child(const std::vector<EntityTypeNode>& nodes,
                                 std::string_view name);

}  // namespace lmdx
