#include "lmdx/schema.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <variant>

#include <json.hpp>

#include "lmdx/error.hpp"

namespace lmdx {

namespace {

using nlohmann::json;

// SAX builder: the only JSON shapes accepted are the schema dialect's. Using
// SAX keeps the file's key order and lets duplicate keys be detected (DOM
// parsing would silently collapse them).
struct SchemaSax {
  struct ObjFrame {
    std::string attach_key;
    bool is_root = false;
    bool in_array = false;
    std::vector<EntityTypeNode> children;
    std::set<std::string> keys;
    std::string pending;
    bool has_pending = false;
  };
  struct ArrFrame {
    std::string attach_key;
    int elements = 0;
    std::vector<EntityTypeNode> object_children;
    bool has_object = false;
  };
  using Frame = std::variant<ObjFrame, ArrFrame>;

  std::vector<Frame> stack;
  std::vector<EntityTypeNode> roots;
  bool done = false;

  [[noreturn]] static void bad(const std::string& msg) {
    fail(ErrorCode::malformed_schema, msg);
  }

  ObjFrame* obj_top() {
    if (stack.empty()) return nullptr;
    return std::get_if<ObjFrame>(&stack.back());
  }
  ArrFrame* arr_top() {
    if (stack.empty()) return nullptr;
    return std::get_if<ArrFrame>(&stack.back());
  }

  void attach(EntityTypeNode node) {
    auto* obj = obj_top();
    obj->children.push_back(std::move(node));
    obj->has_pending = false;
  }

  bool null() { bad("null is not a schema value"); }
  bool boolean(bool) { bad("booleans are not schema values"); }
  bool number_integer(json::number_integer_t) { bad("numbers are not schema values"); }
  bool number_unsigned(json::number_unsigned_t) { bad("numbers are not schema values"); }
  bool number_float(json::number_float_t, const std::string&) {
    bad("numbers are not schema values");
  }
  bool binary(json::binary_t&) { bad("binary is not a schema value"); }

  bool string(std::string& val) {
    auto* obj = obj_top();
    if (!obj || !obj->has_pending) bad("string value outside an object key");
    if (!val.empty()) bad("leaf types must be declared with an empty string");
    attach({obj->pending, Occurrence::single, {}});
    return true;
  }

  bool start_object(std::size_t) {
    if (stack.empty()) {
      if (done) bad("trailing content after schema object");
      ObjFrame f;
      f.is_root = true;
      stack.push_back(std::move(f));
      return true;
    }
    if (auto* obj = obj_top()) {
      if (!obj->has_pending) bad("object value outside an object key");
      ObjFrame f;
      f.attach_key = obj->pending;
      stack.push_back(std::move(f));
      return true;
    }
    auto* arr = arr_top();
    if (arr->has_object || arr->elements > 0) {
      bad("repeated hierarchical types must hold exactly one object");
    }
    ObjFrame f;
    f.in_array = true;
    stack.push_back(std::move(f));
    return true;
  }

  bool key(std::string& k) {
    auto* obj = obj_top();
    if (!obj->keys.insert(k).second) {
      fail(ErrorCode::duplicate_key, "duplicate key in schema object: " + k);
    }
    obj->pending = k;
    obj->has_pending = true;
    return true;
  }

  bool end_object() {
    ObjFrame frame = std::move(*obj_top());
    stack.pop_back();
    if (frame.is_root) {
      if (frame.children.empty()) bad("schema declares no entity types");
      roots = std::move(frame.children);
      done = true;
      return true;
    }
    if (frame.children.empty()) bad("hierarchical types need at least one child");
    if (frame.in_array) {
      auto* arr = arr_top();
      arr->object_children = std::move(frame.children);
      arr->has_object = true;
      arr->elements = 1;
      return true;
    }
    attach({frame.attach_key, Occurrence::single, std::move(frame.children)});
    return true;
  }

  bool start_array(std::size_t) {
    auto* obj = obj_top();
    if (!obj || !obj->has_pending) bad("arrays are only allowed as type values");
    ArrFrame f;
    f.attach_key = obj->pending;
    stack.push_back(std::move(f));
    return true;
  }

  bool end_array() {
    ArrFrame frame = std::move(*arr_top());
    stack.pop_back();
    if (frame.elements == 0) {
      attach({frame.attach_key, Occurrence::repeated, {}});
    } else {
      attach({frame.attach_key, Occurrence::repeated,
              std::move(frame.object_children)});
    }
    return true;
  }

  bool parse_error(std::size_t, const std::string&,
                   const nlohmann::detail::exception& ex) {
    bad(std::string("schema is not valid JSON: ") + ex.what());
  }
};

}  // namespace

ExtractionSchema load_schema(const std::string& json_text) {
  SchemaSax sax;
  json::sax_parse(json_text, &sax);
  if (!sax.done) fail(ErrorCode::malformed_schema, "schema must be a JSON object");
  return {std::move(sax.roots)};
}

ExtractionSchema load_schema_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io_error, "cannot open schema file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_schema(ss.str());
}

const EntityTypeNode* find_child(const std::vector<EntityTypeNode>& nodes,
                                 std::string_view name) {
  for (const auto& n : nodes) {
    if (n.name == name) return &n;
  }
  return nullptr;
}

}  // namespace lmdx
