#include <doctest.h>

#include "lmdx/error.hpp"
#include "lmdx/schema.hpp"
#include "support.hpp"

using namespace lmdx;

TEST_SUITE("schema") {

TEST_CASE("the four node forms") {
  ExtractionSchema s = load_schema(
      R"({"a": "", "b": [], "c": {"x": "", "y": []}, "d": [{"z": ""}]})");
  REQUIRE(s.roots.size() == 4);
  CHECK(s.roots[0].name == "a");
  CHECK(s.roots[0].occurrence == Occurrence::single);
  CHECK(s.roots[0].is_leaf());
  CHECK(s.roots[1].occurrence == Occurrence::repeated);
  CHECK(s.roots[1].is_leaf());
  CHECK(s.roots[2].occurrence == Occurrence::single);
  REQUIRE(s.roots[2].children.size() == 2);
  CHECK(s.roots[2].children[1].occurrence == Occurrence::repeated);
  CHECK(s.roots[3].occurrence == Occurrence::repeated);
  CHECK_FALSE(s.roots[3].is_leaf());
}

TEST_CASE("key order is file order, not alphabetical") {
  ExtractionSchema s = load_schema(R"({"zeta": "", "alpha": "", "mid": ""})");
  CHECK(s.roots[0].name == "zeta");
  CHECK(s.roots[1].name == "alpha");
  CHECK(s.roots[2].name == "mid");
}

TEST_CASE("nesting below the root level") {
  ExtractionSchema s =
      load_schema(R"({"order": {"items": [{"name": "", "qty": ""}], "total": ""}})");
  const EntityTypeNode& order = s.roots[0];
  REQUIRE(order.children.size() == 2);
  const EntityTypeNode& items = order.children[0];
  CHECK(items.occurrence == Occurrence::repeated);
  REQUIRE(items.children.size() == 2);
  CHECK(items.children[0].name == "name");
  CHECK(order.children[1].is_leaf());
}

TEST_CASE("duplicate keys are rejected, not last-wins") {
  CHECK_THROWS_WITH_AS(load_schema(R"({"a": "", "a": ""})"),
                       doctest::Contains("a"), Error);
  try {
    load_schema(R"({"x": {"k": "", "k": []}})");
    FAIL("expected duplicate key error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::duplicate_key);
  }
}

TEST_CASE("malformed forms") {
  for (const char* bad :
       {R"("")",                     // root must be an object
        R"({"a": 3})",               // scalar leaf marker must be ""
        R"({"a": "x"})",             // non-empty string
        R"({"a": null})",            // null is a completion value, not a type
        R"({"a": {}})",              // hierarchical needs at least one child
        R"({"a": [{}]})",            // ditto inside a list
        R"({"a": ["", ""]})",        // list form takes exactly one element
        R"({"a": [{"x": ""}, {"x": ""}]})",
        R"({"a": [3]})",
        R"({"a")"}) {                // truncated JSON
    CAPTURE(bad);
    CHECK_THROWS_AS(load_schema(bad), Error);
  }
}

TEST_CASE("empty array is a repeated leaf, empty schema is malformed") {
  ExtractionSchema s = load_schema(R"({"tags": []})");
  CHECK(s.roots[0].occurrence == Occurrence::repeated);
  CHECK(s.roots[0].is_leaf());
  CHECK_THROWS_AS(load_schema(R"({})"), Error);
}

TEST_CASE("find_child") {
  ExtractionSchema s = load_schema(R"({"a": "", "b": {"x": ""}})");
  CHECK(find_child(s.roots, "b") == &s.roots[1]);
  CHECK(find_child(s.roots[1].children, "x") == &s.roots[1].children[0]);
  CHECK(find_child(s.roots, "nope") == nullptr);
}

TEST_CASE("bundled schemas load") {
  ExtractionSchema adbuy =
      load_schema_file(testsup::fixture_path("adbuy/schema.json"));
  CHECK(adbuy.roots.size() == 10);
  const EntityTypeNode* li = find_child(adbuy.roots, "line_item");
  REQUIRE(li != nullptr);
  CHECK(li->occurrence == Occurrence::repeated);
  CHECK(li->children.size() == 5);

  ExtractionSchema reg =
      load_schema_file(testsup::fixture_path("registration/schema.json"));
  CHECK_FALSE(reg.roots.empty());
  ExtractionSchema cord =
      load_schema_file(testsup::fixture_path("cord/schema.json"));
  CHECK_FALSE(cord.roots.empty());
}

}
