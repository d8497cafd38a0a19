#include <doctest.h>

#include "lmdx/geometry.hpp"

using lmdx::BoundingBox;
using lmdx::covered_fraction;

TEST_SUITE("geometry") {

TEST_CASE("envelope and intersect") {
  BoundingBox a{0.1, 0.1, 0.3, 0.2};
  BoundingBox b{0.2, 0.15, 0.5, 0.4};
  CHECK(lmdx::envelope(a, b) == BoundingBox{0.1, 0.1, 0.5, 0.4});
  auto i = lmdx::intersect(a, b);
  REQUIRE(i.has_value());
  CHECK(*i == BoundingBox{0.2, 0.15, 0.3, 0.2});
  CHECK_FALSE(lmdx::intersect(a, {0.8, 0.8, 0.9, 0.9}).has_value());
  // Touching edges intersect in a degenerate box, not nothing.
  auto edge = lmdx::intersect(a, {0.3, 0.1, 0.6, 0.2});
  REQUIRE(edge.has_value());
  CHECK(edge->width() == 0.0);
}

TEST_CASE("contains with tolerance") {
  BoundingBox outer{0.0, 0.0, 1.0, 1.0};
  CHECK(lmdx::contains(outer, {0.2, 0.2, 0.8, 0.8}));
  CHECK_FALSE(lmdx::contains(outer, {0.2, 0.2, 1.1, 0.8}));
  CHECK(lmdx::contains(outer, {0.2, 0.2, 1.0 + 1e-7, 0.8}, 1e-6));
}

TEST_CASE("covered_fraction full, none, partial") {
  BoundingBox pred{0.0, 0.0, 0.2, 0.1};
  CHECK(covered_fraction(pred, {pred}) == doctest::Approx(1.0));
  CHECK(covered_fraction(pred, {}) == 0.0);
  CHECK(covered_fraction(pred, {{0.5, 0.5, 0.6, 0.6}}) == 0.0);
  CHECK(covered_fraction(pred, {{0.0, 0.0, 0.1, 0.1}}) == doctest::Approx(0.5));
}

TEST_CASE("covered_fraction never double-counts overlapping region boxes") {
  BoundingBox pred{0.0, 0.0, 1.0, 1.0};
  std::vector<BoundingBox> region{{0.0, 0.0, 0.6, 1.0}, {0.4, 0.0, 1.0, 1.0}};
  CHECK(covered_fraction(pred, region) == doctest::Approx(1.0));
  // A union covering 80% exactly.
  std::vector<BoundingBox> partial{{0.0, 0.0, 0.5, 1.0}, {0.3, 0.0, 0.8, 1.0}};
  CHECK(covered_fraction(pred, partial) == doctest::Approx(0.8));
}

TEST_CASE("covered_fraction on degenerate boxes uses the lower-dimensional measure") {
  // Zero-height strip: fraction of its length inside the region.
  BoundingBox strip{0.0, 0.5, 1.0, 0.5};
  CHECK(covered_fraction(strip, {{0.0, 0.0, 0.6, 1.0}}) == doctest::Approx(0.6));
  // Strip along a region edge still counts as covered length.
  CHECK(covered_fraction(strip, {{0.0, 0.5, 0.4, 1.0}}) == doctest::Approx(0.4));
  // Zero-area point: containment is all or nothing.
  BoundingBox point{0.3, 0.3, 0.3, 0.3};
  CHECK(covered_fraction(point, {{0.0, 0.0, 1.0, 1.0}}) == 1.0);
  CHECK(covered_fraction(point, {{0.5, 0.5, 1.0, 1.0}}) == 0.0);
}

TEST_CASE("covered_fraction region boxes clip to the prediction") {
  BoundingBox pred{0.4, 0.4, 0.6, 0.6};
  // The region is much larger than pred; fraction is of pred's own area.
  CHECK(covered_fraction(pred, {{0.0, 0.0, 1.0, 1.0}}) == doctest::Approx(1.0));
  CHECK(covered_fraction(pred, {{0.0, 0.0, 0.5, 1.0}}) == doctest::Approx(0.5));
}

}
