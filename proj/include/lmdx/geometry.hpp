#pragma once

#include <algorithm>
#include <optional>
#include <vector>

namespace lmdx {

// Axis-aligned box in normalized page coordinates. Degenerate (zero width or
// height) boxes are legal.
struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }

  bool operator==(const BoundingBox&) const = default;
};

inline BoundingBox envelope(const BoundingBox& a, const BoundingBox& b) {
  return {std::min(a.x_min, b.x_min), std::min(a.y_min, b.y_min),
          std::max(a.x_max, b.x_max), std::max(a.y_max, b.y_max)};
}

inline std::optional<BoundingBox> intersect(const BoundingBox& a,
                                            const BoundingBox& b) {
  BoundingBox r{std::max(a.x_min, b.x_min), std::max(a.y_min, b.y_min),
                std::min(a.x_max, b.x_max), std::min(a.y_max, b.y_max)};
  if (r.x_min > r.x_max || r.y_min > r.y_max) return std::nullopt;
  return r;
}

inline bool contains(const BoundingBox& outer, const BoundingBox& inner,
                     double tol = 0.0) {
  return inner.x_min >= outer.x_min - tol && inner.y_min >= outer.y_min - tol &&
         inner.x_max <= outer.x_max + tol && inner.y_max <= outer.y_max + tol;
}

// Fraction of `pred` covered by the union of `region` boxes (exact, computed
// over the coordinate grid induced by the clipped boxes). For degenerate pred
// boxes the fraction is measured with the matching lower-dimensional measure:
// covered length for a zero-width/height strip, point containment for a point.
double covered_fraction(const BoundingBox& pred,
                        const std::vector<BoundingBox>& region);

}  // namespace lmdx
