#include "lmdx/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace lmdx {

namespace {

// Union length of 1-D intervals, clipped to [lo, hi].
double interval_union_length(std::vector<std::pair<double, double>> ivals,
                             double lo, double hi) {
  for (auto& iv : ivals) {
    iv.first = std::max(iv.first, lo);
    iv.second = std::min(iv.second, hi);
  }
  std::erase_if(ivals, [](const auto& iv) { return iv.first >= iv.second; });
  std::sort(ivals.begin(), ivals.end());
  double total = 0.0;
  double cur_lo = 0.0, cur_hi = -1.0;
  bool open = false;
  for (const auto& [a, b] : ivals) {
    if (!open || a > cur_hi) {
      if (open) total += cur_hi - cur_lo;
      cur_lo = a;
      cur_hi = b;
      open = true;
    } else {
      cur_hi = std::max(cur_hi, b);
    }
  }
  if (open) total += cur_hi - cur_lo;
  return total;
}

}  // namespace

double covered_fraction(const BoundingBox& pred,
                        const std::vector<BoundingBox>& region) {
  std::vector<BoundingBox> clips;
  for (const auto& b : region) {
    if (auto c = intersect(pred, b)) clips.push_back(*c);
  }

  const double w = pred.width(), h = pred.height();
  if (w > 0.0 && h > 0.0) {
    if (clips.empty()) return 0.0;
    std::vector<double> xs{pred.x_min, pred.x_max};
    std::vector<double> ys{pred.y_min, pred.y_max};
    for (const auto& c : clips) {
      xs.push_back(c.x_min);
      xs.push_back(c.x_max);
      ys.push_back(c.y_min);
      ys.push_back(c.y_max);
    }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    std::sort(ys.begin(), ys.end());
    ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
    double covered = 0.0;
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
      const double cx = (xs[i] + xs[i + 1]) / 2.0;
      for (std::size_t j = 0; j + 1 < ys.size(); ++j) {
        const double cy = (ys[j] + ys[j + 1]) / 2.0;
        for (const auto& c : clips) {
          if (cx > c.x_min && cx < c.x_max && cy > c.y_min && cy < c.y_max) {
            covered += (xs[i + 1] - xs[i]) * (ys[j + 1] - ys[j]);
            break;
          }
        }
      }
    }
    return std::min(1.0, covered / pred.area());
  }

  // Degenerate predictions: measure in the surviving dimension(s).
  if (w == 0.0 && h == 0.0) {
    return clips.empty() ? 0.0 : 1.0;  // non-empty clip == point inside a box
  }
  std::vector<std::pair<double, double>> ivals;
  if (w == 0.0) {
    for (const auto& c : clips) ivals.emplace_back(c.y_min, c.y_max);
    return interval_union_length(std::move(ivals), pred.y_min, pred.y_max) / h;
  }
  for (const auto& c : clips) ivals.emplace_back(c.x_min, c.x_max);
  return interval_union_length(std::move(ivals), pred.x_min, pred.x_max) / w;
}

}  // namespace lmdx
