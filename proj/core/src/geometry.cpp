#include "hcap/geometry.hpp"

#include <algorithm>

namespace hcap::geometry {

double intersection(const Segment& a, const Segment& b) {
  return std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
}

double union_length(const Segment& a, const Segment& b) { return a.length() + b.length() - intersection(a, b); }

double hull_length(const Segment& a, const Segment& b) {
  return std::max(a.end, b.end) - std::min(a.start, b.start);
}

double tiou(const Segment& a, const Segment& b) {
  const double u = union_length(a, b);
  if (u <= 0.0) return a == b ? 1.0 : 0.0;
  return intersection(a, b) / u;
}

double giou1d(const Segment& a, const Segment& b) {
  const double hull = hull_length(a, b);
  if (hull <= 0.0) return 1.0;  // both collapse onto the same point
  const double u = union_length(a, b);
  return tiou(a, b) - (hull - u) / hull;
}

Segment segment_from_center_width(double center, double width) {
  return {std::clamp(center - 0.5 * width, 0.0, 1.0), std::clamp(center + 0.5 * width, 0.0, 1.0)};
}

}  // namespace hcap::geometry
