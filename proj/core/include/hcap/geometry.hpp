#pragma once

namespace hcap::geometry {

/// Normalized temporal interval [start, end] inside [0, 1].
struct Segment {
  double start = 0.0;
  double end = 0.0;

  double length() const { return end - start; }
  double center() const { return 0.5 * (start + end); }
  bool valid() const { return 0.0 <= start && start <= end && end <= 1.0; }
  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Pixel-space box: offset (x, y), extent (w, h).
struct BBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  bool inside(double frame_width, double frame_height) const {
    return w > 0 && h > 0 && x >= 0 && y >= 0 && x + w <= frame_width && y + h <= frame_height;
  }
  friend bool operator==(const BBox&, const BBox&) = default;
};

double intersection(const Segment& a, const Segment& b);
double union_length(const Segment& a, const Segment& b);
double hull_length(const Segment& a, const Segment& b);

// Temporal IoU. Two zero-length segments: 1 if they coincide, else 0.
double tiou(const Segment& a, const Segment& b);

// 1-D generalized IoU, in (-1, 1]. Two coincident zero-length segments
// give 1.
double giou1d(const Segment& a, const Segment& b);

// [center - width/2, center + width/2] clipped to [0, 1].
Segment segment_from_center_width(double center, double width);

}  // namespace hcap::geometry
