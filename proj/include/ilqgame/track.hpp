#pragma once

// Race track reference line with piecewise-constant curvature and a lateral
// corridor whose half-widths are constant per segment.

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>
#include <vector>

#include "ilqgame/core.hpp"

namespace ilqgame {

struct TrackSegment {
  double length = 0.0;       // m
  double curvature = 0.0;    // 1/m, positive turns left
  double width_left = 0.0;   // m
  double width_right = 0.0;  // m

  bool operator==(const TrackSegment&) const = default;
};

struct CorridorWidths {
  double left = 0.0;
  double right = 0.0;

  bool operator==(const CorridorWidths&) const = default;
};

class Track {
 public:
  Track() = default;

  /// Throws std::invalid_argument listing every offending segment.
  explicit Track(std::vector<TrackSegment> segments)
      : segments_(std::move(segments)) {
    std::ostringstream errors;
    if (segments_.empty()) errors << "track has no segments; ";
    starts_.reserve(segments_.size());
    double s = 0.0;
    for (std::size_t idx = 0; idx < segments_.size(); ++idx) {
      const auto& seg = segments_[idx];
      if (!(seg.length > 0.0)) {
        errors << "segment " << idx << ": length must be > 0; ";
      }
      if (!(seg.width_left > 0.0) || !(seg.width_right > 0.0)) {
        errors << "segment " << idx << ": widths must be > 0; ";
      }
      const double w = std::max(seg.width_left, seg.width_right);
      if (!(std::abs(seg.curvature) * w < 1.0)) {
        errors << "segment " << idx
               << ": |curvature| * max width must be < 1; ";
      }
      starts_.push_back(s);
      s += seg.length;
    }
    total_length_ = s;
    if (const auto msg = errors.str(); !msg.empty()) {
      throw std::invalid_argument("invalid track: " + msg);
    }
  }

  /// Straight single-segment track.
  static Track straight(double length, double width_left, double width_right) {
    return Track({{length, 0.0, width_left, width_right}});
  }

  const std::vector<TrackSegment>& segments() const noexcept {
    return segments_;
  }
  double total_length() const noexcept { return total_length_; }

  /// Index of the segment containing s. Joints belong to the later segment;
  /// s == total_length belongs to the last one.
  std::size_t segment_index(double s) const {
    if (!(s >= 0.0 && s <= total_length_)) {
      std::ostringstream msg;
      msg << "arc length " << s << " outside track [0, " << total_length_
          << "]";
      throw DomainError(msg.str());
    }
    const auto it = std::upper_bound(starts_.begin(), starts_.end(), s);
    return static_cast<std::size_t>(std::distance(starts_.begin(), it)) - 1;
  }

  double curvature_at(double s) const {
    return segments_[segment_index(s)].curvature;
  }

  CorridorWidths width_at(double s) const {
    const auto& seg = segments_[segment_index(s)];
    return {seg.width_left, seg.width_right};
  }

  bool operator==(const Track& other) const {
    return segments_ == other.segments_;
  }

 private:
  std::vector<TrackSegment> segments_;
  std::vector<double> starts_;
  double total_length_ = 0.0;
};

}  // namespace ilqgame
