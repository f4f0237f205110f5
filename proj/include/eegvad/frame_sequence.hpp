#pragma once

#include <optional>
#include <string>
#include <vector>

#include "eegvad/time_series.hpp"

namespace eegvad {

// Per-frame feature vectors at a fixed analysis rate. Row k is the frame
// whose window starts at k / frame_rate_hz seconds.
struct FrameSequence {
  RowMatrix values;  // count x dim
  double frame_rate_hz = 100.0;
  std::string layout;
  std::vector<int> labels;  // empty, or one class per frame

  Eigen::Index count() const { return values.rows(); }
  Eigen::Index dim() const { return values.cols(); }
  bool labeled() const { return !labels.empty(); }

  // First `n` frames (and labels).
  FrameSequence head(Eigen::Index n) const;
};

// Column-wise concatenation of frames aligned by index; the result is
// truncated to the shorter input. Labels come from `a` if present, else `b`.
FrameSequence concat_features(const FrameSequence& a, const FrameSequence& b);

}  // namespace eegvad
