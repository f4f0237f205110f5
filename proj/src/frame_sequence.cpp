#include "eegvad/frame_sequence.hpp"

#include <algorithm>

#include "eegvad/error.hpp"

namespace eegvad {

FrameSequence FrameSequence::head(Eigen::Index n) const {
  n = std::min(n, count());
  FrameSequence out;
  out.values = values.topRows(n);
  out.frame_rate_hz = frame_rate_hz;
  out.layout = layout;
  if (labeled()) out.labels.assign(labels.begin(), labels.begin() + n);
  return out;
}

FrameSequence concat_features(const FrameSequence& a, const FrameSequence& b) {
  if (a.frame_rate_hz != b.frame_rate_hz)
    throw Error(Errc::rate_mismatch, "cannot concatenate frames at different rates");
  const Eigen::Index n = std::min(a.count(), b.count());
  FrameSequence out;
  out.frame_rate_hz = a.frame_rate_hz;
  out.values.resize(n, a.dim() + b.dim());
  out.values.leftCols(a.dim()) = a.values.topRows(n);
  out.values.rightCols(b.dim()) = b.values.topRows(n);
  out.layout = a.layout + "|" + b.layout;
  const auto& src = a.labeled() ? a.labels : b.labels;
  if (!src.empty()) out.labels.assign(src.begin(), src.begin() + n);
  return out;
}

}  // namespace eegvad
