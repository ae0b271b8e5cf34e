#include "posekit/nms.hpp"

#include <algorithm>
#include <numeric>

namespace posekit {

double box_iou(const BBox& a, const BBox& b) {
  const double ix = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  const double iy = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

std::vector<int> greedy_nms_indices(const std::vector<Detection>& dets, NmsKind kind,
                                    double threshold, int max_keep, const OksParams& params) {
  const int n = static_cast<int>(dets.size());
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return dets[a].score > dets[b].score; });

  std::vector<BBox> boxes;
  if (kind == NmsKind::kIou) {
    boxes.reserve(dets.size());
    for (const auto& d : dets) boxes.push_back(keypoint_bbox(d.pose));
  }

  auto similarity = [&](int a, int b) {
    if (kind == NmsKind::kIou) return box_iou(boxes[a], boxes[b]);
    return oks_symmetric(dets[a].pose, dets[a].score, dets[b].pose, dets[b].score, params);
  };

  std::vector<int> kept;
  std::vector<char> suppressed(static_cast<size_t>(n), 0);
  for (size_t i = 0; i < order.size(); ++i) {
    const int cur = order[i];
    if (suppressed[cur]) continue;
    kept.push_back(cur);
    if (static_cast<int>(kept.size()) >= max_keep) break;
    for (size_t j = i + 1; j < order.size(); ++j) {
      const int other = order[j];
      if (suppressed[other]) continue;
      if (similarity(cur, other) > threshold) suppressed[other] = 1;
    }
  }
  return kept;
}

std::vector<Detection> greedy_nms(const std::vector<Detection>& dets, NmsKind kind,
                                  double threshold, int max_keep, const OksParams& params) {
  std::vector<Detection> out;
  for (int idx : greedy_nms_indices(dets, kind, threshold, max_keep, params))
    out.push_back(dets[idx]);
  return out;
}

}  // namespace posekit
