#include "posekit/oks.hpp"

#include <cmath>
#include <stdexcept>

namespace posekit {

double oks(const Pose& pred, const Pose& ref, const OksParams& params) {
  const size_t k = ref.keypoints.size();
  if (pred.keypoints.size() != k)
    throw std::invalid_argument("oks: keypoint count mismatch");
  if (params.sigmas.size() != k)
    throw std::invalid_argument("oks: sigmas length " + std::to_string(params.sigmas.size()) +
                                " != K " + std::to_string(k));

  const BBox box = keypoint_bbox(ref);  // throws if ref has no visible keypoint
  const double s = std::max(params.scale_floor, std::sqrt(box.area()));

  double sum = 0.0;
  int count = 0;
  for (size_t i = 0; i < k; ++i) {
    if (ref.keypoints[i].v <= 0) continue;
    const double dx = pred.keypoints[i].x - ref.keypoints[i].x;
    const double dy = pred.keypoints[i].y - ref.keypoints[i].y;
    const double ki = params.sigmas[i];
    sum += std::exp(-(dx * dx + dy * dy) / (2.0 * s * s * ki * ki));
    ++count;
  }
  return sum / count;
}

double oks_symmetric(const Pose& a, double score_a, const Pose& b, double score_b,
                     const OksParams& params) {
  if (score_b > score_a) return oks(a, b, params);
  return oks(b, a, params);
}

double oks_symmetric(const Pose& a, const Pose& b, const OksParams& params) {
  return oks_symmetric(a, a.score.value_or(0.0), b, b.score.value_or(0.0), params);
}

}  // namespace posekit
