#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace posekit {

/// Dense row-major tensor of 64-bit floats. Rank 0 (empty shape) is a scalar
/// with one element.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> values;

  Tensor() = default;
  explicit Tensor(std::vector<int> s, double fill = 0.0);
  static Tensor scalar(double v);
  static Tensor from(std::vector<int> s, std::vector<double> v);

  int size() const;
  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  // 3-d (c, h, w) accessors for the C x H x W layout used throughout.
  double& at3(int c, int h, int w) {
    return values[static_cast<size_t>((c * shape[1] + h) * shape[2] + w)];
  }
  double at3(int c, int h, int w) const {
    return values[static_cast<size_t>((c * shape[1] + h) * shape[2] + w)];
  }
};

/// Handle to a node in a Graph.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode tape. Operations append nodes in execution order; backward()
/// seeds the loss gradient and visits nodes in reverse execution order
/// exactly once, accumulating (never overwriting) into input gradients.
///
/// One graph serves one forward/backward pass; weights live outside as plain
/// Tensors and are registered as leaves per pass.
class Graph {
 public:
  Var leaf(Tensor value);

  const Tensor& value(Var v) const { return nodes_[check(v)].value; }
  const Tensor& grad(Var v) const { return nodes_[check(v)].grad; }
  Tensor& grad_mut(Var v) { return nodes_[check(v)].grad; }

  /// Cross-correlation with square kernel k in {1, 3}.
  /// input C_in x H x W, weights C_out x C_in x k x k, bias C_out.
  Var conv2d(Var input, Var weights, Var bias, int stride, int padding);

  Var relu(Var x);

  /// Elementwise sum, identical shapes.
  Var add(Var a, Var b);

  /// Multiply by a compile-time constant.
  Var scale(Var x, double c);

  /// Nearest-neighbour 2x upsampling of a C x H x W tensor.
  Var upsample_nearest2(Var x);

  /// Sum of all elements -> scalar.
  Var sum(Var x);

  /// Bilinear interpolation of a C x H x W feature map at a continuous
  /// (x, y) grid point (shape-[2] tensor). Out-of-grid points clamp to the
  /// border; the gradient w.r.t. a clamped coordinate is zero. Returns a
  /// C-vector; backward reaches both the features and the point.
  Var bilinear_sample(Var feature, Var point);

  /// The K-point deformable layer realizing the pose embedding: at every
  /// location p and joint i, gather psi_i = bilinear(feature, p + offset_i)
  /// and emit bias + sum_i weights[:, :, i] * psi_i.
  /// feature C_in x H x W, offsets 2K x H x W (channel 2i = x, 2i+1 = y, in
  /// feature-map cells relative to p), weights C_out x C_in x K, bias C_out.
  /// grad_to_offsets=false blocks the gradient path into the offsets (the
  /// explicit supervision on the bypass remains the only signal).
  Var deformable_pose_conv(Var feature, Var offsets, Var weights, Var bias,
                           bool grad_to_offsets = true);

  /// Custom node: caller supplies the forward value and a backward callback
  /// receiving (output grad, input values, input grads to accumulate into).
  using CustomBackward = std::function<void(const Tensor& out_grad,
                                            const std::vector<const Tensor*>& inputs,
                                            const std::vector<Tensor*>& input_grads)>;
  Var custom(Tensor value, std::vector<Var> inputs, CustomBackward backward);

  /// Reverse-mode accumulation from a scalar loss. Throws on non-scalar.
  void backward(Var scalar_loss);

  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<int> inputs;
    std::function<void(Graph&, int)> backward;
  };

  int check(Var v) const;
  Var push(Tensor value, std::vector<int> inputs, std::function<void(Graph&, int)> bwd);

  std::vector<Node> nodes_;
};

/// Report of one finite-difference gradient check.
struct GradCheckReport {
  std::map<std::string, double> max_rel_err;  // per named input
  bool pass = false;
};

/// Central-difference check of a loss built by `build` over `inputs`.
/// For each input tensor a random subsample of at least `coords_per_tensor`
/// coordinates (all of them when the tensor is smaller) is perturbed by
/// +/- eps; coordinates where |FD| <= 1e-8 are skipped. Relative error is
/// |analytic - fd| / max(|analytic|, |fd|).
///
/// Deep composites break the finite-difference oracle in two ways: relu and
/// bilinear-patch kinks make it piecewise smooth, so a probe interval that
/// straddles a kink yields a quotient that is no derivative at all; and
/// near-dead coordinates carry true gradients below what a difference of
/// two O(|loss|) doubles can resolve at this eps. `fd_guards` forgives a
/// failing coordinate in exactly those two situations: when analytic and FD
/// agree within 8x the resolution floor |loss| * machine_eps / (2 eps), or
/// when a re-estimate at eps/2 disagrees with the eps estimate by more than
/// 0.25 * tol relative (a kink inside the probe interval). A wrong backward
/// rule still fails: it mismatches by margins far above the floor at
/// kink-free coordinates, which the guards never touch.
GradCheckReport gradcheck(
    const std::map<std::string, Tensor>& inputs,
    const std::function<Var(Graph&, const std::map<std::string, Var>&)>& build, double eps,
    double tol, uint64_t seed, int coords_per_tensor = 32, bool fd_guards = false);

}  // namespace posekit
