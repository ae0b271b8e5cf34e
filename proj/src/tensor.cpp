#include "posekit/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "posekit/rng.hpp"

namespace posekit {

namespace {

int product(const std::vector<int>& shape) {
  int n = 1;
  for (int d : shape) {
    if (d < 0) throw std::invalid_argument("negative dimension");
    n *= d;
  }
  return n;
}

// Shared bilinear kernel: value, cell weights, and coordinate derivative.
struct BilinearTaps {
  int x0, x1, y0, y1;
  double fx, fy;
  bool x_inside, y_inside;  // clamp pass-through per axis
};

BilinearTaps bilinear_taps(double x, double y, int w, int h) {
  BilinearTaps t{};
  t.x_inside = (x >= 0.0 && x <= w - 1);
  t.y_inside = (y >= 0.0 && y <= h - 1);
  const double xc = std::clamp(x, 0.0, static_cast<double>(w - 1));
  const double yc = std::clamp(y, 0.0, static_cast<double>(h - 1));
  t.x0 = std::min(static_cast<int>(std::floor(xc)), std::max(w - 2, 0));
  t.y0 = std::min(static_cast<int>(std::floor(yc)), std::max(h - 2, 0));
  t.x1 = std::min(t.x0 + 1, w - 1);
  t.y1 = std::min(t.y0 + 1, h - 1);
  t.fx = xc - t.x0;
  t.fy = yc - t.y0;
  return t;
}

}  // namespace

Tensor::Tensor(std::vector<int> s, double fill) : shape(std::move(s)) {
  values.assign(static_cast<size_t>(product(shape)), fill);
}

Tensor Tensor::scalar(double v) {
  Tensor t;
  t.values = {v};
  return t;
}

Tensor Tensor::from(std::vector<int> s, std::vector<double> v) {
  Tensor t;
  t.shape = std::move(s);
  if (static_cast<int>(v.size()) != product(t.shape))
    throw std::invalid_argument("Tensor::from: values length does not match shape");
  t.values = std::move(v);
  return t;
}

int Tensor::size() const { return static_cast<int>(values.size()); }

int Graph::check(Var v) const {
  if (v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
    throw std::invalid_argument("invalid Var");
  return v.id;
}

Var Graph::push(Tensor value, std::vector<int> inputs, std::function<void(Graph&, int)> bwd) {
  Node n;
  n.grad = Tensor(value.shape, 0.0);
  n.value = std::move(value);
  n.inputs = std::move(inputs);
  n.backward = std::move(bwd);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Graph::leaf(Tensor value) { return push(std::move(value), {}, nullptr); }

Var Graph::conv2d(Var input, Var weights, Var bias, int stride, int padding) {
  const Tensor& in = value(input);
  const Tensor& w = value(weights);
  const Tensor& b = value(bias);
  if (in.shape.size() != 3 || w.shape.size() != 4 || b.shape.size() != 1)
    throw std::invalid_argument("conv2d: expects input C x H x W, weights O x C x k x k, bias O");
  const int c_in = in.shape[0], h = in.shape[1], wd = in.shape[2];
  const int c_out = w.shape[0], k = w.shape[2];
  if (w.shape[1] != c_in) throw std::invalid_argument("conv2d: channel mismatch");
  if (w.shape[3] != k || (k != 1 && k != 3)) throw std::invalid_argument("conv2d: kernel must be 1 or 3");
  if (b.shape[0] != c_out) throw std::invalid_argument("conv2d: bias size mismatch");
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");

  const int oh = (h + 2 * padding - k) / stride + 1;
  const int ow = (wd + 2 * padding - k) / stride + 1;
  if (oh < 1 || ow < 1) throw std::invalid_argument("conv2d: empty output");

  Tensor out({c_out, oh, ow});
  for (int co = 0; co < c_out; ++co) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double acc = b.values[static_cast<size_t>(co)];
        for (int ci = 0; ci < c_in; ++ci) {
          for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * stride - padding + ky;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ox * stride - padding + kx;
              if (ix < 0 || ix >= wd) continue;
              acc += in.at3(ci, iy, ix) *
                     w.values[static_cast<size_t>(((co * c_in + ci) * k + ky) * k + kx)];
            }
          }
        }
        out.at3(co, oy, ox) = acc;
      }
    }
  }

  auto bwd = [stride, padding, k, c_in, c_out, h, wd, oh, ow](Graph& g, int self) {
    const Tensor& gg = g.nodes_[self].grad;
    const int in_id = g.nodes_[self].inputs[0];
    const int w_id = g.nodes_[self].inputs[1];
    const int b_id = g.nodes_[self].inputs[2];
    const Tensor& in = g.nodes_[in_id].value;
    const Tensor& w = g.nodes_[w_id].value;
    Tensor& din = g.nodes_[in_id].grad;
    Tensor& dw = g.nodes_[w_id].grad;
    Tensor& db = g.nodes_[b_id].grad;
    for (int co = 0; co < c_out; ++co) {
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          const double gv = gg.at3(co, oy, ox);
          if (gv == 0.0) continue;
          db.values[static_cast<size_t>(co)] += gv;
          for (int ci = 0; ci < c_in; ++ci) {
            for (int ky = 0; ky < k; ++ky) {
              const int iy = oy * stride - padding + ky;
              if (iy < 0 || iy >= h) continue;
              for (int kx = 0; kx < k; ++kx) {
                const int ix = ox * stride - padding + kx;
                if (ix < 0 || ix >= wd) continue;
                const size_t wi = static_cast<size_t>(((co * c_in + ci) * k + ky) * k + kx);
                din.at3(ci, iy, ix) += w.values[wi] * gv;
                dw.values[wi] += in.at3(ci, iy, ix) * gv;
              }
            }
          }
        }
      }
    }
  };
  return push(std::move(out), {input.id, weights.id, bias.id}, bwd);
}

Var Graph::relu(Var x) {
  Tensor out = value(x);
  for (double& v : out.values) v = std::max(0.0, v);
  auto bwd = [](Graph& g, int self) {
    const int in_id = g.nodes_[self].inputs[0];
    const Tensor& in = g.nodes_[in_id].value;
    const Tensor& gg = g.nodes_[self].grad;
    Tensor& din = g.nodes_[in_id].grad;
    for (size_t i = 0; i < in.values.size(); ++i)
      if (in.values[i] > 0.0) din.values[i] += gg.values[i];
  };
  return push(std::move(out), {x.id}, bwd);
}

Var Graph::add(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!ta.same_shape(tb)) throw std::invalid_argument("add: shape mismatch");
  Tensor out = ta;
  for (size_t i = 0; i < out.values.size(); ++i) out.values[i] += tb.values[i];
  auto bwd = [](Graph& g, int self) {
    const Tensor& gg = g.nodes_[self].grad;
    for (int in_id : g.nodes_[self].inputs) {
      Tensor& din = g.nodes_[in_id].grad;
      for (size_t i = 0; i < gg.values.size(); ++i) din.values[i] += gg.values[i];
    }
  };
  return push(std::move(out), {a.id, b.id}, bwd);
}

Var Graph::scale(Var x, double c) {
  Tensor out = value(x);
  for (double& v : out.values) v *= c;
  auto bwd = [c](Graph& g, int self) {
    const Tensor& gg = g.nodes_[self].grad;
    Tensor& din = g.nodes_[g.nodes_[self].inputs[0]].grad;
    for (size_t i = 0; i < gg.values.size(); ++i) din.values[i] += c * gg.values[i];
  };
  return push(std::move(out), {x.id}, bwd);
}

Var Graph::upsample_nearest2(Var x) {
  const Tensor& in = value(x);
  if (in.shape.size() != 3) throw std::invalid_argument("upsample_nearest2: expects C x H x W");
  const int c = in.shape[0], h = in.shape[1], w = in.shape[2];
  Tensor out({c, 2 * h, 2 * w});
  for (int ci = 0; ci < c; ++ci)
    for (int y = 0; y < 2 * h; ++y)
      for (int xx = 0; xx < 2 * w; ++xx) out.at3(ci, y, xx) = in.at3(ci, y / 2, xx / 2);
  auto bwd = [c, h, w](Graph& g, int self) {
    const Tensor& gg = g.nodes_[self].grad;
    Tensor& din = g.nodes_[g.nodes_[self].inputs[0]].grad;
    for (int ci = 0; ci < c; ++ci)
      for (int y = 0; y < 2 * h; ++y)
        for (int xx = 0; xx < 2 * w; ++xx) din.at3(ci, y / 2, xx / 2) += gg.at3(ci, y, xx);
  };
  return push(std::move(out), {x.id}, bwd);
}

Var Graph::sum(Var x) {
  const Tensor& in = value(x);
  double s = 0.0;
  for (double v : in.values) s += v;
  auto bwd = [](Graph& g, int self) {
    const double gv = g.nodes_[self].grad.values[0];
    Tensor& din = g.nodes_[g.nodes_[self].inputs[0]].grad;
    for (double& v : din.values) v += gv;
  };
  return push(Tensor::scalar(s), {x.id}, bwd);
}

Var Graph::bilinear_sample(Var feature, Var point) {
  const Tensor& f = value(feature);
  const Tensor& p = value(point);
  if (f.shape.size() != 3) throw std::invalid_argument("bilinear_sample: feature must be C x H x W");
  if (p.size() != 2) throw std::invalid_argument("bilinear_sample: point must have 2 elements");
  const int c = f.shape[0], h = f.shape[1], w = f.shape[2];
  const BilinearTaps t = bilinear_taps(p.values[0], p.values[1], w, h);

  Tensor out({c});
  for (int ci = 0; ci < c; ++ci) {
    const double top = (1 - t.fx) * f.at3(ci, t.y0, t.x0) + t.fx * f.at3(ci, t.y0, t.x1);
    const double bot = (1 - t.fx) * f.at3(ci, t.y1, t.x0) + t.fx * f.at3(ci, t.y1, t.x1);
    out.values[static_cast<size_t>(ci)] = (1 - t.fy) * top + t.fy * bot;
  }

  auto bwd = [c, h, w, t](Graph& g, int self) {
    const Tensor& gg = g.nodes_[self].grad;
    const int f_id = g.nodes_[self].inputs[0];
    const int p_id = g.nodes_[self].inputs[1];
    const Tensor& f = g.nodes_[f_id].value;
    Tensor& df = g.nodes_[f_id].grad;
    Tensor& dp = g.nodes_[p_id].grad;
    double gx = 0.0, gy = 0.0;
    for (int ci = 0; ci < c; ++ci) {
      const double gv = gg.values[static_cast<size_t>(ci)];
      df.at3(ci, t.y0, t.x0) += gv * (1 - t.fy) * (1 - t.fx);
      df.at3(ci, t.y0, t.x1) += gv * (1 - t.fy) * t.fx;
      df.at3(ci, t.y1, t.x0) += gv * t.fy * (1 - t.fx);
      df.at3(ci, t.y1, t.x1) += gv * t.fy * t.fx;
      const double dvdx = (1 - t.fy) * (f.at3(ci, t.y0, t.x1) - f.at3(ci, t.y0, t.x0)) +
                          t.fy * (f.at3(ci, t.y1, t.x1) - f.at3(ci, t.y1, t.x0));
      const double dvdy = (1 - t.fx) * (f.at3(ci, t.y1, t.x0) - f.at3(ci, t.y0, t.x0)) +
                          t.fx * (f.at3(ci, t.y1, t.x1) - f.at3(ci, t.y0, t.x1));
      gx += gv * dvdx;
      gy += gv * dvdy;
    }
    if (t.x_inside) dp.values[0] += gx;
    if (t.y_inside) dp.values[1] += gy;
  };
  return push(std::move(out), {feature.id, point.id}, bwd);
}

Var Graph::deformable_pose_conv(Var feature, Var offsets, Var weights, Var bias,
                                bool grad_to_offsets) {
  const Tensor& f = value(feature);
  const Tensor& off = value(offsets);
  const Tensor& w = value(weights);
  const Tensor& b = value(bias);
  if (f.shape.size() != 3 || off.shape.size() != 3 || w.shape.size() != 3 || b.shape.size() != 1)
    throw std::invalid_argument("deformable_pose_conv: bad ranks");
  const int c_in = f.shape[0], h = f.shape[1], wd = f.shape[2];
  const int c_out = w.shape[0], k = w.shape[2];
  if (w.shape[1] != c_in) throw std::invalid_argument("deformable_pose_conv: channel mismatch");
  if (off.shape[0] != 2 * k)
    throw std::invalid_argument("deformable_pose_conv: offsets must have 2K channels, got " +
                                std::to_string(off.shape[0]) + " for K=" + std::to_string(k));
  if (off.shape[1] != h || off.shape[2] != wd)
    throw std::invalid_argument("deformable_pose_conv: offsets grid mismatch");
  if (b.shape[0] != c_out) throw std::invalid_argument("deformable_pose_conv: bias size mismatch");

  Tensor out({c_out, h, wd});
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < wd; ++c) {
      for (int co = 0; co < c_out; ++co) out.at3(co, r, c) = b.values[static_cast<size_t>(co)];
      for (int i = 0; i < k; ++i) {
        const double px = c + off.at3(2 * i, r, c);
        const double py = r + off.at3(2 * i + 1, r, c);
        const BilinearTaps t = bilinear_taps(px, py, wd, h);
        for (int ci = 0; ci < c_in; ++ci) {
          const double top = (1 - t.fx) * f.at3(ci, t.y0, t.x0) + t.fx * f.at3(ci, t.y0, t.x1);
          const double bot = (1 - t.fx) * f.at3(ci, t.y1, t.x0) + t.fx * f.at3(ci, t.y1, t.x1);
          const double psi = (1 - t.fy) * top + t.fy * bot;
          for (int co = 0; co < c_out; ++co)
            out.at3(co, r, c) += w.values[static_cast<size_t>((co * c_in + ci) * k + i)] * psi;
        }
      }
    }
  }

  auto bwd = [c_in, c_out, h, wd, k, grad_to_offsets](Graph& g, int self) {
    const int f_id = g.nodes_[self].inputs[0];
    const int o_id = g.nodes_[self].inputs[1];
    const int w_id = g.nodes_[self].inputs[2];
    const int b_id = g.nodes_[self].inputs[3];
    const Tensor& gg = g.nodes_[self].grad;
    const Tensor& f = g.nodes_[f_id].value;
    const Tensor& off = g.nodes_[o_id].value;
    const Tensor& w = g.nodes_[w_id].value;
    Tensor& df = g.nodes_[f_id].grad;
    Tensor& doff = g.nodes_[o_id].grad;
    Tensor& dw = g.nodes_[w_id].grad;
    Tensor& db = g.nodes_[b_id].grad;

    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < wd; ++c) {
        for (int co = 0; co < c_out; ++co) db.values[static_cast<size_t>(co)] += gg.at3(co, r, c);
        for (int i = 0; i < k; ++i) {
          const double px = c + off.at3(2 * i, r, c);
          const double py = r + off.at3(2 * i + 1, r, c);
          const BilinearTaps t = bilinear_taps(px, py, wd, h);
          double gx = 0.0, gy = 0.0;
          for (int ci = 0; ci < c_in; ++ci) {
            const double f00 = f.at3(ci, t.y0, t.x0), f01 = f.at3(ci, t.y0, t.x1);
            const double f10 = f.at3(ci, t.y1, t.x0), f11 = f.at3(ci, t.y1, t.x1);
            const double psi = (1 - t.fy) * ((1 - t.fx) * f00 + t.fx * f01) +
                               t.fy * ((1 - t.fx) * f10 + t.fx * f11);
            // Upstream gradient reaching psi_i for this channel.
            double gpsi = 0.0;
            for (int co = 0; co < c_out; ++co) {
              const double gv = gg.at3(co, r, c);
              const size_t wi = static_cast<size_t>((co * c_in + ci) * k + i);
              gpsi += gv * w.values[wi];
              dw.values[wi] += gv * psi;
            }
            if (gpsi == 0.0) continue;
            df.at3(ci, t.y0, t.x0) += gpsi * (1 - t.fy) * (1 - t.fx);
            df.at3(ci, t.y0, t.x1) += gpsi * (1 - t.fy) * t.fx;
            df.at3(ci, t.y1, t.x0) += gpsi * t.fy * (1 - t.fx);
            df.at3(ci, t.y1, t.x1) += gpsi * t.fy * t.fx;
            gx += gpsi * ((1 - t.fy) * (f01 - f00) + t.fy * (f11 - f10));
            gy += gpsi * ((1 - t.fx) * (f10 - f00) + t.fx * (f11 - f01));
          }
          if (grad_to_offsets) {
            if (t.x_inside) doff.at3(2 * i, r, c) += gx;
            if (t.y_inside) doff.at3(2 * i + 1, r, c) += gy;
          }
        }
      }
    }
  };
  return push(std::move(out), {feature.id, offsets.id, weights.id, bias.id}, bwd);
}

Var Graph::custom(Tensor value, std::vector<Var> inputs, CustomBackward backward) {
  std::vector<int> ids;
  ids.reserve(inputs.size());
  for (Var v : inputs) ids.push_back(check(v));
  auto bwd = [cb = std::move(backward)](Graph& g, int self) {
    std::vector<const Tensor*> ins;
    std::vector<Tensor*> grads;
    for (int id : g.nodes_[self].inputs) {
      ins.push_back(&g.nodes_[id].value);
      grads.push_back(&g.nodes_[id].grad);
    }
    cb(g.nodes_[self].grad, ins, grads);
  };
  return push(std::move(value), std::move(ids), bwd);
}

void Graph::backward(Var scalar_loss) {
  const int id = check(scalar_loss);
  if (nodes_[id].value.size() != 1 || !nodes_[id].value.shape.empty())
    throw std::invalid_argument("backward: loss must be a scalar (rank-0) tensor");
  nodes_[id].grad.values[0] += 1.0;
  for (int i = id; i >= 0; --i)
    if (nodes_[i].backward) nodes_[i].backward(*this, i);
}

GradCheckReport gradcheck(
    const std::map<std::string, Tensor>& inputs,
    const std::function<Var(Graph&, const std::map<std::string, Var>&)>& build, double eps,
    double tol, uint64_t seed, int coords_per_tensor, bool fd_guards) {
  // Analytic pass.
  std::map<std::string, Tensor> analytic;
  double loss_value = 0.0;
  {
    Graph g;
    std::map<std::string, Var> vars;
    for (const auto& [name, t] : inputs) vars[name] = g.leaf(t);
    Var loss = build(g, vars);
    loss_value = g.value(loss).values[0];
    g.backward(loss);
    for (const auto& [name, v] : vars) analytic[name] = g.grad(v);
  }
  // What a difference of two O(|loss|) doubles can resolve, as a slope.
  const double fd_floor =
      8.0 * std::abs(loss_value) * std::numeric_limits<double>::epsilon() / (2.0 * eps);

  auto eval_loss = [&](const std::map<std::string, Tensor>& pert) {
    Graph g;
    std::map<std::string, Var> vars;
    for (const auto& [name, t] : pert) vars[name] = g.leaf(t);
    return g.value(build(g, vars)).values[0];
  };

  GradCheckReport report;
  report.pass = true;
  Rng rng(seed);
  std::map<std::string, Tensor> work = inputs;
  for (const auto& [name, t] : inputs) {
    const int n = t.size();
    std::vector<int> coords;
    if (n <= coords_per_tensor) {
      coords.resize(static_cast<size_t>(n));
      for (int i = 0; i < n; ++i) coords[static_cast<size_t>(i)] = i;
    } else {
      for (int i = 0; i < coords_per_tensor; ++i)
        coords.push_back(static_cast<int>(rng.below(static_cast<uint64_t>(n))));
    }
    double worst = 0.0;
    for (int ci : coords) {
      const double orig = work[name].values[static_cast<size_t>(ci)];
      work[name].values[static_cast<size_t>(ci)] = orig + eps;
      const double fp = eval_loss(work);
      work[name].values[static_cast<size_t>(ci)] = orig - eps;
      const double fm = eval_loss(work);
      work[name].values[static_cast<size_t>(ci)] = orig;
      const double fd = (fp - fm) / (2.0 * eps);
      if (std::abs(fd) <= 1e-8) continue;
      const double a = analytic[name].values[static_cast<size_t>(ci)];
      const double rel = std::abs(a - fd) / std::max(std::abs(a), std::abs(fd));
      if (rel > tol && fd_guards) {
        // A near-dead coordinate agreeing to within the resolution floor is
        // below what the probe can measure at all.
        if (std::abs(a - fd) <= fd_floor) continue;
        // Re-estimate at eps/2: halving eps shrinks truncation fourfold, so
        // disagreement beyond what tol certifies means the probe interval
        // straddles a kink and the quotient is not a derivative.
        work[name].values[static_cast<size_t>(ci)] = orig + 0.5 * eps;
        const double fp2 = eval_loss(work);
        work[name].values[static_cast<size_t>(ci)] = orig - 0.5 * eps;
        const double fm2 = eval_loss(work);
        work[name].values[static_cast<size_t>(ci)] = orig;
        const double fd_half = (fp2 - fm2) / eps;
        if (std::abs(fd - fd_half) >
            0.25 * tol * std::max(std::abs(fd), std::abs(fd_half)))
          continue;
      }
      worst = std::max(worst, rel);
    }
    report.max_rel_err[name] = worst;
    if (worst > tol) report.pass = false;
  }
  return report;
}

}  // namespace posekit
