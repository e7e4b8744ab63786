#include "edl/graph.hpp"

#include "edl/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace edl::nn {
namespace {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using MatMap = Eigen::Map<MatrixX<Scalar>>;

// Per-thread scratch matrices reused across calls.
template <typename Scalar>
MatMap<Scalar> scratch(int slot, Index rows, Index cols) {
  thread_local std::vector<Scalar> buffers[3];
  auto& buf = buffers[slot];
  const auto need = static_cast<std::size_t>(rows * cols);
  if (buf.size() < need) buf.resize(need);
  return MatMap<Scalar>(buf.data(), rows, cols);
}

// Zero-padded layout used by the convolution. Every sample plane is embedded
// in an (H+2p) x (W+2p) grid, and `pad*(W+2p)+pad` slack rows sit before the
// first and after the last plane. With this layout the input pixels seen by
// kernel tap (ky, kx) for all output positions form one contiguous row range
// shifted by (ky-p)*(W+2p) + (kx-p), so a k x k convolution is k*k GEMMs on
// row blocks with no patch matrix.
struct PaddedGrid {
  Index n, h, w, pad, hp, wp, slack;
  template <typename Scalar>
  PaddedGrid(const Tensor<Scalar>& t, int kernel)
      : n(t.batch()), h(t.height()), w(t.width()), pad(kernel / 2), hp(h + 2 * pad), wp(w + 2 * pad),
        slack(pad * wp + pad) {}
  Index rows() const { return n * hp * wp; }
  Index total_rows() const { return rows() + 2 * slack; }
  Index row_of(Index b, Index y, Index x) const { return slack + (b * hp + y + pad) * wp + x + pad; }
  Index tap_offset(int ky, int kx) const { return (ky - pad) * wp + (kx - pad); }
};

template <typename Scalar>
void scatter_to_grid(const MatrixX<Scalar>& src, const PaddedGrid& g, MatMap<Scalar>& dst) {
  dst.setZero();
  for (Index b = 0; b < g.n; ++b)
    for (Index y = 0; y < g.h; ++y)
      dst.middleRows(g.row_of(b, y, 0), g.w) = src.middleRows((b * g.h + y) * g.w, g.w);
}

template <typename Scalar>
void add_from_grid(const MatMap<Scalar>& src, const PaddedGrid& g, MatrixX<Scalar>& dst) {
  for (Index b = 0; b < g.n; ++b)
    for (Index y = 0; y < g.h; ++y)
      dst.middleRows((b * g.h + y) * g.w, g.w) += src.middleRows(g.row_of(b, y, 0), g.w);
}

// Bilinear 2x interpolation along one axis with half-pixel centres:
// out[2i] = 0.75 in[i] + 0.25 in[i-1], out[2i+1] = 0.75 in[i] + 0.25 in[i+1],
// neighbours clamped at the borders.
inline Index clamp_index(Index i, Index n) { return std::clamp<Index>(i, 0, n - 1); }

}  // namespace

template <typename Scalar>
Var Graph<Scalar>::push(TensorT value, bool needs_grad, std::function<void(Graph&, Node&)> back) {
  Node nd;
  nd.value = std::move(value);
  nd.needs_grad = needs_grad;
  nd.back = std::move(back);
  nodes_.push_back(std::move(nd));
  return Var{nodes_.size() - 1};
}

template <typename Scalar>
Tensor<Scalar>& Graph<Scalar>::grad_buffer(Var v) {
  Node& nd = nodes_[v.id];
  if (nd.grad.size() != nd.value.size() || !nd.grad.same_shape(nd.value)) {
    nd.grad = TensorT(nd.value.batch(), nd.value.channels(), nd.value.height(), nd.value.width());
  }
  return nd.grad;
}

template <typename Scalar>
Var Graph<Scalar>::input(TensorT x) { return push(std::move(x), false); }

template <typename Scalar>
Var Graph<Scalar>::variable(TensorT x) { return push(std::move(x), true); }

template <typename Scalar>
Var Graph<Scalar>::conv2d(Var xv, Param& weight, Param& bias, int kernel) {
  const TensorT& x = value(xv);
  if (kernel % 2 != 1) throw InvalidInput("conv2d: kernel must be odd");
  const Index cin = x.channels(), cout = weight.value.cols();
  if (weight.value.rows() != cin * kernel * kernel || bias.value.rows() != cout) {
    throw InvalidInput("conv2d: parameter " + weight.name + " does not match input " + x.shape_string());
  }
  TensorT out(x.batch(), cout, x.height(), x.width());
  if (kernel == 1) {
    out.mat().noalias() = x.mat() * weight.value;
  } else {
    // Weight rows are ordered (in, ky, kx); tap (ky,kx) uses rows with stride k*k.
    const PaddedGrid grid(x, kernel);
    MatMap<Scalar> xp = scratch<Scalar>(0, grid.total_rows(), cin);
    MatMap<Scalar> op = scratch<Scalar>(1, grid.total_rows(), cout);
    scatter_to_grid(x.mat(), grid, xp);
    op.setZero();
    const Index kk = Index{kernel} * kernel;
    MatrixX<Scalar> wk(cin, cout);
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        const Index tap = ky * kernel + kx;
        for (Index c = 0; c < cin; ++c) wk.row(c) = weight.value.row(c * kk + tap);
        const Index off = grid.tap_offset(ky, kx);
        op.middleRows(grid.slack, grid.rows()).noalias() += xp.middleRows(grid.slack + off, grid.rows()) * wk;
      }
    }
    add_from_grid(op, grid, out.mat());
  }
  out.mat().rowwise() += bias.value.col(0).transpose();
  return push(std::move(out), true, [xv, &weight, &bias, kernel](Graph& g, Node& self) {
    const MatrixX<Scalar>& gout = self.grad.mat();
    const TensorT& xin = g.value(xv);
    const bool input_grad = g.needs_grad(xv);
    bias.grad.col(0) += gout.colwise().sum().transpose();
    if (kernel == 1) {
      weight.grad.noalias() += xin.mat().transpose() * gout;
      if (input_grad) g.grad_buffer(xv).mat().noalias() += gout * weight.value.transpose();
      return;
    }
    const Index cin = xin.channels(), cout = gout.cols(), kk = Index{kernel} * kernel;
    const PaddedGrid grid(xin, kernel);
    MatMap<Scalar> xp = scratch<Scalar>(0, grid.total_rows(), cin);
    MatMap<Scalar> gp = scratch<Scalar>(1, grid.total_rows(), cout);
    MatMap<Scalar> gxp = scratch<Scalar>(2, grid.total_rows(), cin);
    scatter_to_grid(xin.mat(), grid, xp);
    scatter_to_grid(gout, grid, gp);
    if (input_grad) gxp.setZero();
    MatrixX<Scalar> wk(cin, cout), dwk(cin, cout);
    const auto gblock = gp.middleRows(grid.slack, grid.rows());
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        const Index tap = ky * kernel + kx;
        const Index off = grid.tap_offset(ky, kx);
        dwk.noalias() = xp.middleRows(grid.slack + off, grid.rows()).transpose() * gblock;
        for (Index c = 0; c < cin; ++c) weight.grad.row(c * kk + tap) += dwk.row(c);
        if (input_grad) {
          for (Index c = 0; c < cin; ++c) wk.row(c) = weight.value.row(c * kk + tap);
          gxp.middleRows(grid.slack + off, grid.rows()).noalias() += gblock * wk.transpose();
        }
      }
    }
    if (input_grad) add_from_grid(gxp, grid, g.grad_buffer(xv).mat());
  });
}

template <typename Scalar>
Var Graph<Scalar>::relu(Var xv) {
  TensorT out = value(xv);
  out.mat() = out.mat().cwiseMax(Scalar(0));
  const bool needs = needs_grad(xv);
  return push(std::move(out), needs, [xv](Graph& g, Node& self) {
    TensorT& gx = g.grad_buffer(xv);
    gx.mat().array() += (self.value.mat().array() > Scalar(0)).select(self.grad.mat().array(), Scalar(0));
  });
}

template <typename Scalar>
Var Graph<Scalar>::softplus(Var xv) {
  const TensorT& x = value(xv);
  TensorT out = x;
  out.mat() = x.mat().unaryExpr([](Scalar v) -> Scalar {
    return v > Scalar(0) ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
  });
  const bool needs = needs_grad(xv);
  return push(std::move(out), needs, [xv](Graph& g, Node& self) {
    const Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic> sig = g.value(xv).mat().array().unaryExpr([](Scalar v) -> Scalar {
      return v >= Scalar(0) ? Scalar(1) / (Scalar(1) + std::exp(-v)) : std::exp(v) / (Scalar(1) + std::exp(v));
    });
    TensorT& gx = g.grad_buffer(xv);
    gx.mat().array() += sig * self.grad.mat().array();
  });
}

template <typename Scalar>
Var Graph<Scalar>::softmax(Var xv) {
  const TensorT& x = value(xv);
  TensorT out = x;
  MatrixX<Scalar>& m = out.mat();
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mx = m.rowwise().maxCoeff();
  m.colwise() -= mx;
  m = m.array().exp().matrix();
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> z = m.rowwise().sum();
  m.array().colwise() /= z.array();
  const bool needs = needs_grad(xv);
  return push(std::move(out), needs, [xv](Graph& g, Node& self) {
    const Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>& p = self.value.mat().array();
    const Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>& gy = self.grad.mat().array();
    const Eigen::Array<Scalar, Eigen::Dynamic, 1> dot = (p * gy).rowwise().sum();
    TensorT& gx = g.grad_buffer(xv);
    gx.mat().array() += p * (gy.colwise() - dot);
  });
}

template <typename Scalar>
Var Graph<Scalar>::dropout(Var xv, double rate, SplitMix64& rng) {
  if (rate < 0.0 || rate >= 1.0) throw InvalidInput("dropout: rate must be in [0,1)");
  if (rate == 0.0) {
    TensorT out = value(xv);
    const bool needs = needs_grad(xv);
    return push(std::move(out), needs, [xv](Graph& g, Node& self) { g.grad_buffer(xv).mat() += self.grad.mat(); });
  }
  const auto keep_scale = static_cast<Scalar>(1.0 / (1.0 - rate));
  MatrixX<Scalar> mask(value(xv).mat().rows(), value(xv).mat().cols());
  for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng.uniform() < rate ? Scalar(0) : keep_scale;
  TensorT out = value(xv);
  out.mat().array() *= mask.array();
  const bool needs = needs_grad(xv);
  return push(std::move(out), needs, [xv, mask = std::move(mask)](Graph& g, Node& self) {
    g.grad_buffer(xv).mat().array() += mask.array() * self.grad.mat().array();
  });
}

template <typename Scalar>
Var Graph<Scalar>::max_pool2(Var xv) {
  const TensorT& x = value(xv);
  if (x.height() % 2 != 0 || x.width() % 2 != 0) throw InvalidInput("max_pool2: odd spatial size " + x.shape_string());
  const Index n = x.batch(), h = x.height(), w = x.width(), oh = h / 2, ow = w / 2;
  TensorT out(n, x.channels(), oh, ow);
  Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic> arg(out.pixels(), x.channels());
  for (Index c = 0; c < x.channels(); ++c) {
    const Scalar* src = x.mat().col(c).data();
    Scalar* dst = out.mat().col(c).data();
    std::int32_t* a = arg.col(c).data();
    for (Index b = 0; b < n; ++b) {
      for (Index y = 0; y < oh; ++y) {
        for (Index xx = 0; xx < ow; ++xx) {
          const Index base = (b * h + 2 * y) * w + 2 * xx;
          const Index cand[4] = {base, base + 1, base + w, base + w + 1};
          Index best = cand[0];
          for (int k = 1; k < 4; ++k)
            if (src[cand[k]] > src[best]) best = cand[k];
          const Index o = (b * oh + y) * ow + xx;
          dst[o] = src[best];
          a[o] = static_cast<std::int32_t>(best);
        }
      }
    }
  }
  const bool needs = needs_grad(xv);
  return push(std::move(out), needs, [xv, arg = std::move(arg)](Graph& g, Node& self) {
    TensorT& gx = g.grad_buffer(xv);
    for (Index c = 0; c < arg.cols(); ++c) {
      Scalar* dst = gx.mat().col(c).data();
      const Scalar* src = self.grad.mat().col(c).data();
      const std::int32_t* a = arg.col(c).data();
      for (Index o = 0; o < arg.rows(); ++o) dst[a[o]] += src[o];
    }
  });
}

template <typename Scalar>
Var Graph<Scalar>::upsample2(Var xv) {
  const TensorT& x = value(xv);
  const Index n = x.batch(), h = x.height(), w = x.width(), oh = 2 * h, ow = 2 * w;
  TensorT out(n, x.channels(), oh, ow);
  std::vector<Scalar> tmp(static_cast<std::size_t>(h * ow));
  for (Index c = 0; c < x.channels(); ++c) {
    for (Index b = 0; b < n; ++b) {
      const Scalar* src = x.mat().col(c).data() + b * h * w;
      Scalar* dst = out.mat().col(c).data() + b * oh * ow;
      for (Index y = 0; y < h; ++y) {
        const Scalar* s = src + y * w;
        Scalar* t = tmp.data() + y * ow;
        for (Index i = 0; i < w; ++i) {
          t[2 * i] = Scalar(0.75) * s[i] + Scalar(0.25) * s[clamp_index(i - 1, w)];
          t[2 * i + 1] = Scalar(0.75) * s[i] + Scalar(0.25) * s[clamp_index(i + 1, w)];
        }
      }
      for (Index i = 0; i < h; ++i) {
        const Scalar* r = tmp.data() + i * ow;
        const Scalar* rm = tmp.data() + clamp_index(i - 1, h) * ow;
        const Scalar* rp = tmp.data() + clamp_index(i + 1, h) * ow;
        Scalar* d0 = dst + (2 * i) * ow;
        Scalar* d1 = dst + (2 * i + 1) * ow;
        for (Index xx = 0; xx < ow; ++xx) {
          d0[xx] = Scalar(0.75) * r[xx] + Scalar(0.25) * rm[xx];
          d1[xx] = Scalar(0.75) * r[xx] + Scalar(0.25) * rp[xx];
        }
      }
    }
  }
  const bool needs = needs_grad(xv);
  return push(std::move(out), needs, [xv](Graph& g, Node& self) {
    TensorT& gx = g.grad_buffer(xv);
    const Index n = gx.batch(), h = gx.height(), w = gx.width(), ow = 2 * w;
    std::vector<Scalar> tmp(static_cast<std::size_t>(h * ow));
    for (Index c = 0; c < gx.channels(); ++c) {
      for (Index b = 0; b < n; ++b) {
        const Scalar* gsrc = self.grad.mat().col(c).data() + b * 2 * h * ow;
        Scalar* dst = gx.mat().col(c).data() + b * h * w;
        std::fill(tmp.begin(), tmp.end(), Scalar(0));
        for (Index i = 0; i < h; ++i) {
          const Scalar* g0 = gsrc + (2 * i) * ow;
          const Scalar* g1 = gsrc + (2 * i + 1) * ow;
          Scalar* r = tmp.data() + i * ow;
          Scalar* rm = tmp.data() + clamp_index(i - 1, h) * ow;
          Scalar* rp = tmp.data() + clamp_index(i + 1, h) * ow;
          for (Index xx = 0; xx < ow; ++xx) {
            r[xx] += Scalar(0.75) * (g0[xx] + g1[xx]);
            rm[xx] += Scalar(0.25) * g0[xx];
            rp[xx] += Scalar(0.25) * g1[xx];
          }
        }
        for (Index y = 0; y < h; ++y) {
          const Scalar* t = tmp.data() + y * ow;
          Scalar* d = dst + y * w;
          for (Index i = 0; i < w; ++i) {
            d[i] += Scalar(0.75) * (t[2 * i] + t[2 * i + 1]);
            d[clamp_index(i - 1, w)] += Scalar(0.25) * t[2 * i];
            d[clamp_index(i + 1, w)] += Scalar(0.25) * t[2 * i + 1];
          }
        }
      }
    }
  });
}

template <typename Scalar>
Var Graph<Scalar>::concat(Var av, Var bv) {
  const TensorT& a = value(av);
  const TensorT& b = value(bv);
  if (a.batch() != b.batch() || a.height() != b.height() || a.width() != b.width()) {
    throw InvalidInput("concat: " + a.shape_string() + " vs " + b.shape_string());
  }
  MatrixX<Scalar> m(a.pixels(), a.channels() + b.channels());
  m << a.mat(), b.mat();
  const Index ca = a.channels(), cb = b.channels();
  const bool needs = needs_grad(av) || needs_grad(bv);
  return push(TensorT(a.batch(), a.height(), a.width(), std::move(m)), needs, [av, bv, ca, cb](Graph& g, Node& self) {
    if (g.needs_grad(av)) g.grad_buffer(av).mat() += self.grad.mat().leftCols(ca);
    if (g.needs_grad(bv)) g.grad_buffer(bv).mat() += self.grad.mat().rightCols(cb);
  });
}

template <typename Scalar>
Var Graph<Scalar>::scaled_sum(Var xv, Scalar scale) {
  TensorT out(1, 1, 1, 1);
  out.mat()(0, 0) = scale * value(xv).mat().sum();
  const bool needs = needs_grad(xv);
  return push(std::move(out), needs, [xv, scale](Graph& g, Node& self) {
    g.grad_buffer(xv).mat().array() += scale * self.grad.mat()(0, 0);
  });
}

template <typename Scalar>
void Graph<Scalar>::backward(Var out, const TensorT& seed) {
  if (nodes_.empty() || out.id >= nodes_.size()) throw StateError("backward: no recorded forward pass");
  if (!seed.same_shape(value(out))) {
    throw InvalidInput("backward: seed " + seed.shape_string() + " does not match output " + value(out).shape_string());
  }
  grad_buffer(out).mat() += seed.mat();
  for (std::size_t i = out.id + 1; i-- > 0;) {
    Node& nd = nodes_[i];
    if (!nd.back || !nd.needs_grad || nd.grad.size() == 0) continue;
    nd.back(*this, nd);
  }
}

template class Graph<float>;
template class Graph<double>;

}  // namespace edl::nn
